#ifndef VCCNET_TESTS_SUPPORT_HPP
#define VCCNET_TESTS_SUPPORT_HPP

// Brute-force reference implementations and generators shared by the tests.
// The oracles work on nested std::vector with explicit loops and never call
// into the library's numeric code.

#include "vccnet/autodiff.hpp"
#include "vccnet/layers.hpp"
#include "vccnet/trace.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <random>
#include <vector>

namespace oracle {

using Mat = std::vector<std::vector<double>>;
using Nbrs = std::vector<std::vector<int>>;

inline Mat from_eigen(const vccnet::ad::Matrix& m) {
    Mat out(static_cast<std::size_t>(m.rows()), std::vector<double>(static_cast<std::size_t>(m.cols())));
    for (Eigen::Index i = 0; i < m.rows(); ++i)
        for (Eigen::Index j = 0; j < m.cols(); ++j) out[i][j] = m(i, j);
    return out;
}

template <typename M>
double max_abs_diff(const Mat& a, const M& b) {
    double worst = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i)
        for (std::size_t j = 0; j < a[i].size(); ++j)
            worst = std::max(worst, std::abs(a[i][j] - b(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j))));
    return worst;
}

inline Mat pairwise(const Mat& x) {
    const std::size_t n = x.size();
    Mat d(n, std::vector<double>(n, 0.0));
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            double s = 0.0;
            for (std::size_t c = 0; c < x[i].size(); ++c) s += (x[i][c] - x[j][c]) * (x[i][c] - x[j][c]);
            d[i][j] = std::sqrt(s);
        }
    return d;
}

inline Mat attention_pairwise(const std::vector<double>& a) {
    Mat d(a.size(), std::vector<double>(a.size()));
    for (std::size_t i = 0; i < a.size(); ++i)
        for (std::size_t j = 0; j < a.size(); ++j) d[i][j] = std::abs(a[i] - a[j]);
    return d;
}

inline Mat minmax(const Mat& d) {
    double lo = d[0][0], hi = d[0][0];
    for (const auto& r : d)
        for (double v : r) {
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
    Mat out = d;
    for (auto& r : out)
        for (double& v : r) v = hi > lo ? (v - lo) / (hi - lo) : 0.0;
    return out;
}

inline Mat fuse(const Mat& a, const Mat& b, double alpha) {
    Mat out = a;
    for (std::size_t i = 0; i < a.size(); ++i)
        for (std::size_t j = 0; j < a[i].size(); ++j) out[i][j] = a[i][j] + alpha * b[i][j];
    return out;
}

/// Full stable sort of every other node by (distance, index).
inline Nbrs knn(const Mat& d, int k) {
    Nbrs out(d.size());
    for (std::size_t i = 0; i < d.size(); ++i) {
        std::vector<std::pair<double, int>> cand;
        for (std::size_t j = 0; j < d.size(); ++j)
            if (j != i) cand.emplace_back(d[i][j], static_cast<int>(j));
        std::sort(cand.begin(), cand.end());
        for (int t = 0; t < k; ++t) out[i].push_back(cand[t].second);
    }
    return out;
}

inline double gelu(double v) { return 0.5 * v * (1.0 + std::erf(v / std::sqrt(2.0))); }

inline Mat linear(const Mat& x, const Mat& w, const std::vector<double>& b) {
    Mat out(x.size(), std::vector<double>(b.size()));
    for (std::size_t i = 0; i < x.size(); ++i)
        for (std::size_t o = 0; o < b.size(); ++o) {
            double s = b[o];
            for (std::size_t c = 0; c < x[i].size(); ++c) s += x[i][c] * w[c][o];
            out[i][o] = s;
        }
    return out;
}

inline Mat apply(Mat x, double (*f)(double)) {
    for (auto& r : x)
        for (double& v : r) v = f(v);
    return x;
}

inline Mat add(Mat a, const Mat& b) {
    for (std::size_t i = 0; i < a.size(); ++i)
        for (std::size_t j = 0; j < a[i].size(); ++j) a[i][j] += b[i][j];
    return a;
}

struct LinearParams {
    Mat w;
    std::vector<double> b;
};

inline LinearParams params_of(const vccnet::Linear& l) {
    return {from_eigen(l.weight.value()), from_eigen(l.bias.value())[0]};
}

/// concat(x_i, max_{j in N(i)} (x_j - x_i)) then affine; no neighbours -> zeros.
inline Mat mrgc(const Mat& x, const Nbrs& nbrs, const LinearParams& mix) {
    Mat z(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        z[i] = x[i];
        for (std::size_t c = 0; c < x[i].size(); ++c) {
            double best = -INFINITY;
            for (int j : nbrs[i]) best = std::max(best, x[j][c] - x[i][c]);
            z[i].push_back(nbrs[i].empty() ? 0.0 : best);
        }
    }
    return linear(z, mix.w, mix.b);
}

inline Mat gnn_block(const Mat& x, const Nbrs& nbrs, const vccnet::GnnBlock& blk) {
    const Mat h = apply(linear(x, params_of(blk.fc1).w, params_of(blk.fc1).b), gelu);
    const Mat g = mrgc(h, nbrs, params_of(blk.gc.mix));
    const Mat x1 = add(linear(g, params_of(blk.fc2).w, params_of(blk.fc2).b), x);
    const Mat f = apply(linear(x1, params_of(blk.fc3).w, params_of(blk.fc3).b), gelu);
    return add(linear(f, params_of(blk.fc4).w, params_of(blk.fc4).b), x1);
}

/// Feature maps as [b][y][x][c].
using Map4 = std::vector<std::vector<std::vector<std::vector<double>>>>;

inline Map4 to_map(const vccnet::ad::Matrix& rows, int batch, int h, int w) {
    Map4 m(batch, std::vector<std::vector<std::vector<double>>>(h, std::vector<std::vector<double>>(w)));
    for (int b = 0; b < batch; ++b)
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                const Eigen::Index r = (static_cast<Eigen::Index>(b) * h + y) * w + x;
                for (Eigen::Index c = 0; c < rows.cols(); ++c) m[b][y][x].push_back(rows(r, c));
            }
    return m;
}

inline Mat to_rows(const Map4& m) {
    Mat out;
    for (const auto& b : m)
        for (const auto& row : b)
            for (const auto& px : row) out.push_back(px);
    return out;
}

/// Zero-padded 3x3 cross-correlation; weight rows (ky*3+kx)*in + ci.
inline Map4 conv3x3(const Map4& in, const Mat& w, const std::vector<double>& bias, int stride) {
    const int batch = static_cast<int>(in.size());
    const int h = static_cast<int>(in[0].size());
    const int wd = static_cast<int>(in[0][0].size());
    const int cin = static_cast<int>(in[0][0][0].size());
    const int oh = (h + stride - 1) / stride;
    const int ow = (wd + stride - 1) / stride;
    Map4 out(batch, std::vector<std::vector<std::vector<double>>>(oh, std::vector<std::vector<double>>(ow)));
    for (int b = 0; b < batch; ++b)
        for (int y = 0; y < oh; ++y)
            for (int x = 0; x < ow; ++x)
                for (std::size_t o = 0; o < bias.size(); ++o) {
                    double s = bias[o];
                    for (int ky = -1; ky <= 1; ++ky)
                        for (int kx = -1; kx <= 1; ++kx) {
                            const int sy = y * stride + ky;
                            const int sx = x * stride + kx;
                            if (sy < 0 || sy >= h || sx < 0 || sx >= wd) continue;
                            for (int c = 0; c < cin; ++c)
                                s += in[b][sy][sx][c] * w[((ky + 1) * 3 + (kx + 1)) * cin + c][o];
                        }
                    out[b][y][x].push_back(s);
                }
    return out;
}

/// Batch statistics over every (b, y, x), biased variance.
inline Map4 batch_norm(Map4 m, const std::vector<double>& gamma, const std::vector<double>& beta, double eps) {
    const std::size_t channels = gamma.size();
    for (std::size_t c = 0; c < channels; ++c) {
        double sum = 0.0, count = 0.0;
        for (auto& b : m)
            for (auto& r : b)
                for (auto& px : r) {
                    sum += px[c];
                    count += 1.0;
                }
        const double mean = sum / count;
        double ss = 0.0;
        for (auto& b : m)
            for (auto& r : b)
                for (auto& px : r) ss += (px[c] - mean) * (px[c] - mean);
        const double var = ss / count;
        for (auto& b : m)
            for (auto& r : b)
                for (auto& px : r) px[c] = gamma[c] * (px[c] - mean) / std::sqrt(var + eps) + beta[c];
    }
    return m;
}

inline Map4 relu(Map4 m) {
    for (auto& b : m)
        for (auto& r : b)
            for (auto& px : r)
                for (double& v : px) v = std::max(v, 0.0);
    return m;
}

inline Map4 conv_bn_relu(const Map4& in, const vccnet::ConvBnAct& layer) {
    Map4 y = conv3x3(in, from_eigen(layer.conv.weight.value()), from_eigen(layer.conv.bias.value())[0],
                     layer.conv.stride);
    y = batch_norm(y, from_eigen(layer.norm.gamma.value())[0], from_eigen(layer.norm.beta.value())[0],
                   layer.norm.eps);
    return layer.relu ? relu(y) : y;
}

inline Map4 cnn_block(const Map4& in, const vccnet::CnnBlock& blk) {
    Map4 z = conv_bn_relu(conv_bn_relu(in, blk.conv1), blk.conv2);
    for (std::size_t b = 0; b < z.size(); ++b)
        for (std::size_t y = 0; y < z[b].size(); ++y)
            for (std::size_t x = 0; x < z[b][y].size(); ++x)
                for (std::size_t c = 0; c < z[b][y][x].size(); ++c) z[b][y][x][c] += in[b][y][x][c];
    return z;
}

/// Probability that a random positive outscores a random negative, ties 1/2.
inline double auc_pairs(const std::vector<double>& scores, const std::vector<int>& labels) {
    double wins = 0.0, pairs = 0.0;
    for (std::size_t i = 0; i < scores.size(); ++i)
        for (std::size_t j = 0; j < scores.size(); ++j)
            if (labels[i] == 1 && labels[j] == 0) {
                pairs += 1.0;
                wins += scores[i] > scores[j] ? 1.0 : (scores[i] == scores[j] ? 0.5 : 0.0);
            }
    return wins / pairs;
}

}  // namespace oracle

namespace testutil {

using vccnet::ad::Matrix;

inline Matrix random_matrix(std::mt19937_64& rng, Eigen::Index rows, Eigen::Index cols, double lo = -1.0,
                            double hi = 1.0) {
    std::uniform_real_distribution<double> u(lo, hi);
    Matrix m(rows, cols);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = u(rng);
    return m;
}

/// Dwell at (100,100) for 500 ms, a 40 ms jump, then 500 ms at (300,200);
/// 100 Hz samples on a 400x300 viewport.
inline vccnet::Trajectory two_dwell_trajectory() {
    vccnet::Trajectory t;
    t.image_id = "two-dwell";
    t.width = 400;
    t.height = 300;
    std::int64_t ms = 0;
    for (; ms <= 500; ms += 10) t.points.push_back({ms, 100.0, 100.0});
    for (int s = 1; s < 4; ++s, ms += 10)
        t.points.push_back({ms, std::round(100.0 + 200.0 * s / 4.0), std::round(100.0 + 100.0 * s / 4.0)});
    const std::int64_t arrive = ms;
    for (; ms <= arrive + 500; ms += 10) t.points.push_back({ms, 300.0, 200.0});
    return t;
}

struct Dwell {
    double x, y, duration_ms;
};

/// Samples slower than `max_speed` px/s (incoming speed; the first sample
/// uses its outgoing one) grouped into runs lasting at least `min_ms`.
inline std::vector<Dwell> speed_dwells(const vccnet::Trajectory& t, double max_speed = 50.0, double min_ms = 150.0) {
    const auto& p = t.points;
    std::vector<bool> slow(p.size());
    for (std::size_t i = 0; i < p.size(); ++i) {
        const std::size_t a = i == 0 ? 0 : i - 1;
        const std::size_t b = i == 0 ? 1 : i;
        const double dt = (p[b].t_ms - p[a].t_ms) / 1000.0;
        slow[i] = std::hypot(p[b].x - p[a].x, p[b].y - p[a].y) / dt <= max_speed;
    }
    std::vector<Dwell> out;
    for (std::size_t i = 0; i < p.size();) {
        if (!slow[i]) {
            ++i;
            continue;
        }
        std::size_t j = i;
        double sx = 0, sy = 0;
        while (j < p.size() && slow[j]) {
            sx += p[j].x;
            sy += p[j].y;
            ++j;
        }
        const double dur = static_cast<double>(p[j - 1].t_ms - p[i].t_ms);
        if (dur >= min_ms) out.push_back({sx / (j - i), sy / (j - i), dur});
        i = j;
    }
    return out;
}

struct GradCheck {
    double worst_rel = 0.0;
    int checked = 0;
};

/// Central differences on `count` entries of `param` (all when count < 0).
/// Relative error |a - n| / max(|a|, |n|, floor).
inline GradCheck check_param(const std::function<double()>& loss, vccnet::ad::Var param, const Matrix& analytic,
                             int count, std::mt19937_64& rng, double h = 1e-4, double floor = 1e-6) {
    GradCheck out;
    const Eigen::Index n = param.value().size();
    std::vector<Eigen::Index> idx(static_cast<std::size_t>(n));
    std::iota(idx.begin(), idx.end(), Eigen::Index{0});
    if (count >= 0 && count < n) {
        std::shuffle(idx.begin(), idx.end(), rng);
        idx.resize(static_cast<std::size_t>(count));
    }
    for (Eigen::Index i : idx) {
        double& v = param.mutable_value().data()[i];
        const double saved = v;
        v = saved + h;
        const double up = loss();
        v = saved - h;
        const double down = loss();
        v = saved;
        const double numeric = (up - down) / (2.0 * h);
        const double a = analytic.size() == 0 ? 0.0 : analytic.data()[i];
        const double rel = std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), floor});
        out.worst_rel = std::max(out.worst_rel, rel);
        ++out.checked;
    }
    return out;
}

}  // namespace testutil

#endif  // VCCNET_TESTS_SUPPORT_HPP
