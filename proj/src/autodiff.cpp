#include "vccnet/autodiff.hpp"

#include <cmath>
#include <stdexcept>
#include <unordered_set>

namespace vccnet::ad {

namespace {

thread_local bool g_grad_enabled = true;

using Backward = std::function<void(Node&)>;

Var make(Matrix value, std::vector<std::shared_ptr<Node>> parents, Backward bw) {
    auto node = std::make_shared<Node>();
    node->value = std::move(value);
    bool needs = false;
    if (g_grad_enabled) {
        for (const auto& p : parents) {
            needs = needs || p->requires_grad;
        }
    }
    if (needs) {
        node->requires_grad = true;
        node->parents = std::move(parents);
        node->backward = std::move(bw);
    }
    return Var(std::move(node));
}

void check_same_shape(const Var& a, const Var& b, const char* op) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) {
        throw std::invalid_argument(std::string(op) + ": shape mismatch");
    }
}

bool wants(const std::shared_ptr<Node>& n) { return n->requires_grad; }

}  // namespace

void Node::accumulate(const Matrix& g) {
    if (grad.size() == 0) {
        grad = g;
    } else {
        grad += g;
    }
}

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

bool grad_enabled() { return g_grad_enabled; }

Var constant(Matrix value) {
    auto node = std::make_shared<Node>();
    node->value = std::move(value);
    return Var(std::move(node));
}

Var parameter(Matrix value) {
    auto node = std::make_shared<Node>();
    node->value = std::move(value);
    node->requires_grad = true;
    return Var(std::move(node));
}

Var scalar_constant(double v) {
    Matrix m(1, 1);
    m(0, 0) = v;
    return constant(std::move(m));
}

void backward(const Var& root) {
    if (!root.requires_grad()) {
        return;
    }
    // Iterative post-order DFS; reversed it is a valid propagation order.
    std::vector<Node*> order;
    std::unordered_set<Node*> visited;
    std::vector<std::pair<Node*, std::size_t>> stack;
    stack.emplace_back(root.node().get(), 0);
    visited.insert(root.node().get());
    while (!stack.empty()) {
        auto& [node, next] = stack.back();
        if (next < node->parents.size()) {
            Node* parent = node->parents[next++].get();
            if (parent->requires_grad && parent->backward && !visited.contains(parent)) {
                visited.insert(parent);
                stack.emplace_back(parent, 0);
            }
        } else {
            order.push_back(node);
            stack.pop_back();
        }
    }
    root.node()->accumulate(Matrix::Ones(root.rows(), root.cols()));
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        Node* node = *it;
        if (node->backward && node->grad.size() != 0) {
            node->backward(*node);
        }
    }
}

Var matmul(const Var& a, const Var& b) {
    if (a.cols() != b.rows()) {
        throw std::invalid_argument("matmul: inner dimension mismatch");
    }
    return make(a.value() * b.value(), {a.node(), b.node()}, [](Node& self) {
        auto& pa = self.parents[0];
        auto& pb = self.parents[1];
        if (wants(pa)) pa->accumulate_expr(self.grad * pb->value.transpose());
        if (wants(pb)) pb->accumulate_expr(pa->value.transpose() * self.grad);
    });
}

Var add(const Var& a, const Var& b) {
    check_same_shape(a, b, "add");
    return make(a.value() + b.value(), {a.node(), b.node()}, [](Node& self) {
        for (auto& p : self.parents) {
            if (wants(p)) p->accumulate(self.grad);
        }
    });
}

Var sub(const Var& a, const Var& b) {
    check_same_shape(a, b, "sub");
    return make(a.value() - b.value(), {a.node(), b.node()}, [](Node& self) {
        if (wants(self.parents[0])) self.parents[0]->accumulate(self.grad);
        if (wants(self.parents[1])) self.parents[1]->accumulate_expr(-self.grad);
    });
}

Var mul(const Var& a, const Var& b) {
    check_same_shape(a, b, "mul");
    return make(a.value().cwiseProduct(b.value()), {a.node(), b.node()}, [](Node& self) {
        auto& pa = self.parents[0];
        auto& pb = self.parents[1];
        if (wants(pa)) pa->accumulate_expr(self.grad.cwiseProduct(pb->value));
        if (wants(pb)) pb->accumulate_expr(self.grad.cwiseProduct(pa->value));
    });
}

Var scale(const Var& a, double s) {
    return make(a.value() * s, {a.node()}, [s](Node& self) {
        self.parents[0]->accumulate_expr(self.grad * s);
    });
}

Var add_bias(const Var& x, const Var& bias) {
    if (bias.rows() != 1 || bias.cols() != x.cols()) {
        throw std::invalid_argument("add_bias: bias must be 1 x C");
    }
    Matrix out = x.value().rowwise() + bias.value().row(0);
    return make(std::move(out), {x.node(), bias.node()}, [](Node& self) {
        if (wants(self.parents[0])) self.parents[0]->accumulate(self.grad);
        if (wants(self.parents[1])) self.parents[1]->accumulate_expr(self.grad.colwise().sum());
    });
}

Var relu(const Var& x) {
    return make(x.value().cwiseMax(0.0), {x.node()}, [](Node& self) {
        const Matrix& in = self.parents[0]->value;
        self.parents[0]->accumulate_expr(
            (in.array() > 0.0).select(self.grad.array(), 0.0).matrix());
    });
}

namespace {
constexpr double kInvSqrt2 = 0.70710678118654752440;
constexpr double kInvSqrt2Pi = 0.39894228040143267794;
}  // namespace

Var gelu(const Var& x) {
    Matrix out = x.value().unaryExpr(
        [](double v) { return 0.5 * v * (1.0 + std::erf(v * kInvSqrt2)); });
    return make(std::move(out), {x.node()}, [](Node& self) {
        const Matrix& in = self.parents[0]->value;
        Matrix d = in.unaryExpr([](double v) {
            return 0.5 * (1.0 + std::erf(v * kInvSqrt2)) + v * kInvSqrt2Pi * std::exp(-0.5 * v * v);
        });
        self.parents[0]->accumulate_expr(self.grad.cwiseProduct(d));
    });
}

Var sigmoid(const Var& x) {
    Matrix out = x.value().unaryExpr([](double v) { return 1.0 / (1.0 + std::exp(-v)); });
    Matrix saved = out;
    return make(std::move(out), {x.node()}, [saved = std::move(saved)](Node& self) {
        self.parents[0]->accumulate_expr(
            self.grad.cwiseProduct(saved.cwiseProduct((1.0 - saved.array()).matrix())));
    });
}

Var concat_cols(const Var& a, const Var& b) {
    if (a.rows() != b.rows()) {
        throw std::invalid_argument("concat_cols: row mismatch");
    }
    Matrix out(a.rows(), a.cols() + b.cols());
    out.leftCols(a.cols()) = a.value();
    out.rightCols(b.cols()) = b.value();
    const Eigen::Index ca = a.cols();
    const Eigen::Index cb = b.cols();
    return make(std::move(out), {a.node(), b.node()}, [ca, cb](Node& self) {
        if (wants(self.parents[0])) self.parents[0]->accumulate_expr(self.grad.leftCols(ca));
        if (wants(self.parents[1])) self.parents[1]->accumulate_expr(self.grad.rightCols(cb));
    });
}

Var slice_rows(const Var& x, Eigen::Index start, Eigen::Index count) {
    if (start < 0 || count < 0 || start + count > x.rows()) {
        throw std::out_of_range("slice_rows: range outside matrix");
    }
    Matrix out = x.value().middleRows(start, count);
    return make(std::move(out), {x.node()}, [start, count](Node& self) {
        auto& p = self.parents[0];
        if (p->grad.size() == 0) {
            p->grad = Matrix::Zero(p->value.rows(), p->value.cols());
        }
        p->grad.middleRows(start, count) += self.grad;
    });
}

Var concat_rows(std::span<const Var> parts) {
    if (parts.empty()) {
        throw std::invalid_argument("concat_rows: no parts");
    }
    Eigen::Index rows = 0;
    const Eigen::Index cols = parts.front().cols();
    std::vector<std::shared_ptr<Node>> parents;
    std::vector<Eigen::Index> offsets;
    for (const auto& p : parts) {
        if (p.cols() != cols) {
            throw std::invalid_argument("concat_rows: column mismatch");
        }
        offsets.push_back(rows);
        rows += p.rows();
        parents.push_back(p.node());
    }
    Matrix out(rows, cols);
    for (std::size_t i = 0; i < parts.size(); ++i) {
        out.middleRows(offsets[i], parts[i].rows()) = parts[i].value();
    }
    return make(std::move(out), std::move(parents), [offsets](Node& self) {
        for (std::size_t i = 0; i < self.parents.size(); ++i) {
            auto& p = self.parents[i];
            if (wants(p)) p->accumulate_expr(self.grad.middleRows(offsets[i], p->value.rows()));
        }
    });
}

Var detach(const Var& x) { return constant(x.value()); }

Var sum_all(const Var& x) {
    Matrix out(1, 1);
    out(0, 0) = x.value().sum();
    return make(std::move(out), {x.node()}, [](Node& self) {
        auto& p = self.parents[0];
        p->accumulate_expr(Matrix::Constant(p->value.rows(), p->value.cols(), self.grad(0, 0)));
    });
}

Var mean_all(const Var& x) {
    const double n = static_cast<double>(x.value().size());
    Matrix out(1, 1);
    out(0, 0) = x.value().sum() / n;
    return make(std::move(out), {x.node()}, [n](Node& self) {
        auto& p = self.parents[0];
        p->accumulate_expr(
            Matrix::Constant(p->value.rows(), p->value.cols(), self.grad(0, 0) / n));
    });
}

Var add_scalars(std::span<const Var> parts) {
    Matrix out = Matrix::Zero(1, 1);
    std::vector<std::shared_ptr<Node>> parents;
    for (const auto& p : parts) {
        out(0, 0) += p.scalar();
        parents.push_back(p.node());
    }
    return make(std::move(out), std::move(parents), [](Node& self) {
        for (auto& p : self.parents) {
            if (wants(p)) p->accumulate(self.grad);
        }
    });
}

Var gather_patches(const Var& x, const Eigen::MatrixXi& index) {
    const Eigen::Index channels = x.cols();
    const Eigen::Index rows = index.rows();
    const Eigen::Index taps = index.cols();
    const Matrix& in = x.value();
    Matrix out = Matrix::Zero(rows, taps * channels);
    for (Eigen::Index r = 0; r < rows; ++r) {
        for (Eigen::Index k = 0; k < taps; ++k) {
            const int src = index(r, k);
            if (src >= 0) {
                out.block(r, k * channels, 1, channels) = in.row(src);
            }
        }
    }
    return make(std::move(out), {x.node()}, [index, channels](Node& self) {
        auto& p = self.parents[0];
        if (p->grad.size() == 0) {
            p->grad = Matrix::Zero(p->value.rows(), p->value.cols());
        }
        for (Eigen::Index r = 0; r < index.rows(); ++r) {
            for (Eigen::Index k = 0; k < index.cols(); ++k) {
                const int src = index(r, k);
                if (src >= 0) {
                    p->grad.row(src) += self.grad.block(r, k * channels, 1, channels);
                }
            }
        }
    });
}

Var group_mean_rows(const Var& x, Eigen::Index group) {
    if (group <= 0 || x.rows() % group != 0) {
        throw std::invalid_argument("group_mean_rows: rows not divisible by group");
    }
    const Eigen::Index groups = x.rows() / group;
    Matrix out(groups, x.cols());
    for (Eigen::Index g = 0; g < groups; ++g) {
        out.row(g) = x.value().middleRows(g * group, group).colwise().mean();
    }
    return make(std::move(out), {x.node()}, [group, groups](Node& self) {
        auto& p = self.parents[0];
        Matrix d(p->value.rows(), p->value.cols());
        for (Eigen::Index g = 0; g < groups; ++g) {
            d.middleRows(g * group, group).rowwise() = self.grad.row(g) / static_cast<double>(group);
        }
        p->accumulate(d);
    });
}

Var block_mean(const Var& x, int batch, int height, int width, int factor) {
    if (factor <= 0 || height % factor != 0 || width % factor != 0 ||
        x.rows() != static_cast<Eigen::Index>(batch) * height * width) {
        throw std::invalid_argument("block_mean: shape mismatch");
    }
    const int oh = height / factor;
    const int ow = width / factor;
    const double inv = 1.0 / (factor * factor);
    const Matrix& in = x.value();
    Matrix out = Matrix::Zero(static_cast<Eigen::Index>(batch) * oh * ow, x.cols());
    for (int b = 0; b < batch; ++b) {
        for (int y = 0; y < height; ++y) {
            for (int xx = 0; xx < width; ++xx) {
                const Eigen::Index src = (static_cast<Eigen::Index>(b) * height + y) * width + xx;
                const Eigen::Index dst = (static_cast<Eigen::Index>(b) * oh + y / factor) * ow + xx / factor;
                out.row(dst) += in.row(src);
            }
        }
    }
    out *= inv;
    return make(std::move(out), {x.node()}, [=](Node& self) {
        auto& p = self.parents[0];
        Matrix d(p->value.rows(), p->value.cols());
        for (int b = 0; b < batch; ++b) {
            for (int y = 0; y < height; ++y) {
                for (int xx = 0; xx < width; ++xx) {
                    const Eigen::Index src = (static_cast<Eigen::Index>(b) * height + y) * width + xx;
                    const Eigen::Index dst = (static_cast<Eigen::Index>(b) * oh + y / factor) * ow + xx / factor;
                    d.row(src) = self.grad.row(dst) * inv;
                }
            }
        }
        p->accumulate(d);
    });
}

Var upsample_nearest(const Var& x, int batch, int height, int width, int factor) {
    if (factor <= 0 || x.rows() != static_cast<Eigen::Index>(batch) * height * width) {
        throw std::invalid_argument("upsample_nearest: shape mismatch");
    }
    const int oh = height * factor;
    const int ow = width * factor;
    const Matrix& in = x.value();
    Matrix out(static_cast<Eigen::Index>(batch) * oh * ow, x.cols());
    for (int b = 0; b < batch; ++b) {
        for (int y = 0; y < oh; ++y) {
            for (int xx = 0; xx < ow; ++xx) {
                const Eigen::Index dst = (static_cast<Eigen::Index>(b) * oh + y) * ow + xx;
                const Eigen::Index src = (static_cast<Eigen::Index>(b) * height + y / factor) * width + xx / factor;
                out.row(dst) = in.row(src);
            }
        }
    }
    return make(std::move(out), {x.node()}, [=](Node& self) {
        auto& p = self.parents[0];
        Matrix d = Matrix::Zero(p->value.rows(), p->value.cols());
        for (int b = 0; b < batch; ++b) {
            for (int y = 0; y < oh; ++y) {
                for (int xx = 0; xx < ow; ++xx) {
                    const Eigen::Index dst = (static_cast<Eigen::Index>(b) * oh + y) * ow + xx;
                    const Eigen::Index src = (static_cast<Eigen::Index>(b) * height + y / factor) * width + xx / factor;
                    d.row(src) += self.grad.row(dst);
                }
            }
        }
        p->accumulate(d);
    });
}

Var max_relative(const Var& x, const std::vector<std::vector<int>>& neighbors) {
    if (static_cast<Eigen::Index>(neighbors.size()) != x.rows()) {
        throw std::invalid_argument("max_relative: one neighbour list per row required");
    }
    const Eigen::Index rows = x.rows();
    const Eigen::Index cols = x.cols();
    const Matrix& in = x.value();
    Matrix out = Matrix::Zero(rows, cols);
    // argmax(i, c) = winning neighbour row, or -1 when i has no neighbours.
    Eigen::MatrixXi argmax = Eigen::MatrixXi::Constant(rows, cols, -1);
    for (Eigen::Index i = 0; i < rows; ++i) {
        const auto& nbrs = neighbors[i];
        if (nbrs.empty()) {
            continue;
        }
        for (Eigen::Index c = 0; c < cols; ++c) {
            int best = nbrs.front();
            double best_v = in(best, c) - in(i, c);
            for (std::size_t n = 1; n < nbrs.size(); ++n) {
                const double v = in(nbrs[n], c) - in(i, c);
                if (v > best_v) {
                    best_v = v;
                    best = nbrs[n];
                }
            }
            out(i, c) = best_v;
            argmax(i, c) = best;
        }
    }
    return make(std::move(out), {x.node()}, [argmax = std::move(argmax)](Node& self) {
        auto& p = self.parents[0];
        Matrix d = Matrix::Zero(p->value.rows(), p->value.cols());
        for (Eigen::Index i = 0; i < argmax.rows(); ++i) {
            for (Eigen::Index c = 0; c < argmax.cols(); ++c) {
                const int j = argmax(i, c);
                if (j >= 0) {
                    d(j, c) += self.grad(i, c);
                    d(i, c) -= self.grad(i, c);
                }
            }
        }
        p->accumulate(d);
    });
}

Var batch_norm_train(const Var& x, const Var& gamma, const Var& beta, double eps,
                     RowVector* batch_mean, RowVector* batch_var) {
    const Matrix& in = x.value();
    const double n = static_cast<double>(in.rows());
    RowVector mean = in.colwise().mean();
    Matrix centered = in.rowwise() - mean;
    RowVector var = centered.array().square().colwise().sum().matrix() / n;
    RowVector inv_std = (var.array() + eps).rsqrt().matrix();
    Matrix xhat = centered.array().rowwise() * inv_std.array();
    Matrix out = (xhat.array().rowwise() * gamma.value().row(0).array()).rowwise() +
                 beta.value().row(0).array();
    if (batch_mean) *batch_mean = mean;
    if (batch_var) *batch_var = var;
    return make(std::move(out), {x.node(), gamma.node(), beta.node()},
                [xhat = std::move(xhat), inv_std = std::move(inv_std), n](Node& self) {
                    auto& px = self.parents[0];
                    auto& pg = self.parents[1];
                    auto& pb = self.parents[2];
                    if (wants(pb)) pb->accumulate_expr(self.grad.colwise().sum());
                    if (wants(pg)) pg->accumulate_expr(self.grad.cwiseProduct(xhat).colwise().sum());
                    if (wants(px)) {
                        Matrix dxhat = self.grad.array().rowwise() * pg->value.row(0).array();
                        RowVector sum_d = dxhat.colwise().sum();
                        RowVector sum_dx = dxhat.cwiseProduct(xhat).colwise().sum();
                        Matrix dx = (dxhat * n).rowwise() - sum_d;
                        dx -= (xhat.array().rowwise() * sum_dx.array()).matrix();
                        dx = dx.array().rowwise() * (inv_std.array() / n);
                        px->accumulate(dx);
                    }
                });
}

Var batch_norm_eval(const Var& x, const Var& gamma, const Var& beta, const Matrix& mean,
                    const Matrix& var, double eps) {
    RowVector inv_std = (var.row(0).array() + eps).rsqrt().matrix();
    Matrix xhat = (x.value().rowwise() - mean.row(0)).array().rowwise() * inv_std.array();
    Matrix out = (xhat.array().rowwise() * gamma.value().row(0).array()).rowwise() +
                 beta.value().row(0).array();
    return make(std::move(out), {x.node(), gamma.node(), beta.node()},
                [xhat = std::move(xhat), inv_std = std::move(inv_std)](Node& self) {
                    auto& px = self.parents[0];
                    auto& pg = self.parents[1];
                    auto& pb = self.parents[2];
                    if (wants(pb)) pb->accumulate_expr(self.grad.colwise().sum());
                    if (wants(pg)) pg->accumulate_expr(self.grad.cwiseProduct(xhat).colwise().sum());
                    if (wants(px)) {
                        px->accumulate_expr(
                            (self.grad.array().rowwise() *
                             (pg->value.row(0).array() * inv_std.array()))
                                .matrix());
                    }
                });
}

Var pairwise_distance(const Var& x) {
    const Matrix& in = x.value();
    const Eigen::Index n = in.rows();
    Matrix d = Matrix::Zero(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = i + 1; j < n; ++j) {
            const double v = (in.row(i) - in.row(j)).norm();
            d(i, j) = v;
            d(j, i) = v;
        }
    }
    Matrix saved = d;
    return make(std::move(d), {x.node()}, [saved = std::move(saved)](Node& self) {
        auto& p = self.parents[0];
        Matrix w = self.grad + self.grad.transpose();
        w = (saved.array() > 0.0).select(w.array() / saved.array(), 0.0).matrix();
        Matrix dx = (w.rowwise().sum()).asDiagonal() * p->value - w * p->value;
        p->accumulate(dx);
    });
}

Var minmax_normalize(const Var& d) {
    const Matrix& in = d.value();
    Eigen::Index min_r = 0, min_c = 0, max_r = 0, max_c = 0;
    const double lo = in.minCoeff(&min_r, &min_c);
    const double hi = in.maxCoeff(&max_r, &max_c);
    const double range = hi - lo;
    if (!(range > 0.0)) {
        return make(Matrix::Zero(in.rows(), in.cols()), {d.node()}, [](Node&) {});
    }
    Matrix out = (in.array() - lo) / range;
    Matrix saved = out;
    return make(std::move(out), {d.node()},
                [saved = std::move(saved), range, min_r, min_c, max_r, max_c](Node& self) {
                    auto& p = self.parents[0];
                    Matrix g = self.grad / range;
                    // out = (d - lo)/range: d out/d hi = -out/range, d out/d lo = (out - 1)/range.
                    const double gsum_out = self.grad.cwiseProduct(saved).sum();
                    const double gsum = self.grad.sum();
                    g(max_r, max_c) += -gsum_out / range;
                    g(min_r, min_c) += (gsum_out - gsum) / range;
                    p->accumulate(g);
                });
}

Var mse(const Var& a, const Var& b) {
    check_same_shape(a, b, "mse");
    const double n = static_cast<double>(a.value().size());
    Matrix diff = a.value() - b.value();
    Matrix out(1, 1);
    out(0, 0) = diff.squaredNorm() / n;
    return make(std::move(out), {a.node(), b.node()}, [diff = std::move(diff), n](Node& self) {
        const double g = self.grad(0, 0) * 2.0 / n;
        if (wants(self.parents[0])) self.parents[0]->accumulate_expr(diff * g);
        if (wants(self.parents[1])) self.parents[1]->accumulate_expr(diff * -g);
    });
}

Var log_softmax_rows(const Var& logits) {
    const Matrix& in = logits.value();
    Matrix out(in.rows(), in.cols());
    for (Eigen::Index r = 0; r < in.rows(); ++r) {
        const double m = in.row(r).maxCoeff();
        const double lse = m + std::log((in.row(r).array() - m).exp().sum());
        out.row(r) = in.row(r).array() - lse;
    }
    Matrix saved = out;
    return make(std::move(out), {logits.node()}, [saved = std::move(saved)](Node& self) {
        Matrix probs = saved.array().exp();
        Matrix d = self.grad - (probs.array().colwise() * self.grad.rowwise().sum().array()).matrix();
        self.parents[0]->accumulate(d);
    });
}

Var nll(const Var& log_probs, std::span<const int> labels) {
    if (static_cast<Eigen::Index>(labels.size()) != log_probs.rows()) {
        throw std::invalid_argument("nll: one label per row required");
    }
    const double n = static_cast<double>(labels.size());
    Matrix out(1, 1);
    out(0, 0) = 0.0;
    for (std::size_t r = 0; r < labels.size(); ++r) {
        if (labels[r] < 0 || labels[r] >= log_probs.cols()) {
            throw std::out_of_range("nll: label outside class range");
        }
        out(0, 0) -= log_probs.value()(static_cast<Eigen::Index>(r), labels[r]);
    }
    out(0, 0) /= n;
    std::vector<int> saved(labels.begin(), labels.end());
    return make(std::move(out), {log_probs.node()}, [saved = std::move(saved), n](Node& self) {
        auto& p = self.parents[0];
        Matrix d = Matrix::Zero(p->value.rows(), p->value.cols());
        for (std::size_t r = 0; r < saved.size(); ++r) {
            d(static_cast<Eigen::Index>(r), saved[r]) = -self.grad(0, 0) / n;
        }
        p->accumulate(d);
    });
}

Var dice_loss(const Var& logits, const Matrix& targets, Eigen::Index group, double eps) {
    if (logits.cols() != 1 || targets.rows() != logits.rows() || targets.cols() != 1 ||
        group <= 0 || logits.rows() % group != 0) {
        throw std::invalid_argument("dice_loss: shape mismatch");
    }
    const Eigen::Index samples = logits.rows() / group;
    Matrix p = logits.value().unaryExpr([](double v) { return 1.0 / (1.0 + std::exp(-v)); });
    Matrix out = Matrix::Zero(1, 1);
    std::vector<double> inter(samples), denom(samples);
    for (Eigen::Index s = 0; s < samples; ++s) {
        const auto ps = p.middleRows(s * group, group);
        const auto ys = targets.middleRows(s * group, group);
        inter[s] = ps.cwiseProduct(ys).sum();
        denom[s] = ps.sum() + ys.sum() + eps;
        out(0, 0) += 1.0 - (2.0 * inter[s] + eps) / denom[s];
    }
    out(0, 0) /= static_cast<double>(samples);
    return make(std::move(out), {logits.node()},
                [p = std::move(p), targets, inter = std::move(inter), denom = std::move(denom),
                 group, samples, eps](Node& self) {
                    const double g = self.grad(0, 0) / static_cast<double>(samples);
                    Matrix d(p.rows(), 1);
                    for (Eigen::Index s = 0; s < samples; ++s) {
                        const double num = 2.0 * inter[s] + eps;
                        const double den2 = denom[s] * denom[s];
                        for (Eigen::Index r = s * group; r < (s + 1) * group; ++r) {
                            const double dp = -(2.0 * targets(r, 0) * denom[s] - num) / den2;
                            d(r, 0) = g * dp * p(r, 0) * (1.0 - p(r, 0));
                        }
                    }
                    self.parents[0]->accumulate(d);
                });
}

}  // namespace vccnet::ad
