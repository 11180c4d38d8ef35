#include "vccnet/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

namespace vccnet {

I2MCParams SyntheticConfig::small_image_fixation_params() {
    I2MCParams p;
    p.merge_distance_px = 3.0;
    p.max_dispersion_px = 4.0;
    p.max_speed_px_s = 300.0;
    return p;
}

namespace {

struct Blob {
    double x, y, sigma, amplitude;
};

class TraceWriter {
public:
    TraceWriter(Trajectory& traj, std::mt19937_64& rng) : traj_(traj), rng_(rng) {}

    void emit(double x, double y) {
        const double cx = std::clamp(std::round(x), 0.0, static_cast<double>(traj_.width - 1));
        const double cy = std::clamp(std::round(y), 0.0, static_cast<double>(traj_.height - 1));
        traj_.points.push_back({t_, cx, cy});
        t_ += (traj_.points.size() % 3 == 0) ? 16 : 17;  // ~60 Hz
        px_ = x;
        py_ = y;
    }

    void move_to(double x, double y, double speed) {
        const double dist = std::hypot(x - px_, y - py_);
        const auto steps = static_cast<int>(std::max(2.0, std::ceil(dist / speed * 1000.0 / 16.7)));
        const double sx = px_, sy = py_;
        for (int i = 1; i <= steps; ++i) {
            const double f = static_cast<double>(i) / steps;
            emit(sx + f * (x - sx), sy + f * (y - sy));
        }
    }

    void dwell(double x, double y, double duration_ms) {
        std::uniform_int_distribution<int> jitter(-1, 1);
        std::bernoulli_distribution moves(0.3);
        const std::int64_t end = t_ + static_cast<std::int64_t>(duration_ms);
        while (t_ < end) {
            const double jx = moves(rng_) ? jitter(rng_) : 0;
            const double jy = moves(rng_) ? jitter(rng_) : 0;
            traj_.points.push_back({t_, std::clamp(std::round(x) + jx, 0.0, traj_.width - 1.0),
                                    std::clamp(std::round(y) + jy, 0.0, traj_.height - 1.0)});
            t_ += (traj_.points.size() % 3 == 0) ? 16 : 17;
        }
        px_ = x;
        py_ = y;
    }

private:
    Trajectory& traj_;
    std::mt19937_64& rng_;
    std::int64_t t_ = 0;
    double px_ = 0.0, py_ = 0.0;
};

}  // namespace

void derive_attention(Sample& sample, const SyntheticConfig& cfg) {
    const int h = static_cast<int>(sample.image.rows());
    const int w = static_cast<int>(sample.image.cols());
    const StayPointSet stays = extract_stay_points(sample.trajectory, cfg.fixation);
    AttentionMap soft = render_soft_attention(stays, h, w, cfg.render);
    sample.y_soft = soft.grid;
    sample.y_hard = threshold_hard(soft, cfg.hard_threshold).grid;
}

Sample make_synthetic_sample(int size, std::uint64_t seed, int index, const SyntheticConfig& cfg) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(index), 0x5eedu};
    std::mt19937_64 rng(seq);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::normal_distribution<double> noise(0.0, 0.02);

    Sample s;
    s.id = "synth-" + std::to_string(seed) + "-" + std::to_string(index);
    s.label = unit(rng) < 0.5 ? 1 : 0;
    s.lesion_count = s.label == 1 ? 1 + static_cast<int>(unit(rng) * 3.0) % 3 : 0;

    // Rib-like stripes over a lateral gradient.
    const double freq = 3.0 + 2.0 * unit(rng);
    const double phase = 2.0 * std::numbers::pi * unit(rng);
    const double tilt = 0.1 * unit(rng);
    s.image.resize(size, size);
    for (int y = 0; y < size; ++y) {
        for (int x = 0; x < size; ++x) {
            const double v = static_cast<double>(y) / size;
            const double u = static_cast<double>(x) / size;
            s.image(y, x) = 0.35 + 0.08 * std::sin(2.0 * std::numbers::pi * freq * (v + tilt * u) + phase) +
                            0.08 * u + noise(rng);
        }
    }

    std::vector<Blob> blobs;
    const double scale = std::min(1.0, size / 64.0);
    const double margin = 8.0 * scale;
    const double separation = 12.0 * scale;
    std::uniform_real_distribution<double> pos(margin, size - 1 - margin);
    for (int attempt = 0; static_cast<int>(blobs.size()) < s.lesion_count && attempt < 10000; ++attempt) {
        Blob b{pos(rng), pos(rng), 2.0 + unit(rng), 0.3 + 0.15 * unit(rng)};
        const bool apart = std::all_of(blobs.begin(), blobs.end(), [&](const Blob& o) {
            return std::hypot(o.x - b.x, o.y - b.y) > separation;
        });
        if (apart) blobs.push_back(b);
    }
    s.lesion_count = static_cast<int>(blobs.size());
    s.lesion_mask = Grid::Zero(size, size);
    for (const auto& b : blobs) {
        for (int y = 0; y < size; ++y) {
            for (int x = 0; x < size; ++x) {
                const double d2 = (x - b.x) * (x - b.x) + (y - b.y) * (y - b.y);
                s.image(y, x) += b.amplitude * std::exp(-d2 / (2.0 * b.sigma * b.sigma));
                if (d2 <= 4.0 * b.sigma * b.sigma) s.lesion_mask(y, x) = 1.0;
            }
        }
    }
    s.image = s.image.cwiseMax(0.0).cwiseMin(1.0);

    // Reading trace: dwell on each lesion, occasionally on a distractor;
    // lesion-free images get one or two inspection dwells anywhere.
    std::vector<std::pair<double, double>> targets;
    for (const auto& b : blobs) targets.emplace_back(b.x + (unit(rng) - 0.5), b.y + (unit(rng) - 0.5));
    if (s.label == 0) {
        const int looks = 1 + (unit(rng) < 0.5 ? 1 : 0);
        for (int i = 0; i < looks; ++i) targets.emplace_back(pos(rng), pos(rng));
    } else if (unit(rng) < cfg.distractor_probability) {
        const auto at = static_cast<std::ptrdiff_t>(unit(rng) * (targets.size() + 1));
        targets.insert(targets.begin() + std::min<std::ptrdiff_t>(at, targets.size()), {pos(rng), pos(rng)});
    }

    s.trajectory.image_id = s.id;
    s.trajectory.width = size;
    s.trajectory.height = size;
    s.trajectory.source = TraceSource::mouse;
    TraceWriter writer(s.trajectory, rng);
    writer.emit(unit(rng) * (size - 1), unit(rng) * (size - 1));
    std::uniform_real_distribution<double> dwell_len(cfg.dwell_min_ms, cfg.dwell_max_ms);
    for (const auto& [tx, ty] : targets) {
        writer.move_to(tx, ty, cfg.saccade_speed_px_s);
        writer.dwell(tx, ty, dwell_len(rng));
    }
    writer.move_to(unit(rng) * (size - 1), unit(rng) * (size - 1), cfg.saccade_speed_px_s);

    derive_attention(s, cfg);
    return s;
}

std::vector<Sample> make_synthetic_dataset(int n, int size, std::uint64_t seed, const SyntheticConfig& cfg) {
    if (n < 1) {
        throw Error(ErrorCode::Validation, "make_synthetic_dataset: n must be >= 1");
    }
    std::vector<Sample> out;
    out.reserve(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        out.push_back(make_synthetic_sample(size, seed, i, cfg));
    }
    return out;
}

DatasetSplit split_dataset(std::vector<Sample> samples, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::shuffle(samples.begin(), samples.end(), rng);
    const std::size_t n = samples.size();
    const std::size_t n_train = (n * 70) / 100;
    const std::size_t n_val = (n * 15) / 100;
    DatasetSplit split;
    for (std::size_t i = 0; i < n; ++i) {
        auto& dst = i < n_train ? split.train : (i < n_train + n_val ? split.validation : split.test);
        dst.push_back(std::move(samples[i]));
    }
    return split;
}

}  // namespace vccnet
