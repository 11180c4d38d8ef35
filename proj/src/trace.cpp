#include "vccnet/trace.hpp"

#include "vccnet/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace vccnet {

I2MCParams I2MCParams::defaults_for(TraceSource source) {
    I2MCParams p;
    if (source == TraceSource::gaze) {
        // Eye trackers sample far faster and fixations are shorter than mouse dwells.
        p.min_duration_ms = 60.0;
        p.merge_gap_ms = 40.0;
        p.max_speed_px_s = 2000.0;
    }
    return p;
}

const char* trace_source_name(TraceSource s) { return s == TraceSource::gaze ? "gaze" : "mouse"; }

TraceSource parse_trace_source(const std::string& name) {
    if (name == "mouse") return TraceSource::mouse;
    if (name == "gaze") return TraceSource::gaze;
    throw Error(ErrorCode::Validation, "source must be \"mouse\" or \"gaze\", got \"" + name + "\"");
}

void validate_trajectory(const Trajectory& traj) {
    if (traj.width <= 0 || traj.height <= 0) {
        throw Error(ErrorCode::Validation, "viewport must have positive width and height");
    }
    for (std::size_t i = 0; i < traj.points.size(); ++i) {
        const auto& p = traj.points[i];
        if (i > 0 && p.t_ms <= traj.points[i - 1].t_ms) {
            throw Error(ErrorCode::Validation,
                        "points[" + std::to_string(i) + "]: timestamp not strictly increasing");
        }
        if (!(p.x >= 0.0 && p.x < traj.width && p.y >= 0.0 && p.y < traj.height)) {
            throw Error(ErrorCode::Validation, "points[" + std::to_string(i) + "]: outside viewport");
        }
    }
}

Trajectory trajectory_from_json(const nlohmann::json& j) {
    if (!j.is_object()) {
        throw Error(ErrorCode::Validation, "trajectory must be a JSON object");
    }
    const auto require = [&](const char* key) -> const nlohmann::json& {
        if (!j.contains(key)) {
            throw Error(ErrorCode::Validation, std::string("missing key \"") + key + "\"");
        }
        return j.at(key);
    };
    Trajectory traj;
    const auto& id = require("image_id");
    if (!id.is_string()) throw Error(ErrorCode::Validation, "image_id must be a string");
    traj.image_id = id.get<std::string>();
    const auto& vp = require("viewport");
    if (!vp.is_object() || !vp.contains("w") || !vp.contains("h") || !vp.at("w").is_number_integer() ||
        !vp.at("h").is_number_integer()) {
        throw Error(ErrorCode::Validation, "viewport must be {w:int, h:int}");
    }
    traj.width = vp.at("w").get<int>();
    traj.height = vp.at("h").get<int>();
    const auto& src = require("source");
    if (!src.is_string()) throw Error(ErrorCode::Validation, "source must be a string");
    traj.source = parse_trace_source(src.get<std::string>());
    const auto& pts = require("points");
    if (!pts.is_array()) throw Error(ErrorCode::Validation, "points must be an array");
    traj.points.reserve(pts.size());
    for (std::size_t i = 0; i < pts.size(); ++i) {
        const auto& p = pts[i];
        if (!p.is_object() || !p.contains("t") || !p.contains("x") || !p.contains("y") ||
            !p.at("t").is_number_integer() || !p.at("x").is_number_integer() ||
            !p.at("y").is_number_integer()) {
            throw Error(ErrorCode::Validation,
                        "points[" + std::to_string(i) + "]: expected integer t, x, y");
        }
        traj.points.push_back({p.at("t").get<std::int64_t>(), static_cast<double>(p.at("x").get<std::int64_t>()),
                               static_cast<double>(p.at("y").get<std::int64_t>())});
    }
    validate_trajectory(traj);
    return traj;
}

nlohmann::json trajectory_to_json(const Trajectory& traj) {
    nlohmann::json pts = nlohmann::json::array();
    for (const auto& p : traj.points) {
        pts.push_back({{"t", p.t_ms},
                       {"x", static_cast<std::int64_t>(std::lround(p.x))},
                       {"y", static_cast<std::int64_t>(std::lround(p.y))}});
    }
    return {{"image_id", traj.image_id},
            {"viewport", {{"w", traj.width}, {"h", traj.height}}},
            {"source", trace_source_name(traj.source)},
            {"points", std::move(pts)}};
}

namespace {

/// Two-means labels for samples [first, last], seeded with the endpoints.
std::vector<int> two_means(const std::vector<TracePoint>& pts, std::size_t first, std::size_t last) {
    const std::size_t n = last - first + 1;
    std::vector<int> label(n, 0);
    double c0x = pts[first].x, c0y = pts[first].y;
    double c1x = pts[last].x, c1y = pts[last].y;
    for (int iter = 0; iter < 50; ++iter) {
        bool changed = false;
        for (std::size_t i = 0; i < n; ++i) {
            const auto& p = pts[first + i];
            const double d0 = (p.x - c0x) * (p.x - c0x) + (p.y - c0y) * (p.y - c0y);
            const double d1 = (p.x - c1x) * (p.x - c1x) + (p.y - c1y) * (p.y - c1y);
            const int l = d1 < d0 ? 1 : 0;
            changed = changed || l != label[i];
            label[i] = l;
        }
        if (iter > 0 && !changed) break;
        double sx[2] = {0, 0}, sy[2] = {0, 0};
        int count[2] = {0, 0};
        for (std::size_t i = 0; i < n; ++i) {
            sx[label[i]] += pts[first + i].x;
            sy[label[i]] += pts[first + i].y;
            ++count[label[i]];
        }
        if (count[0] > 0) { c0x = sx[0] / count[0]; c0y = sy[0] / count[0]; }
        if (count[1] > 0) { c1x = sx[1] / count[1]; c1y = sy[1] / count[1]; }
    }
    return label;
}

struct Run {
    std::size_t first;
    std::size_t last;
};

}  // namespace

std::vector<double> transition_weights(const Trajectory& traj, const I2MCParams& params) {
    const auto& pts = traj.points;
    if (pts.empty()) {
        throw Error(ErrorCode::EmptyTrajectory, "trajectory has no samples");
    }
    const double t0 = static_cast<double>(pts.front().t_ms);
    const double span = static_cast<double>(pts.back().t_ms) - t0;
    if (pts.size() < 2 || params.window_ms > span) {
        throw Error(ErrorCode::WindowTooLong, "window of " + std::to_string(params.window_ms) +
                                                  " ms exceeds trajectory span of " +
                                                  std::to_string(span) + " ms");
    }
    const std::size_t n = pts.size();
    std::vector<double> weight(n, 0.0);
    std::vector<int> covered(n, 0);
    std::size_t first = 0;
    for (double start = 0.0; start + params.window_ms <= span + 1e-9; start += params.step_ms) {
        while (first < n && static_cast<double>(pts[first].t_ms) - t0 < start) ++first;
        std::size_t last = first;
        while (last + 1 < n && static_cast<double>(pts[last + 1].t_ms) - t0 <= start + params.window_ms) {
            ++last;
        }
        if (first >= n || last <= first) continue;
        const auto label = two_means(pts, first, last);
        int switches = 0;
        for (std::size_t i = 1; i < label.size(); ++i) switches += label[i] != label[i - 1];
        for (std::size_t i = first; i <= last; ++i) ++covered[i];
        if (switches == 0) continue;
        const double w = 1.0 / switches;
        for (std::size_t i = 1; i < label.size(); ++i) {
            if (label[i] != label[i - 1]) weight[first + i] += w;
        }
    }
    for (std::size_t i = 0; i < n; ++i) {
        if (covered[i] > 0) {
            weight[i] /= covered[i];
        } else if (i > 0) {
            weight[i] = weight[i - 1];
        }
    }
    return weight;
}

StayPointSet extract_stay_points(const Trajectory& traj, const I2MCParams& params) {
    const auto weight = transition_weights(traj, params);
    const auto& pts = traj.points;
    const std::size_t n = pts.size();

    const double mean = std::accumulate(weight.begin(), weight.end(), 0.0) / static_cast<double>(n);
    double var = 0.0;
    for (double w : weight) var += (w - mean) * (w - mean);
    const double cutoff = mean + params.cutoff_std * std::sqrt(var / static_cast<double>(n));

    std::vector<bool> candidate(n);
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t a = i > 0 ? i - 1 : 0;
        const std::size_t b = i > 0 ? i : std::min<std::size_t>(1, n - 1);
        const double dt = static_cast<double>(pts[b].t_ms - pts[a].t_ms) / 1000.0;
        const double dist = std::hypot(pts[b].x - pts[a].x, pts[b].y - pts[a].y);
        const double speed = dt > 0.0 ? dist / dt : 0.0;
        candidate[i] = weight[i] <= cutoff && speed <= params.max_speed_px_s;
    }

    std::vector<Run> runs;
    for (std::size_t i = 0; i < n; ++i) {
        if (!candidate[i]) continue;
        if (!runs.empty() && runs.back().last + 1 == i) {
            runs.back().last = i;
        } else {
            runs.push_back({i, i});
        }
    }

    const auto centroid = [&](const Run& r) {
        double sx = 0.0, sy = 0.0;
        for (std::size_t i = r.first; i <= r.last; ++i) {
            sx += pts[i].x;
            sy += pts[i].y;
        }
        const double c = static_cast<double>(r.last - r.first + 1);
        return std::pair{sx / c, sy / c};
    };

    std::vector<Run> merged;
    for (const auto& r : runs) {
        if (!merged.empty()) {
            auto& prev = merged.back();
            const double gap = static_cast<double>(pts[r.first].t_ms - pts[prev.last].t_ms);
            const auto [px, py] = centroid(prev);
            const auto [cx, cy] = centroid(r);
            if (gap <= params.merge_gap_ms && std::hypot(cx - px, cy - py) <= params.merge_distance_px) {
                prev.last = r.last;
                continue;
            }
        }
        merged.push_back(r);
    }

    StayPointSet out;
    out.source = traj.source;
    for (const auto& r : merged) {
        const double duration = static_cast<double>(pts[r.last].t_ms - pts[r.first].t_ms);
        if (duration < params.min_duration_ms || duration <= 0.0) continue;
        const auto [cx, cy] = centroid(r);
        double dispersion = 0.0;
        for (std::size_t i = r.first; i <= r.last; ++i) {
            dispersion = std::max(dispersion, std::hypot(pts[i].x - cx, pts[i].y - cy));
        }
        if (dispersion > params.max_dispersion_px) continue;
        out.points.push_back({cx, cy, duration, static_cast<double>(pts[r.first].t_ms)});
    }
    return out;
}

AttentionMap render_soft_attention(const StayPointSet& stays, int height, int width,
                                   const RenderParams& params) {
    if (height <= 0 || width <= 0 || !(params.radius_px > 0.0) || !(params.sigma_px > 0.0)) {
        throw Error(ErrorCode::Validation, "render_soft_attention: sizes and kernel must be positive");
    }
    AttentionMap map{Grid::Zero(height, width), AttentionKind::soft, {}};
    const double r2 = params.radius_px * params.radius_px;
    const double inv2s2 = 1.0 / (2.0 * params.sigma_px * params.sigma_px);
    for (const auto& s : stays.points) {
        const int y0 = std::max(0, static_cast<int>(std::floor(s.y - params.radius_px)));
        const int y1 = std::min(height - 1, static_cast<int>(std::ceil(s.y + params.radius_px)));
        const int x0 = std::max(0, static_cast<int>(std::floor(s.x - params.radius_px)));
        const int x1 = std::min(width - 1, static_cast<int>(std::ceil(s.x + params.radius_px)));
        for (int y = y0; y <= y1; ++y) {
            for (int x = x0; x <= x1; ++x) {
                const double d2 = (x - s.x) * (x - s.x) + (y - s.y) * (y - s.y);
                if (d2 <= r2) {
                    map.grid(y, x) += std::exp(-d2 * inv2s2);
                }
            }
        }
    }
    const double peak = map.grid.maxCoeff();
    if (peak > 0.0) {
        map.grid /= peak;
    }
    return map;
}

AttentionMap threshold_hard(const AttentionMap& soft, double threshold) {
    if (!(threshold > 0.0 && threshold < 1.0)) {
        throw Error(ErrorCode::BadThreshold, "threshold must lie in (0, 1)");
    }
    if (soft.kind != AttentionKind::soft) {
        throw Error(ErrorCode::Validation, "threshold_hard expects a soft attention map");
    }
    AttentionMap hard{(soft.grid.array() > threshold).cast<double>().matrix(), AttentionKind::hard,
                      soft.image_id};
    return hard;
}

}  // namespace vccnet
