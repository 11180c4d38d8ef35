#ifndef VCCNET_TRACE_HPP
#define VCCNET_TRACE_HPP

// Interaction traces to attention maps: stay-point extraction with
// sliding-window two-means clustering, Gaussian soft attention rendering,
// and hard thresholding.

#include "vccnet/errors.hpp"
#include "vccnet/grid_io.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <string>
#include <vector>

namespace vccnet {

enum class TraceSource { mouse, gaze };

struct TracePoint {
    std::int64_t t_ms = 0;
    double x = 0.0;
    double y = 0.0;
};

struct Trajectory {
    std::string image_id;
    int width = 0;
    int height = 0;
    TraceSource source = TraceSource::mouse;
    std::vector<TracePoint> points;
};

struct StayPoint {
    double x = 0.0;
    double y = 0.0;
    double duration_ms = 0.0;
    double onset_ms = 0.0;
};

struct StayPointSet {
    std::vector<StayPoint> points;
    TraceSource source = TraceSource::mouse;
};

enum class AttentionKind { soft, hard };

struct AttentionMap {
    Grid grid;
    AttentionKind kind = AttentionKind::soft;
    std::string image_id;
};

/// Fixation detection settings. Samples are fixation candidates when their
/// averaged cluster-transition weight is at most mean + cutoff_std * std and
/// their incoming speed is at most max_speed_px_s; candidate runs are merged
/// across short gaps and kept if long and compact enough.
struct I2MCParams {
    double window_ms = 200.0;
    double step_ms = 20.0;
    double cutoff_std = 2.0;
    double min_duration_ms = 150.0;
    double merge_gap_ms = 75.0;
    double merge_distance_px = 30.0;
    double max_dispersion_px = 40.0;
    double max_speed_px_s = 1000.0;

    static I2MCParams defaults_for(TraceSource source);
};

struct RenderParams {
    double radius_px = 150.0;
    double sigma_px = 25.0;
};

inline constexpr double kDefaultHardThreshold = 0.5;

const char* trace_source_name(TraceSource s);
TraceSource parse_trace_source(const std::string& name);

/// Throws Error(Validation) naming the first offending point index.
void validate_trajectory(const Trajectory& traj);

Trajectory trajectory_from_json(const nlohmann::json& j);
nlohmann::json trajectory_to_json(const Trajectory& traj);

/// Per-sample averaged transition weights of the sliding two-means pass.
std::vector<double> transition_weights(const Trajectory& traj, const I2MCParams& params);

StayPointSet extract_stay_points(const Trajectory& traj, const I2MCParams& params);

AttentionMap render_soft_attention(const StayPointSet& stays, int height, int width,
                                   const RenderParams& params = {});

AttentionMap threshold_hard(const AttentionMap& soft, double threshold = kDefaultHardThreshold);

}  // namespace vccnet

#endif  // VCCNET_TRACE_HPP
