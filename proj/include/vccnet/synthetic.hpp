#ifndef VCCNET_SYNTHETIC_HPP
#define VCCNET_SYNTHETIC_HPP

// Desk-scale stand-in for a radiograph reading corpus: striped backgrounds
// with Gaussian "lesions", and simulated mouse traces that dwell on them.

#include "vccnet/trace.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace vccnet {

struct Sample {
    std::string id;
    Grid image;        // H x W in [0, 1]
    Trajectory trajectory;
    Grid y_soft;       // rendered from the trajectory's stay points
    Grid y_hard;
    int label = 0;     // 1 = lesion present
    Grid lesion_mask;  // ground-truth lesion pixels
    int lesion_count = 0;
};

struct SyntheticConfig {
    double distractor_probability = 0.2;
    double dwell_min_ms = 400.0;
    double dwell_max_ms = 700.0;
    double saccade_speed_px_s = 600.0;
    double hard_threshold = kDefaultHardThreshold;
    /// Kernel scaled to the small images (same radius/sigma ratio as 150/25).
    RenderParams render{24.0, 4.0};
    I2MCParams fixation = small_image_fixation_params();

    static I2MCParams small_image_fixation_params();
};

Sample make_synthetic_sample(int size, std::uint64_t seed, int index, const SyntheticConfig& cfg = {});

/// n samples, deterministic in (size, seed); labels are balanced in expectation.
std::vector<Sample> make_synthetic_dataset(int n, int size, std::uint64_t seed,
                                           const SyntheticConfig& cfg = {});

/// Attention maps for a sample set derived through the trace pipeline.
void derive_attention(Sample& sample, const SyntheticConfig& cfg);

struct DatasetSplit {
    std::vector<Sample> train;
    std::vector<Sample> validation;
    std::vector<Sample> test;
};

/// Seeded 70/15/15 shuffle split.
DatasetSplit split_dataset(std::vector<Sample> samples, std::uint64_t seed);

}  // namespace vccnet

#endif  // VCCNET_SYNTHETIC_HPP
