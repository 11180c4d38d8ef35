#ifndef VCCNET_DATASET_HPP
#define VCCNET_DATASET_HPP

// Dataset sources for the command line: the seeded synthetic generator or a
// directory described by dataset.json:
//   {"samples": [{"id", "image": "images/a.png" | ".vcca", "trajectory": "traj/a.json",
//                 "label": n, "mask": optional path}, ...]}
// Directory samples get their attention targets from the trace pipeline.

#include "vccnet/synthetic.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace vccnet {

struct DataSpec {
    std::string kind = "synthetic";  // "synthetic" | "directory"
    int n = 16;
    int size = 64;
    std::uint64_t seed = 11;
    /// "all", "train", "validation" or "test" (seeded 70/15/15 split).
    std::string split = "all";
    std::filesystem::path path;  // directory kind
    RenderParams render{24.0, 4.0};
    double hard_threshold = kDefaultHardThreshold;
};

/// Relative directory paths resolve against base_dir. Errors name the key.
DataSpec data_spec_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = {});
nlohmann::json data_spec_to_json(const DataSpec& spec);

/// Samples for spec.split, or for `split_override` when non-empty.
std::vector<Sample> load_samples(const DataSpec& spec, const std::string& split_override = {});

/// Writes images (VCCA and 8-bit PNG), trajectories, masks and dataset.json.
void write_dataset_dir(const std::filesystem::path& dir, std::span<const Sample> samples);
std::vector<Sample> read_dataset_dir(const std::filesystem::path& dir, const RenderParams& render,
                                     double hard_threshold);

}  // namespace vccnet

#endif  // VCCNET_DATASET_HPP
