#ifndef VCCNET_ABLATION_HPP
#define VCCNET_ABLATION_HPP

// Structural ablations as configuration switches: loss-term toggles, the
// generator backbone, dropping the generator, and the attention source at
// evaluation. Each variant yields one metrics row.

#include "vccnet/metrics.hpp"

#include <functional>
#include <string>
#include <vector>

namespace vccnet {

struct AblationVariant {
    std::string name;
    TrainConfig train;
    ModelConfig model;
    AttentionMode mode = AttentionMode::generated;
};

struct AblationRow {
    std::string name;
    MetricsReport metrics;
};

/// full, no_soft, no_hard, no_aux, no_align, backbone_cnn_only,
/// backbone_gnn_only, no_vag, attention_random, attention_radiologist,
/// attention_fused.
std::vector<AblationVariant> standard_ablation(const TrainConfig& train, const ModelConfig& model);

/// Variants sharing a training setup train once and differ only in evaluation.
std::vector<AblationRow> run_ablation(const std::vector<AblationVariant>& variants,
                                      std::span<const Sample> train_data, std::span<const Sample> test_data,
                                      const std::function<void(const AblationRow&)>& on_row = {});

nlohmann::json ablation_to_json(const std::vector<AblationRow>& rows);

}  // namespace vccnet

#endif  // VCCNET_ABLATION_HPP
