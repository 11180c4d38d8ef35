#ifndef VCCNET_VAG_HPP
#define VCCNET_VAG_HPP

// Visual attention generator: a pyramid GNN encoder feeding two CNN decoders
// (soft and hard attention) plus an auxiliary diagnosis head.

#include "vccnet/layers.hpp"

#include <span>
#include <string>
#include <vector>

namespace vccnet {

enum class VagBackbone {
    gnn_cnn,   // GNN encoder, CNN decoders
    gnn_only,  // GNN blocks in encoder and decoders
    cnn_only,  // CNN blocks in encoder and decoders
};

const char* vag_backbone_name(VagBackbone b);
VagBackbone parse_vag_backbone(const std::string& name);

struct VagConfig {
    int input_height = 64;
    int input_width = 64;
    int stem_channels = 32;
    std::vector<int> stage_depths{1, 1, 1, 1};
    int decoder_depth = 4;  // one decoder block per encoder scale
    int k = 9;
    int num_classes = 2;
    VagBackbone backbone = VagBackbone::gnn_cnn;

    /// Throws Error(Config) on an inconsistent configuration.
    void validate() const;
    int stage_channels(int stage) const { return stem_channels << stage; }
    int stage_count() const { return static_cast<int>(stage_depths.size()); }
};

struct VagForward {
    Var soft;         // (B*H*W) x 1, sigmoid probabilities
    Var hard_logits;  // (B*H*W) x 1
    Var aux_logits;   // B x classes
    Var aux_log_probs;
    std::vector<FeatureMap> encoder;  // one per stage
    int batch = 0;

    /// Softmax of the auxiliary head, B x classes.
    Matrix aux_probs() const;
    /// Soft attention of one sample as an H x W grid.
    Grid soft_grid(int sample, int height, int width) const;
};

struct VagLoss {
    Var total;
    Var soft;
    Var hard;
    Var aux;
};

inline constexpr double kDiceEpsilon = 1.0;

class VagModel {
public:
    VagModel() = default;
    VagModel(const VagConfig& cfg, Rng& rng);

    VagForward forward(const FeatureMap& images, const Context& ctx) const;
    void register_params(ParamStore& store, const std::string& prefix) const;

    /// Zeroes the three head maps (soft, hard, diagnose).
    void zero_heads();

    const VagConfig& config() const { return cfg_; }
    VagConfig& mutable_config() { return cfg_; }

    struct Decoder {
        std::vector<Linear> skip;  // stage channels -> decoder width
        Linear stem_skip;          // full-resolution stem channels -> decoder width
        std::vector<CnnBlock> cnn;
        std::vector<GnnBlock> gnn;
        Linear head;
    };

    Stem stem;
    std::vector<ConvBnAct> downsample;  // stage s-1 -> s
    std::vector<std::vector<GnnBlock>> gnn_stages;
    std::vector<std::vector<CnnBlock>> cnn_stages;
    Decoder soft_decoder;
    Decoder hard_decoder;
    Linear diagnose;

private:
    Var decode(const Decoder& dec, const std::vector<FeatureMap>& enc, const FeatureMap& stem_full,
               const Context& ctx) const;

    VagConfig cfg_;
};

/// MSE(soft, y_soft) + Dice(sigmoid(hard), y_hard) + CE(aux, y_cls).
/// Targets are stacked (B*H*W) x 1 in the same row order as the outputs.
VagLoss vag_loss(const VagForward& out, const Matrix& y_soft, const Matrix& y_hard,
                 std::span<const int> labels);

}  // namespace vccnet

#endif  // VCCNET_VAG_HPP
