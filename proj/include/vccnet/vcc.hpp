#ifndef VCCNET_VCC_HPP
#define VCCNET_VCC_HPP

// Cognition-guided classifier: GNN stages whose graphs come from fused
// feature/attention distances, with a distance alignment penalty per stage.

#include "vccnet/layers.hpp"

#include <span>
#include <string>
#include <vector>

namespace vccnet {

struct VccConfig {
    int input_height = 64;
    int input_width = 64;
    int stem_channels = 32;
    std::vector<int> stage_depths{1, 1, 1, 1};
    int k = 9;
    int num_classes = 2;
    double alpha = 2.0;

    void validate() const;
    int stage_channels(int stage) const { return stem_channels << stage; }
    int stage_count() const { return static_cast<int>(stage_depths.size()); }
};

struct CgcmState {
    DistanceMatrix<double> df_hat;
    DistanceMatrix<double> da_hat;
    DistanceMatrix<double> fused;
    double align_loss_value = 0.0;
};

struct CgcmResult {
    Var align;  // 1x1, differentiable through the features
    Neighborhood neighbors;  // local indices
    CgcmState state;
};

/// Area-average pooling of an attention grid onto a coarser grid.
Grid downsample_attention(const Grid& p_soft, int target_height, int target_width);

/// Co-edits one sample's graph: normalised feature and attention distances,
/// their alignment loss, and the k-NN edges of df_hat + alpha * da_hat.
/// k is clamped to nodes - 1; a single node yields no edges.
CgcmResult cgcm(const Var& features, const Eigen::VectorXd& attention, double alpha, int k);
/// Same, with attention as an N x 1 node; gradient reaches it through da_hat
/// when it requires one.
CgcmResult cgcm(const Var& features, const Var& attention, double alpha, int k);

struct StageGraph {
    PatchGraph<double> graph;
    CgcmState state;
};

struct VccForward {
    Var logits;  // B x classes
    Var log_probs;
    std::vector<Var> align;  // per stage, mean over the batch
    std::vector<FeatureMap> stages;
    std::vector<std::vector<StageGraph>> graphs;  // [stage][sample], when requested
    int batch = 0;

    Matrix probs() const;
};

class VccModel {
public:
    VccModel() = default;
    VccModel(const VccConfig& cfg, Rng& rng);

    /// attention is (B*H*W) x 1 at input resolution; it is never differentiated.
    VccForward forward(const FeatureMap& images, const Matrix& attention, const Context& ctx,
                       bool keep_graphs = false) const;
    /// Attention as a graph node, so the alignment term can train its producer.
    VccForward forward(const FeatureMap& images, const Var& attention, const Context& ctx,
                       bool keep_graphs = false) const;
    void register_params(ParamStore& store, const std::string& prefix) const;
    void zero_head();

    const VccConfig& config() const { return cfg_; }
    VccConfig& mutable_config() { return cfg_; }

    Stem stem;
    std::vector<ConvBnAct> downsample;
    std::vector<std::vector<GnnBlock>> stages;
    Linear head;

private:
    VccConfig cfg_;
};

struct VccLoss {
    Var total;
    Var ce;
    Var align_mean;
};

/// CE(p_cls, y_cls) + lambda_align * mean(per-stage alignment).
VccLoss vcc_loss(const VccForward& out, std::span<const int> labels, double lambda_align);

}  // namespace vccnet

#endif  // VCCNET_VCC_HPP
