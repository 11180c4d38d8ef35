#ifndef VCCNET_TRAINING_HPP
#define VCCNET_TRAINING_HPP

// Joint optimisation of the attention generator and the classifier, plus
// batched inference under the different attention sources.

#include "vccnet/synthetic.hpp"
#include "vccnet/vag.hpp"
#include "vccnet/vcc.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace vccnet {

/// Loss-term switches for ablations. A disabled term is zeroed, its head kept.
struct LossToggles {
    bool soft = true;
    bool hard = true;
    bool aux = true;
    bool align = true;
};

struct TrainConfig {
    double lr = 2e-4;
    int batch_size = 8;
    int epochs = 200;
    double lambda_align = 0.5;
    double lambda_vag = 0.5;
    double alpha = 2.0;
    std::uint64_t seed = 7;
    std::string optimizer = "adam";
    LossToggles losses;
    /// Stop after this many optimiser steps; 0 means run all epochs.
    int max_steps = 0;
    /// Let the alignment term back-propagate into the generator through da_hat.
    bool attention_gradient = false;

    void validate() const;
};

struct ModelConfig {
    VagConfig vag;
    VccConfig vcc;
    /// false: the classifier runs without a generator (constant attention).
    bool use_vag = true;

    void validate() const;
    /// Both networks at one input size / width / depth.
    static ModelConfig uniform(int size, int channels, int k, int num_classes);
};

struct ModelBundle {
    ModelConfig config;
    VagModel vag;
    VccModel vcc;
    ParamStore params;  // "vag.*" then "vcc.*"

    static ModelBundle create(const ModelConfig& cfg, std::uint64_t seed);
};

/// L = L_VCC + lambda_vag * L_VAG.
inline double total_loss(double vag_total, double vcc_total, double lambda_vag) {
    return vcc_total + lambda_vag * vag_total;
}
Var total_loss(const Var& vag_total, const Var& vcc_total, double lambda_vag);

struct LossRecord {
    int epoch = 0;
    int step = 0;
    double l_soft = 0.0;
    double l_hard = 0.0;
    double l_aux = 0.0;
    double l_align = 0.0;
    double l_ce = 0.0;
    double total = 0.0;
    double acc = 0.0;  // percent
};

struct TrainResult {
    ModelBundle bundle;
    std::vector<LossRecord> epochs;  // mean over the epoch's steps
    std::vector<LossRecord> steps;
};

struct Batch {
    FeatureMap images;
    Matrix y_soft;  // (B*H*W) x 1
    Matrix y_hard;
    std::vector<int> labels;
};

Batch make_batch(std::span<const Sample> samples, std::span<const std::size_t> indices);

using ProgressFn = std::function<void(const LossRecord&)>;

/// Throws Error(DivergenceDetected) on a non-finite loss.
TrainResult train(const TrainConfig& cfg, const ModelConfig& model_cfg, std::span<const Sample> data,
                  const ProgressFn& on_epoch = {});

/// Continues optimising an existing bundle in place.
void train_into(ModelBundle& bundle, const TrainConfig& cfg, std::span<const Sample> data,
                std::vector<LossRecord>& epochs, std::vector<LossRecord>& steps,
                const ProgressFn& on_epoch = {});

enum class AttentionMode { generated, radiologist, fused, random };

const char* attention_mode_name(AttentionMode m);
AttentionMode parse_attention_mode(const std::string& name);

struct InferenceOptions {
    AttentionMode mode = AttentionMode::generated;
    std::uint64_t seed = 0;       // random mode
    RenderParams render{24.0, 4.0};  // random mode kernel
    int batch_size = 16;
};

struct Prediction {
    std::vector<double> probs;
    int predicted = 0;
    Grid p_soft;     // generator output (empty without a generator)
    Grid attention;  // what the classifier consumed
};

/// Inference in evaluation mode; safe to call concurrently on a shared bundle.
std::vector<Prediction> predict(const ModelBundle& bundle, std::span<const Sample> data,
                                const InferenceOptions& opts = {});

/// Pixelwise mean of two maps, rescaled to max 1.
Grid fuse_attention(const Grid& generated, const Grid& radiologist);

/// 1-3 random dwells rendered with the given kernel.
Grid random_attention(int height, int width, std::uint64_t seed, const RenderParams& render);

nlohmann::json train_config_to_json(const TrainConfig& cfg);
/// Every TrainConfig field must be present; errors name the key.
TrainConfig train_config_from_json(const nlohmann::json& j);
nlohmann::json model_config_to_json(const ModelConfig& cfg);
ModelConfig model_config_from_json(const nlohmann::json& j);

/// Training log: header epoch,l_soft,l_hard,l_aux,l_align,l_ce,total,acc.
std::string loss_log_csv(std::span<const LossRecord> rows);

}  // namespace vccnet

#endif  // VCCNET_TRAINING_HPP
