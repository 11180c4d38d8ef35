#include "vccnet/vag.hpp"

#include <cmath>

namespace vccnet {

const char* vag_backbone_name(VagBackbone b) {
    switch (b) {
        case VagBackbone::gnn_cnn: return "gnn_cnn";
        case VagBackbone::gnn_only: return "gnn_only";
        case VagBackbone::cnn_only: return "cnn_only";
    }
    return "gnn_cnn";
}

VagBackbone parse_vag_backbone(const std::string& name) {
    if (name == "gnn_cnn") return VagBackbone::gnn_cnn;
    if (name == "gnn_only") return VagBackbone::gnn_only;
    if (name == "cnn_only") return VagBackbone::cnn_only;
    throw Error(ErrorCode::Config, "backbone: unknown value \"" + name + "\"");
}

void VagConfig::validate() const {
    if (stage_depths.size() != 4 || decoder_depth != 4) {
        throw Error(ErrorCode::Config, "stage_depths: four encoder stages are required");
    }
    for (int d : stage_depths) {
        if (d < 1) throw Error(ErrorCode::Config, "stage_depths: every depth must be >= 1");
    }
    if (input_height <= 0 || input_width <= 0 || input_height % 32 != 0 || input_width % 32 != 0) {
        throw Error(ErrorCode::Config, "input_size: height and width must be positive multiples of 32");
    }
    if (stem_channels < 2 || k < 1 || num_classes < 2) {
        throw Error(ErrorCode::Config, "stem_channels >= 2, k >= 1 and num_classes >= 2 are required");
    }
}

Matrix VagForward::aux_probs() const { return aux_log_probs.value().array().exp(); }

Grid VagForward::soft_grid(int sample, int height, int width) const {
    const Eigen::Index n = static_cast<Eigen::Index>(height) * width;
    Grid g(height, width);
    Eigen::Map<Matrix>(g.data(), n, 1) = soft.value().middleRows(sample * n, n);
    return g;
}

VagModel::VagModel(const VagConfig& cfg, Rng& rng) : cfg_(cfg) {
    cfg_.validate();
    const int stages = cfg_.stage_count();
    const int width = cfg_.stem_channels;
    stem = Stem(width, rng);
    for (int s = 1; s < stages; ++s) {
        downsample.emplace_back(cfg_.stage_channels(s - 1), cfg_.stage_channels(s), 2, false, rng);
    }
    gnn_stages.resize(stages);
    cnn_stages.resize(stages);
    for (int s = 0; s < stages; ++s) {
        for (int d = 0; d < cfg_.stage_depths[s]; ++d) {
            if (cfg_.backbone == VagBackbone::cnn_only) {
                cnn_stages[s].emplace_back(cfg_.stage_channels(s), rng);
            } else {
                gnn_stages[s].emplace_back(cfg_.stage_channels(s), rng);
            }
        }
    }
    for (Decoder* dec : {&soft_decoder, &hard_decoder}) {
        for (int s = 0; s < stages; ++s) {
            dec->skip.emplace_back(cfg_.stage_channels(s), width, rng);
        }
        dec->stem_skip = Linear(std::max(width / 2, 1), width, rng);
        for (int i = 0; i < stages; ++i) {
            if (cfg_.backbone == VagBackbone::gnn_only) {
                dec->gnn.emplace_back(width, rng);
            } else {
                dec->cnn.emplace_back(width, rng);
            }
        }
        dec->head = Linear(width, 1, rng);
    }
    diagnose = Linear(cfg_.stage_channels(stages - 1), cfg_.num_classes, rng);
}

void VagModel::zero_heads() {
    for (Linear* l : {&soft_decoder.head, &hard_decoder.head, &diagnose}) {
        l->weight.mutable_value().setZero();
        l->bias.mutable_value().setZero();
    }
}

Var VagModel::decode(const Decoder& dec, const std::vector<FeatureMap>& enc,
                     const FeatureMap& stem_full, const Context& ctx) const {
    const int stages = static_cast<int>(enc.size());
    FeatureMap z = enc.back();
    z.data = dec.skip[stages - 1].forward(enc.back().data);
    for (int i = 0; i < stages; ++i) {
        const int s = stages - 1 - i;
        if (i > 0) {
            Var up = ad::upsample_nearest(z.data, z.batch, z.height, z.width, 2);
            z.height *= 2;
            z.width *= 2;
            z.data = ad::add(up, dec.skip[s].forward(enc[s].data));
        }
        if (!dec.cnn.empty()) {
            z = dec.cnn[i].forward(z, ctx);
        } else {
            z.data = dec.gnn[i].forward(z.data, feature_knn(z, cfg_.k));
        }
    }
    const int factor = stem_full.height / z.height;
    Var up = ad::upsample_nearest(z.data, z.batch, z.height, z.width, factor);
    Var fused = ad::relu(ad::add(up, dec.stem_skip.forward(stem_full.data)));
    return dec.head.forward(fused);
}

VagForward VagModel::forward(const FeatureMap& images, const Context& ctx) const {
    if (images.height != cfg_.input_height || images.width != cfg_.input_width || images.channels() != 1) {
        throw Error(ErrorCode::ShapeMismatch, "vag_forward: image does not match configured input size");
    }
    auto [x, full] = stem.forward(images, ctx);
    VagForward out;
    out.batch = images.batch;
    for (int s = 0; s < cfg_.stage_count(); ++s) {
        if (s > 0) {
            x = downsample[s - 1].forward(x, ctx);
        }
        if (cfg_.backbone == VagBackbone::cnn_only) {
            for (const auto& block : cnn_stages[s]) x = block.forward(x, ctx);
        } else {
            const Neighborhood nbrs = feature_knn(x, cfg_.k);
            for (const auto& block : gnn_stages[s]) x.data = block.forward(x.data, nbrs);
        }
        out.encoder.push_back(x);
    }
    out.soft = ad::sigmoid(decode(soft_decoder, out.encoder, full, ctx));
    out.hard_logits = decode(hard_decoder, out.encoder, full, ctx);
    const FeatureMap& deepest = out.encoder.back();
    out.aux_logits = diagnose.forward(ad::group_mean_rows(deepest.data, deepest.nodes_per_sample()));
    out.aux_log_probs = ad::log_softmax_rows(out.aux_logits);
    return out;
}

void VagModel::register_params(ParamStore& store, const std::string& prefix) const {
    stem.register_params(store, prefix + ".stem");
    for (std::size_t s = 0; s < downsample.size(); ++s) {
        downsample[s].register_params(store, prefix + ".down" + std::to_string(s + 1));
    }
    for (std::size_t s = 0; s < gnn_stages.size(); ++s) {
        for (std::size_t d = 0; d < gnn_stages[s].size(); ++d) {
            gnn_stages[s][d].register_params(store, prefix + ".stage" + std::to_string(s) + ".gnn" + std::to_string(d));
        }
        for (std::size_t d = 0; d < cnn_stages[s].size(); ++d) {
            cnn_stages[s][d].register_params(store, prefix + ".stage" + std::to_string(s) + ".cnn" + std::to_string(d));
        }
    }
    const auto reg_decoder = [&](const Decoder& dec, const std::string& name) {
        for (std::size_t s = 0; s < dec.skip.size(); ++s) {
            dec.skip[s].register_params(store, name + ".skip" + std::to_string(s));
        }
        dec.stem_skip.register_params(store, name + ".stem_skip");
        for (std::size_t i = 0; i < dec.cnn.size(); ++i) {
            dec.cnn[i].register_params(store, name + ".block" + std::to_string(i));
        }
        for (std::size_t i = 0; i < dec.gnn.size(); ++i) {
            dec.gnn[i].register_params(store, name + ".block" + std::to_string(i));
        }
        dec.head.register_params(store, name + ".head");
    };
    reg_decoder(soft_decoder, prefix + ".soft_decoder");
    reg_decoder(hard_decoder, prefix + ".hard_decoder");
    diagnose.register_params(store, prefix + ".diagnose");
}

VagLoss vag_loss(const VagForward& out, const Matrix& y_soft, const Matrix& y_hard,
                 std::span<const int> labels) {
    if (y_soft.rows() != out.soft.rows() || y_hard.rows() != out.hard_logits.rows() ||
        static_cast<int>(labels.size()) != out.batch) {
        throw Error(ErrorCode::ShapeMismatch, "vag_loss: targets do not match outputs");
    }
    VagLoss loss;
    loss.soft = ad::mse(out.soft, ad::constant(y_soft));
    loss.hard = ad::dice_loss(out.hard_logits, y_hard, out.soft.rows() / out.batch, kDiceEpsilon);
    loss.aux = ad::nll(out.aux_log_probs, labels);
    const Var terms[] = {loss.soft, loss.hard, loss.aux};
    loss.total = ad::add_scalars(terms);
    return loss;
}

}  // namespace vccnet
