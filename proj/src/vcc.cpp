#include "vccnet/vcc.hpp"

namespace vccnet {

void VccConfig::validate() const {
    if (stage_depths.empty()) {
        throw Error(ErrorCode::Config, "stage_depths: at least one stage is required");
    }
    for (int d : stage_depths) {
        if (d < 1) throw Error(ErrorCode::Config, "stage_depths: every depth must be >= 1");
    }
    const int divisor = 4 << (stage_count() - 1);
    if (input_height <= 0 || input_width <= 0 || input_height % divisor != 0 || input_width % divisor != 0) {
        throw Error(ErrorCode::Config, "input_size: height and width must be multiples of " + std::to_string(divisor));
    }
    if (stem_channels < 2 || k < 1 || num_classes < 2) {
        throw Error(ErrorCode::Config, "stem_channels >= 2, k >= 1 and num_classes >= 2 are required");
    }
    if (!(alpha >= 0.0)) {
        throw Error(ErrorCode::Config, "alpha: must be >= 0");
    }
}

Grid downsample_attention(const Grid& p_soft, int target_height, int target_width) {
    if (target_height <= 0 || target_width <= 0 || p_soft.rows() % target_height != 0 ||
        p_soft.cols() % target_width != 0) {
        throw Error(ErrorCode::ShapeMismatch, "downsample_attention: target must divide the map size");
    }
    const Eigen::Index fy = p_soft.rows() / target_height;
    const Eigen::Index fx = p_soft.cols() / target_width;
    Grid out(target_height, target_width);
    for (int y = 0; y < target_height; ++y) {
        for (int x = 0; x < target_width; ++x) {
            out(y, x) = p_soft.block(y * fy, x * fx, fy, fx).mean();
        }
    }
    return out;
}

CgcmResult cgcm(const Var& features, const Eigen::VectorXd& attention, double alpha, int k) {
    return cgcm(features, ad::constant(Matrix(attention)), alpha, k);
}

CgcmResult cgcm(const Var& features, const Var& attention, double alpha, int k) {
    const Eigen::Index n = features.rows();
    if (attention.rows() != n || attention.cols() != 1) {
        throw Error(ErrorCode::ShapeMismatch, "cgcm: one attention value per node required");
    }
    Var df_hat = ad::minmax_normalize(ad::pairwise_distance(features));
    const Var da_raw = ad::minmax_normalize(ad::pairwise_distance(attention));
    const Matrix snapped = round_to_single<double>(da_raw.value());
    // snapped - raw is exact, so the sum reproduces snapped while passing gradient through.
    const Var da_hat = da_raw.requires_grad() ? ad::add(da_raw, ad::constant(snapped - da_raw.value()))
                                              : ad::constant(snapped);
    CgcmResult result;
    result.state.df_hat = {df_hat.value(), DistanceSpace::feature};
    result.state.da_hat = {da_hat.value(), DistanceSpace::visual};
    result.align = ad::mse(df_hat, da_hat);
    result.state.align_loss_value = result.align.scalar();
    result.state.fused = fuse_distances(result.state.df_hat, result.state.da_hat, alpha);
    const int keff = effective_k(k, n);
    if (keff > 0) {
        result.neighbors = knn_edges(result.state.fused, keff);
    } else {
        result.neighbors.assign(static_cast<std::size_t>(n), {});
    }
    return result;
}

Matrix VccForward::probs() const { return log_probs.value().array().exp(); }

VccModel::VccModel(const VccConfig& cfg, Rng& rng) : cfg_(cfg) {
    cfg_.validate();
    stem = Stem(cfg_.stem_channels, rng);
    for (int s = 1; s < cfg_.stage_count(); ++s) {
        downsample.emplace_back(cfg_.stage_channels(s - 1), cfg_.stage_channels(s), 2, false, rng);
    }
    stages.resize(cfg_.stage_count());
    for (int s = 0; s < cfg_.stage_count(); ++s) {
        for (int d = 0; d < cfg_.stage_depths[s]; ++d) {
            stages[s].emplace_back(cfg_.stage_channels(s), rng);
        }
    }
    head = Linear(cfg_.stage_channels(cfg_.stage_count() - 1), cfg_.num_classes, rng);
}

void VccModel::zero_head() {
    head.weight.mutable_value().setZero();
    head.bias.mutable_value().setZero();
}

VccForward VccModel::forward(const FeatureMap& images, const Matrix& attention, const Context& ctx,
                             bool keep_graphs) const {
    return forward(images, ad::constant(attention), ctx, keep_graphs);
}

VccForward VccModel::forward(const FeatureMap& images, const Var& attention, const Context& ctx,
                             bool keep_graphs) const {
    if (images.height != cfg_.input_height || images.width != cfg_.input_width || images.channels() != 1) {
        throw Error(ErrorCode::ShapeMismatch, "vcc_forward: image does not match configured input size");
    }
    const Eigen::Index pixels = static_cast<Eigen::Index>(images.height) * images.width;
    if (attention.rows() != images.batch * pixels || attention.cols() != 1) {
        throw Error(ErrorCode::ShapeMismatch, "vcc_forward: attention does not match image batch");
    }

    VccForward out;
    out.batch = images.batch;
    FeatureMap x = stem.forward(images, ctx).first;
    for (int s = 0; s < cfg_.stage_count(); ++s) {
        if (s > 0) {
            x = downsample[s - 1].forward(x, ctx);
        }
        const int n = x.nodes_per_sample();
        const int factor = images.height / x.height;
        const Var att_stage = factor == 1 ? attention
                                          : ad::block_mean(attention, images.batch, images.height,
                                                           images.width, factor);
        Neighborhood global;
        global.reserve(static_cast<std::size_t>(x.batch) * n);
        std::vector<Var> aligns;
        std::vector<StageGraph> graphs;
        for (int b = 0; b < x.batch; ++b) {
            Var features = ad::slice_rows(x.data, static_cast<Eigen::Index>(b) * n, n);
            Var att_nodes = ad::slice_rows(att_stage, static_cast<Eigen::Index>(b) * n, n);
            CgcmResult res = cgcm(features, att_nodes, cfg_.alpha, cfg_.k);
            append_offset(global, res.neighbors, b * n);
            aligns.push_back(res.align);
            if (keep_graphs) {
                StageGraph sg;
                sg.graph.features = features.value();
                sg.graph.grid_height = x.height;
                sg.graph.grid_width = x.width;
                sg.graph.k = effective_k(cfg_.k, n);
                sg.graph.neighbors = std::move(res.neighbors);
                sg.state = std::move(res.state);
                graphs.push_back(std::move(sg));
            }
        }
        out.align.push_back(ad::scale(ad::add_scalars(aligns), 1.0 / x.batch));
        for (const auto& block : stages[s]) {
            x.data = block.forward(x.data, global);
        }
        out.stages.push_back(x);
        if (keep_graphs) out.graphs.push_back(std::move(graphs));
    }
    out.logits = head.forward(ad::group_mean_rows(x.data, x.nodes_per_sample()));
    out.log_probs = ad::log_softmax_rows(out.logits);
    return out;
}

void VccModel::register_params(ParamStore& store, const std::string& prefix) const {
    stem.register_params(store, prefix + ".stem");
    for (std::size_t s = 0; s < downsample.size(); ++s) {
        downsample[s].register_params(store, prefix + ".down" + std::to_string(s + 1));
    }
    for (std::size_t s = 0; s < stages.size(); ++s) {
        for (std::size_t d = 0; d < stages[s].size(); ++d) {
            stages[s][d].register_params(store, prefix + ".stage" + std::to_string(s) + ".gnn" + std::to_string(d));
        }
    }
    head.register_params(store, prefix + ".head");
}

VccLoss vcc_loss(const VccForward& out, std::span<const int> labels, double lambda_align) {
    if (static_cast<int>(labels.size()) != out.batch || out.align.empty()) {
        throw Error(ErrorCode::ShapeMismatch, "vcc_loss: labels do not match outputs");
    }
    VccLoss loss;
    loss.ce = ad::nll(out.log_probs, labels);
    loss.align_mean = ad::scale(ad::add_scalars(out.align), 1.0 / static_cast<double>(out.align.size()));
    loss.total = ad::add(loss.ce, ad::scale(loss.align_mean, lambda_align));
    return loss;
}

}  // namespace vccnet
