#include "vccnet/training.hpp"

#include "vccnet/optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

namespace vccnet {

void TrainConfig::validate() const {
    const auto positive = [](double v, const char* key) {
        if (!(v > 0.0) || !std::isfinite(v)) {
            throw Error(ErrorCode::Config, std::string(key) + ": must be positive");
        }
    };
    positive(lr, "lr");
    positive(batch_size, "batch_size");
    if (epochs < 0) throw Error(ErrorCode::Config, "epochs: must be >= 0");
    if (!(lambda_align >= 0.0)) throw Error(ErrorCode::Config, "lambda_align: must be >= 0");
    if (!(lambda_vag >= 0.0)) throw Error(ErrorCode::Config, "lambda_vag: must be >= 0");
    if (!(alpha >= 0.0)) throw Error(ErrorCode::Config, "alpha: must be >= 0");
    if (optimizer != "adam") throw Error(ErrorCode::Config, "optimizer: only \"adam\" is supported");
    if (max_steps < 0) throw Error(ErrorCode::Config, "max_steps: must be >= 0");
}

void ModelConfig::validate() const {
    vag.validate();
    vcc.validate();
    if (vag.input_height != vcc.input_height || vag.input_width != vcc.input_width ||
        vag.num_classes != vcc.num_classes) {
        throw Error(ErrorCode::Config, "model: generator and classifier must share input size and classes");
    }
}

ModelConfig ModelConfig::uniform(int size, int channels, int k, int num_classes) {
    ModelConfig cfg;
    cfg.vag.input_height = cfg.vag.input_width = size;
    cfg.vcc.input_height = cfg.vcc.input_width = size;
    cfg.vag.stem_channels = cfg.vcc.stem_channels = channels;
    cfg.vag.k = cfg.vcc.k = k;
    cfg.vag.num_classes = cfg.vcc.num_classes = num_classes;
    return cfg;
}

ModelBundle ModelBundle::create(const ModelConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    ModelBundle b;
    b.config = cfg;
    Rng rng(seed);
    b.vag = VagModel(cfg.vag, rng);
    b.vcc = VccModel(cfg.vcc, rng);
    b.vag.register_params(b.params, "vag");
    b.vcc.register_params(b.params, "vcc");
    return b;
}

Var total_loss(const Var& vag_total, const Var& vcc_total, double lambda_vag) {
    return ad::add(vcc_total, ad::scale(vag_total, lambda_vag));
}

Batch make_batch(std::span<const Sample> samples, std::span<const std::size_t> indices) {
    std::vector<const Matrix*> images;
    Batch batch;
    const Eigen::Index pixels = samples[indices.front()].image.size();
    batch.y_soft.resize(static_cast<Eigen::Index>(indices.size()) * pixels, 1);
    batch.y_hard.resize(batch.y_soft.rows(), 1);
    for (std::size_t i = 0; i < indices.size(); ++i) {
        const Sample& s = samples[indices[i]];
        images.push_back(&s.image);
        if (s.y_soft.size() != pixels || s.y_hard.size() != pixels) {
            throw Error(ErrorCode::ShapeMismatch, "make_batch: attention targets do not match image size");
        }
        batch.y_soft.middleRows(static_cast<Eigen::Index>(i) * pixels, pixels) =
            Eigen::Map<const Matrix>(s.y_soft.data(), pixels, 1);
        batch.y_hard.middleRows(static_cast<Eigen::Index>(i) * pixels, pixels) =
            Eigen::Map<const Matrix>(s.y_hard.data(), pixels, 1);
        batch.labels.push_back(s.label);
    }
    batch.images = image_batch(images);
    return batch;
}

namespace {

int argmax_row(const Matrix& m, Eigen::Index r) {
    Eigen::Index best = 0;
    m.row(r).maxCoeff(&best);
    return static_cast<int>(best);
}

}  // namespace

void train_into(ModelBundle& bundle, const TrainConfig& cfg, std::span<const Sample> data,
                std::vector<LossRecord>& epochs, std::vector<LossRecord>& steps,
                const ProgressFn& on_epoch) {
    cfg.validate();
    if (data.empty()) {
        throw Error(ErrorCode::Validation, "train: empty dataset");
    }
    bundle.vcc.mutable_config().alpha = cfg.alpha;
    Adam adam(cfg.lr);
    Rng shuffle_rng(cfg.seed ^ 0x9e3779b97f4a7c15ULL);
    std::vector<std::size_t> order(data.size());
    const Context ctx{true};
    const bool use_vag = bundle.config.use_vag;
    int step = static_cast<int>(steps.size());

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::shuffle(order.begin(), order.end(), shuffle_rng);
        LossRecord sum;
        int correct = 0;
        int seen = 0;
        int epoch_steps = 0;
        for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(cfg.batch_size)) {
            if (cfg.max_steps > 0 && step >= cfg.max_steps) break;
            const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
            const std::span<const std::size_t> idx(order.data() + start, end - start);
            const Batch batch = make_batch(data, idx);

            bundle.params.zero_grad();
            LossRecord rec;
            rec.epoch = epoch;
            rec.step = step;
            Var vag_term = ad::scalar_constant(0.0);
            Var attention;
            if (use_vag) {
                const VagForward vout = bundle.vag.forward(batch.images, ctx);
                const VagLoss vl = vag_loss(vout, batch.y_soft, batch.y_hard, batch.labels);
                rec.l_soft = vl.soft.scalar();
                rec.l_hard = vl.hard.scalar();
                rec.l_aux = vl.aux.scalar();
                std::vector<Var> used;
                if (cfg.losses.soft) used.push_back(vl.soft);
                if (cfg.losses.hard) used.push_back(vl.hard);
                if (cfg.losses.aux) used.push_back(vl.aux);
                if (!used.empty()) vag_term = ad::add_scalars(used);
                attention = cfg.attention_gradient ? vout.soft : ad::detach(vout.soft);
            } else {
                attention = ad::constant(Matrix::Zero(batch.y_soft.rows(), 1));
            }
            const VccForward cout = bundle.vcc.forward(batch.images, attention, ctx);
            const VccLoss cl = vcc_loss(cout, batch.labels, cfg.losses.align ? cfg.lambda_align : 0.0);
            rec.l_ce = cl.ce.scalar();
            rec.l_align = cl.align_mean.scalar();
            const Var total = total_loss(vag_term, cl.total, cfg.lambda_vag);
            rec.total = total.scalar();
            if (!std::isfinite(rec.total)) {
                throw Error(ErrorCode::DivergenceDetected,
                            "train: non-finite loss at step " + std::to_string(step));
            }
            ad::backward(total);
            adam.step(bundle.params);

            const Matrix probs = cout.probs();
            int batch_correct = 0;
            for (std::size_t i = 0; i < batch.labels.size(); ++i) {
                batch_correct += argmax_row(probs, static_cast<Eigen::Index>(i)) == batch.labels[i];
            }
            rec.acc = 100.0 * batch_correct / static_cast<double>(batch.labels.size());
            correct += batch_correct;
            seen += static_cast<int>(batch.labels.size());
            steps.push_back(rec);
            sum.l_soft += rec.l_soft;
            sum.l_hard += rec.l_hard;
            sum.l_aux += rec.l_aux;
            sum.l_align += rec.l_align;
            sum.l_ce += rec.l_ce;
            sum.total += rec.total;
            ++epoch_steps;
            ++step;
        }
        if (epoch_steps == 0) break;
        const double inv = 1.0 / epoch_steps;
        LossRecord er{epoch,          step,
                      sum.l_soft * inv, sum.l_hard * inv,
                      sum.l_aux * inv,  sum.l_align * inv,
                      sum.l_ce * inv,   sum.total * inv,
                      100.0 * correct / static_cast<double>(seen)};
        epochs.push_back(er);
        if (on_epoch) on_epoch(er);
    }
}

TrainResult train(const TrainConfig& cfg, const ModelConfig& model_cfg, std::span<const Sample> data,
                  const ProgressFn& on_epoch) {
    cfg.validate();
    TrainResult result{ModelBundle::create(model_cfg, cfg.seed), {}, {}};
    result.bundle.vcc.mutable_config().alpha = cfg.alpha;
    train_into(result.bundle, cfg, data, result.epochs, result.steps, on_epoch);
    return result;
}

const char* attention_mode_name(AttentionMode m) {
    switch (m) {
        case AttentionMode::generated: return "generated";
        case AttentionMode::radiologist: return "radiologist";
        case AttentionMode::fused: return "fused";
        case AttentionMode::random: return "random";
    }
    return "generated";
}

AttentionMode parse_attention_mode(const std::string& name) {
    if (name == "generated") return AttentionMode::generated;
    if (name == "radiologist") return AttentionMode::radiologist;
    if (name == "fused") return AttentionMode::fused;
    if (name == "random") return AttentionMode::random;
    throw Error(ErrorCode::Config, "attention_mode: unknown value \"" + name + "\"");
}

Grid fuse_attention(const Grid& generated, const Grid& radiologist) {
    if (generated.rows() != radiologist.rows() || generated.cols() != radiologist.cols()) {
        throw Error(ErrorCode::ShapeMismatch, "fuse_attention: maps differ in shape");
    }
    Grid out = 0.5 * (generated + radiologist);
    const double peak = out.maxCoeff();
    if (peak > 0.0) out /= peak;
    return out;
}

Grid random_attention(int height, int width, std::uint64_t seed, const RenderParams& render) {
    Rng rng(seed);
    std::uniform_real_distribution<double> ux(0.0, width - 1.0);
    std::uniform_real_distribution<double> uy(0.0, height - 1.0);
    std::uniform_int_distribution<int> count(1, 3);
    StayPointSet stays;
    const int n = count(rng);
    for (int i = 0; i < n; ++i) {
        stays.points.push_back({ux(rng), uy(rng), 500.0, 0.0});
    }
    return render_soft_attention(stays, height, width, render).grid;
}

std::vector<Prediction> predict(const ModelBundle& bundle, std::span<const Sample> data,
                                const InferenceOptions& opts) {
    ad::NoGradGuard no_grad;
    const Context ctx{false};
    std::vector<Prediction> out;
    out.reserve(data.size());
    const std::size_t bs = static_cast<std::size_t>(std::max(1, opts.batch_size));
    for (std::size_t start = 0; start < data.size(); start += bs) {
        const std::size_t end = std::min(data.size(), start + bs);
        std::vector<std::size_t> idx(end - start);
        std::iota(idx.begin(), idx.end(), start);
        std::vector<const Matrix*> images;
        for (auto i : idx) images.push_back(&data[i].image);
        const FeatureMap batch = image_batch(images);
        const int h = batch.height;
        const int w = batch.width;
        const Eigen::Index pixels = static_cast<Eigen::Index>(h) * w;

        std::vector<Grid> generated(idx.size());
        if (bundle.config.use_vag) {
            const VagForward vout = bundle.vag.forward(batch, ctx);
            for (std::size_t i = 0; i < idx.size(); ++i) {
                generated[i] = vout.soft_grid(static_cast<int>(i), h, w);
            }
        }
        Matrix attention(static_cast<Eigen::Index>(idx.size()) * pixels, 1);
        std::vector<Grid> consumed(idx.size());
        for (std::size_t i = 0; i < idx.size(); ++i) {
            const Sample& s = data[idx[i]];
            Grid att;
            if (!bundle.config.use_vag) {
                att = Grid::Zero(h, w);
            } else {
                switch (opts.mode) {
                    case AttentionMode::generated: att = generated[i]; break;
                    case AttentionMode::radiologist: att = s.y_soft; break;
                    case AttentionMode::fused: att = fuse_attention(generated[i], s.y_soft); break;
                    case AttentionMode::random:
                        att = random_attention(h, w, opts.seed * 1000003ULL + idx[i], opts.render);
                        break;
                }
            }
            attention.middleRows(static_cast<Eigen::Index>(i) * pixels, pixels) =
                Eigen::Map<const Matrix>(att.data(), pixels, 1);
            consumed[i] = std::move(att);
        }
        const VccForward cout = bundle.vcc.forward(batch, attention, ctx);
        const Matrix probs = cout.probs();
        for (std::size_t i = 0; i < idx.size(); ++i) {
            Prediction p;
            p.probs.assign(probs.row(static_cast<Eigen::Index>(i)).data(),
                           probs.row(static_cast<Eigen::Index>(i)).data() + probs.cols());
            p.predicted = argmax_row(probs, static_cast<Eigen::Index>(i));
            p.p_soft = std::move(generated[i]);
            p.attention = std::move(consumed[i]);
            out.push_back(std::move(p));
        }
    }
    return out;
}

nlohmann::json train_config_to_json(const TrainConfig& cfg) {
    return {{"lr", cfg.lr},
            {"batch_size", cfg.batch_size},
            {"epochs", cfg.epochs},
            {"lambda_align", cfg.lambda_align},
            {"lambda_vag", cfg.lambda_vag},
            {"alpha", cfg.alpha},
            {"seed", cfg.seed},
            {"optimizer", cfg.optimizer},
            {"max_steps", cfg.max_steps},
            {"attention_gradient", cfg.attention_gradient},
            {"losses",
             {{"soft", cfg.losses.soft}, {"hard", cfg.losses.hard}, {"aux", cfg.losses.aux}, {"align", cfg.losses.align}}}};
}

namespace {

const nlohmann::json& require(const nlohmann::json& j, const char* key) {
    if (!j.is_object() || !j.contains(key)) {
        throw Error(ErrorCode::Config, std::string(key) + ": missing required key");
    }
    return j.at(key);
}

double get_number(const nlohmann::json& j, const char* key) {
    const auto& v = require(j, key);
    if (!v.is_number()) throw Error(ErrorCode::Config, std::string(key) + ": must be a number");
    return v.get<double>();
}

int get_int(const nlohmann::json& j, const char* key) {
    const auto& v = require(j, key);
    if (!v.is_number_integer()) throw Error(ErrorCode::Config, std::string(key) + ": must be an integer");
    return v.get<int>();
}

bool get_bool_or(const nlohmann::json& j, const char* key, bool fallback) {
    if (!j.contains(key)) return fallback;
    if (!j.at(key).is_boolean()) throw Error(ErrorCode::Config, std::string(key) + ": must be a boolean");
    return j.at(key).get<bool>();
}

}  // namespace

TrainConfig train_config_from_json(const nlohmann::json& j) {
    if (!j.is_object()) throw Error(ErrorCode::Config, "config: expected a JSON object");
    TrainConfig cfg;
    cfg.lr = get_number(j, "lr");
    cfg.batch_size = get_int(j, "batch_size");
    cfg.epochs = get_int(j, "epochs");
    cfg.lambda_align = get_number(j, "lambda_align");
    cfg.lambda_vag = get_number(j, "lambda_vag");
    cfg.alpha = get_number(j, "alpha");
    const auto& seed = require(j, "seed");
    if (!seed.is_number_unsigned() && !seed.is_number_integer()) {
        throw Error(ErrorCode::Config, "seed: must be an integer");
    }
    cfg.seed = seed.get<std::uint64_t>();
    const auto& opt = require(j, "optimizer");
    if (!opt.is_string()) throw Error(ErrorCode::Config, "optimizer: must be a string");
    cfg.optimizer = opt.get<std::string>();
    if (j.contains("max_steps")) cfg.max_steps = get_int(j, "max_steps");
    cfg.attention_gradient = get_bool_or(j, "attention_gradient", false);
    if (j.contains("losses")) {
        const auto& l = j.at("losses");
        if (!l.is_object()) throw Error(ErrorCode::Config, "losses: must be an object");
        cfg.losses.soft = get_bool_or(l, "soft", true);
        cfg.losses.hard = get_bool_or(l, "hard", true);
        cfg.losses.aux = get_bool_or(l, "aux", true);
        cfg.losses.align = get_bool_or(l, "align", true);
    }
    cfg.validate();
    return cfg;
}

namespace {

nlohmann::json vag_to_json(const VagConfig& c) {
    return {{"input_size", {c.input_height, c.input_width}},
            {"stem_channels", c.stem_channels},
            {"stage_depths", c.stage_depths},
            {"decoder_depth", c.decoder_depth},
            {"k", c.k},
            {"num_classes", c.num_classes},
            {"backbone", vag_backbone_name(c.backbone)}};
}

nlohmann::json vcc_to_json(const VccConfig& c) {
    return {{"input_size", {c.input_height, c.input_width}},
            {"stem_channels", c.stem_channels},
            {"stage_depths", c.stage_depths},
            {"k", c.k},
            {"num_classes", c.num_classes},
            {"alpha", c.alpha}};
}

template <typename Cfg>
void read_common(const nlohmann::json& j, Cfg& c) {
    if (j.contains("input_size")) {
        const auto& s = j.at("input_size");
        if (!s.is_array() || s.size() != 2) throw Error(ErrorCode::Config, "input_size: expected [H, W]");
        c.input_height = s[0].get<int>();
        c.input_width = s[1].get<int>();
    }
    if (j.contains("stem_channels")) c.stem_channels = get_int(j, "stem_channels");
    if (j.contains("stage_depths")) {
        const auto& d = j.at("stage_depths");
        if (!d.is_array()) throw Error(ErrorCode::Config, "stage_depths: expected an array");
        c.stage_depths = d.get<std::vector<int>>();
    }
    if (j.contains("k")) c.k = get_int(j, "k");
    if (j.contains("num_classes")) c.num_classes = get_int(j, "num_classes");
}

}  // namespace

nlohmann::json model_config_to_json(const ModelConfig& cfg) {
    return {{"vag", vag_to_json(cfg.vag)}, {"vcc", vcc_to_json(cfg.vcc)}, {"use_vag", cfg.use_vag}};
}

ModelConfig model_config_from_json(const nlohmann::json& j) {
    if (!j.is_object()) throw Error(ErrorCode::Config, "model: expected a JSON object");
    ModelConfig cfg;
    if (j.contains("vag") || j.contains("vcc")) {
        read_common(require(j, "vag"), cfg.vag);
        read_common(require(j, "vcc"), cfg.vcc);
        const auto& v = j.at("vag");
        if (v.contains("decoder_depth")) cfg.vag.decoder_depth = get_int(v, "decoder_depth");
        if (v.contains("backbone")) cfg.vag.backbone = parse_vag_backbone(v.at("backbone").get<std::string>());
        if (j.at("vcc").contains("alpha")) cfg.vcc.alpha = get_number(j.at("vcc"), "alpha");
    } else {
        read_common(j, cfg.vag);
        read_common(j, cfg.vcc);
        if (j.contains("decoder_depth")) cfg.vag.decoder_depth = get_int(j, "decoder_depth");
        if (j.contains("backbone")) cfg.vag.backbone = parse_vag_backbone(j.at("backbone").get<std::string>());
    }
    cfg.use_vag = get_bool_or(j, "use_vag", true);
    cfg.validate();
    return cfg;
}

std::string loss_log_csv(std::span<const LossRecord> rows) {
    std::ostringstream out;
    out.precision(17);
    out << "epoch,l_soft,l_hard,l_aux,l_align,l_ce,total,acc\n";
    for (const auto& r : rows) {
        out << r.epoch << ',' << r.l_soft << ',' << r.l_hard << ',' << r.l_aux << ',' << r.l_align << ','
            << r.l_ce << ',' << r.total << ',' << r.acc << '\n';
    }
    return out.str();
}

}  // namespace vccnet
