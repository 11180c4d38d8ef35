#include "cli.hpp"

#include "vccnet/ablation.hpp"
#include "vccnet/checkpoint.hpp"
#include "vccnet/dataset.hpp"
#include "vccnet/export.hpp"
#include "vccnet/gradcam.hpp"
#include "vccnet/imaging.hpp"
#include "vccnet/manifest.hpp"
#include "vccnet/metrics.hpp"
#include "vccnet/service.hpp"

#include <CLI11.hpp>

#include <csignal>
#include <iostream>
#include <optional>
#include <sstream>

namespace vccnet::cli {

namespace fs = std::filesystem;

namespace {

struct Overrides {
    std::optional<std::uint64_t> seed;
    std::optional<double> alpha;
    std::optional<int> k;
    std::optional<double> threshold;
    std::optional<std::string> attention_mode;
};

struct RunConfig {
    TrainConfig train;
    ModelConfig model;
    DataSpec data;
    nlohmann::json resolved;
};

nlohmann::json read_json_file(const fs::path& p) {
    const auto bytes = read_file_bytes(p);
    try {
        return nlohmann::json::parse(bytes.begin(), bytes.end());
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::Config, p.string() + ": not valid JSON: " + e.what());
    }
}

/// A complete configuration with every key at its default.
nlohmann::json default_config() {
    nlohmann::json j = train_config_to_json(TrainConfig{});
    j["model"] = {{"input_size", {64, 64}}, {"stem_channels", 32}, {"stage_depths", {1, 1, 1, 1}},
                  {"decoder_depth", 4},     {"k", 9},             {"num_classes", 2},
                  {"backbone", "gnn_cnn"},  {"use_vag", true}};
    j["data"] = data_spec_to_json(DataSpec{});
    return j;
}

RunConfig load_config(const fs::path& path, const Overrides& ov) {
    nlohmann::json j = read_json_file(path);
    if (!j.is_object()) throw Error(ErrorCode::Config, "config: expected a JSON object");
    if (ov.seed) j["seed"] = *ov.seed;
    if (ov.alpha) j["alpha"] = *ov.alpha;
    if (!j.contains("model")) throw Error(ErrorCode::Config, "model: missing required key");
    if (!j.contains("data")) throw Error(ErrorCode::Config, "data: missing required key");
    if (ov.k) j["model"]["k"] = *ov.k;
    if (ov.threshold) j["data"]["hard_threshold"] = *ov.threshold;

    RunConfig rc;
    rc.train = train_config_from_json(j);
    rc.model = model_config_from_json(j.at("model"));
    rc.data = data_spec_from_json(j.at("data"), path.parent_path());
    if (rc.data.kind == "synthetic" &&
        (rc.data.size != rc.model.vag.input_height || rc.data.size != rc.model.vag.input_width)) {
        throw Error(ErrorCode::Config, "data.size: must equal model.input_size");
    }
    rc.model.vcc.alpha = rc.train.alpha;
    rc.resolved = train_config_to_json(rc.train);
    rc.resolved["model"] = model_config_to_json(rc.model);
    rc.resolved["data"] = data_spec_to_json(rc.data);
    return rc;
}

void ensure_dir(const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw Error(ErrorCode::Io, "cannot create output directory " + dir.string() + ": " + ec.message());
}

void write_text(Manifest& m, const fs::path& root, const std::string& name, const std::string& text) {
    write_file_text(root / name, text);
    m.add(name);
}

void write_bytes(Manifest& m, const fs::path& root, const std::string& name, const std::vector<std::uint8_t>& b) {
    write_file_bytes(root / name, b);
    m.add(name);
}

ModelBundle load_bundle(const fs::path& checkpoint, const RunConfig& rc) {
    ModelBundle bundle = load_checkpoint(checkpoint);
    bundle.vcc.mutable_config().alpha = rc.train.alpha;
    bundle.config.vcc.alpha = rc.train.alpha;
    // k only shapes the graphs, never the parameters, so it can change after training.
    bundle.vag.mutable_config().k = bundle.config.vag.k = rc.model.vag.k;
    bundle.vcc.mutable_config().k = bundle.config.vcc.k = rc.model.vcc.k;
    return bundle;
}

const Sample& pick_sample(const std::vector<Sample>& data, int index) {
    if (index < 0 || index >= static_cast<int>(data.size())) {
        throw Error(ErrorCode::Validation, "sample: index " + std::to_string(index) + " outside [0, " +
                                               std::to_string(static_cast<int>(data.size()) - 1) + "]");
    }
    return data[static_cast<std::size_t>(index)];
}

int cmd_extract(const std::string& traj_file, const fs::path& out_dir, const Overrides& ov, double radius,
                double sigma, std::ostream& out) {
    const nlohmann::json j = [&] {
        const auto bytes = read_file_bytes(traj_file);
        try {
            return nlohmann::json::parse(bytes.begin(), bytes.end());
        } catch (const nlohmann::json::exception& e) {
            throw Error(ErrorCode::Validation, traj_file + ": not valid JSON: " + e.what());
        }
    }();
    const Trajectory traj = trajectory_from_json(j);
    const StayPointSet stays = extract_stay_points(traj, I2MCParams::defaults_for(traj.source));
    AttentionMap soft = render_soft_attention(stays, traj.height, traj.width, {radius, sigma});
    const AttentionMap hard = threshold_hard(soft, ov.threshold.value_or(kDefaultHardThreshold));

    ensure_dir(out_dir);
    Manifest m(out_dir, "extract");
    write_bytes(m, out_dir, "soft.vcca", encode_grid(soft.grid));
    write_bytes(m, out_dir, "hard.vcca", encode_grid(hard.grid));
    nlohmann::json pts = nlohmann::json::array();
    for (const auto& s : stays.points) {
        pts.push_back({{"x", s.x}, {"y", s.y}, {"duration_ms", s.duration_ms}, {"onset_ms", s.onset_ms}});
    }
    const nlohmann::json summary{{"image_id", traj.image_id},
                                 {"source", trace_source_name(traj.source)},
                                 {"stay_point_count", stays.points.size()},
                                 {"stay_points", pts}};
    write_text(m, out_dir, "stay_points.json", summary.dump(2) + "\n");
    m.set_info("stay_point_count", stays.points.size());
    m.write();
    out << nlohmann::json{{"stay_points", stays.points.size()}, {"out", out_dir.string()}}.dump() << "\n";
    return 0;
}

int cmd_init_config(const fs::path& out_file, std::ostream& out) {
    write_file_text(out_file, default_config().dump(2) + "\n");
    out << out_file.string() << "\n";
    return 0;
}

int cmd_train(const RunConfig& rc, const fs::path& out_dir, std::ostream& out) {
    const std::vector<Sample> data = load_samples(rc.data);
    ensure_dir(out_dir);
    TrainResult result = train(rc.train, rc.model, data, [&](const LossRecord& e) {
        out << "epoch " << e.epoch << " total " << e.total << " acc " << e.acc << "\n";
    });
    Manifest m(out_dir, "train");
    write_text(m, out_dir, "config.json", rc.resolved.dump(2) + "\n");
    write_bytes(m, out_dir, "checkpoint.vcck", encode_checkpoint(result.bundle));
    write_text(m, out_dir, "train_log.csv", loss_log_csv(result.epochs));
    write_text(m, out_dir, "step_log.csv", loss_log_csv(result.steps));
    m.set_info("samples", data.size());
    m.set_info("steps", result.steps.size());
    if (!result.steps.empty()) {
        m.set_info("first_total", result.steps.front().total);
        m.set_info("final_total", result.steps.back().total);
    }
    m.write();
    out << m.to_json().dump(2) << "\n";
    return 0;
}

int cmd_eval(const RunConfig& rc, const fs::path& checkpoint, const std::string& split, const Overrides& ov,
             const fs::path& out_dir, std::ostream& out) {
    const ModelBundle bundle = load_bundle(checkpoint, rc);
    const std::vector<Sample> data = load_samples(rc.data, split);
    InferenceOptions opts;
    opts.mode = parse_attention_mode(ov.attention_mode.value_or("generated"));
    opts.seed = rc.train.seed;
    const std::vector<Prediction> preds = predict(bundle, data, opts);
    Matrix probs(static_cast<Eigen::Index>(preds.size()), bundle.config.vcc.num_classes);
    std::vector<int> labels;
    std::ostringstream csv;
    csv.precision(17);
    csv << "id,label,predicted";
    for (int c = 0; c < bundle.config.vcc.num_classes; ++c) csv << ",p" << c;
    csv << "\n";
    for (std::size_t i = 0; i < preds.size(); ++i) {
        labels.push_back(data[i].label);
        csv << data[i].id << ',' << data[i].label << ',' << preds[i].predicted;
        for (std::size_t c = 0; c < preds[i].probs.size(); ++c) {
            probs(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) = preds[i].probs[c];
            csv << ',' << preds[i].probs[c];
        }
        csv << "\n";
    }
    MetricsReport report = compute_metrics(probs, labels);
    report.attention_mode = attention_mode_name(opts.mode);
    nlohmann::json metrics = metrics_to_json(report);
    metrics["split"] = split.empty() ? rc.data.split : split;
    metrics["checkpoint_sha256"] = sha256_file(checkpoint);

    ensure_dir(out_dir);
    Manifest m(out_dir, "eval");
    write_text(m, out_dir, "metrics.json", metrics.dump(2) + "\n");
    write_text(m, out_dir, "predictions.csv", csv.str());
    m.write();
    out << metrics.dump(2) << "\n";
    return 0;
}

int cmd_gradcam(const RunConfig& rc, const fs::path& checkpoint, const std::string& split, int sample, int layer,
                std::optional<int> target, const fs::path& out_dir, std::ostream& out) {
    ModelBundle bundle = load_bundle(checkpoint, rc);
    const std::vector<Sample> data = load_samples(rc.data, split);
    const Sample& s = pick_sample(data, sample);
    const std::vector<Sample> one{s};
    const Prediction pred = predict(bundle, one).front();
    const int cls = target.value_or(pred.predicted);
    const Grid heat = gradcam(bundle, s.image, cls, layer);

    ensure_dir(out_dir);
    Manifest m(out_dir, "gradcam");
    const std::string stem = "gradcam_" + s.id;
    write_bytes(m, out_dir, stem + ".vcca", encode_grid(heat));
    write_bytes(m, out_dir, stem + ".png", encode_png(grid_to_gray8(heat)));
    write_bytes(m, out_dir, stem + "_overlay.png", encode_png(overlay_attention(s.image, heat)));
    m.set_info("sample", s.id);
    m.set_info("target_class", cls);
    m.set_info("layer", layer < 0 ? bundle.vcc.config().stage_count() - 1 : layer);
    m.write();
    out << m.to_json().dump(2) << "\n";
    return 0;
}

int cmd_graphdump(const RunConfig& rc, const fs::path& checkpoint, const std::string& split, int sample, int stage,
                  std::optional<int> node, const fs::path& out_dir, std::ostream& out) {
    const ModelBundle bundle = load_bundle(checkpoint, rc);
    const std::vector<Sample> data = load_samples(rc.data, split);
    const Sample& s = pick_sample(data, sample);
    const int stages = bundle.vcc.config().stage_count();
    if (stage < 0 || stage >= stages) {
        throw Error(ErrorCode::BadLayer, "stage: " + std::to_string(stage) + " is not in [0, " +
                                             std::to_string(stages - 1) + "]");
    }
    ad::NoGradGuard no_grad;
    const Context ctx{false};
    const FeatureMap batch = image_batch({&s.image});
    Grid att = Grid::Zero(s.image.rows(), s.image.cols());
    if (bundle.config.use_vag) att = bundle.vag.forward(batch, ctx).soft_grid(0, batch.height, batch.width);
    const VccForward fwd =
        bundle.vcc.forward(batch, Matrix(Eigen::Map<const Matrix>(att.data(), att.size(), 1)), ctx, true);
    const StageGraph& g = fwd.graphs[static_cast<std::size_t>(stage)][0];
    const int center = node.value_or((g.graph.grid_height / 2) * g.graph.grid_width + g.graph.grid_width / 2);

    ensure_dir(out_dir);
    Manifest m(out_dir, "graphdump");
    const std::string stem = "stage" + std::to_string(stage);
    nlohmann::json dump = graph_dump_json(g.graph, g.state.fused, center);
    dump["sample"] = s.id;
    dump["stage"] = stage;
    dump["align_loss"] = g.state.align_loss_value;
    write_text(m, out_dir, stem + "_graph.json", dump.dump(2) + "\n");
    for (const auto* dm : {&g.state.df_hat, &g.state.da_hat, &g.state.fused}) {
        const std::string name = stem + "_" + distance_space_name(dm->space);
        write_distance_matrix(out_dir / name, *dm);
        m.add(name + ".vcca");
        m.add(name + ".json");
    }
    m.write();
    out << dump.dump(2) << "\n";
    return 0;
}

int cmd_ablate(const RunConfig& rc, const fs::path& out_dir, std::ostream& out) {
    const std::vector<Sample> train_data = load_samples(rc.data, "train");
    const std::vector<Sample> test_data = load_samples(rc.data, "test");
    const auto rows = run_ablation(standard_ablation(rc.train, rc.model), train_data, test_data,
                                   [&](const AblationRow& r) {
                                       out << r.name << " acc " << r.metrics.acc << " auc " << r.metrics.auc
                                           << " f1 " << r.metrics.f1 << "\n";
                                   });
    ensure_dir(out_dir);
    Manifest m(out_dir, "ablate");
    write_text(m, out_dir, "config.json", rc.resolved.dump(2) + "\n");
    write_text(m, out_dir, "ablation.json", ablation_to_json(rows).dump(2) + "\n");
    m.write();
    return 0;
}

int cmd_synth(int n, int size, std::uint64_t seed, const fs::path& out_dir, std::ostream& out) {
    DataSpec spec;
    spec.n = n;
    spec.size = size;
    spec.seed = seed;
    const auto samples = load_samples(spec);
    write_dataset_dir(out_dir, samples);
    Manifest m(out_dir, "synth");
    m.add("dataset.json");
    for (const auto& s : samples) {
        m.add("images/" + s.id + ".vcca");
        m.add("images/" + s.id + ".png");
        m.add("trajectories/" + s.id + ".json");
        if (s.lesion_mask.size() > 0) m.add("masks/" + s.id + ".vcca");
    }
    m.write();
    out << nlohmann::json{{"samples", samples.size()}, {"out", out_dir.string()}}.dump() << "\n";
    return 0;
}

HttpService* g_service = nullptr;

extern "C" void stop_service(int) {
    if (g_service) g_service->stop();
}

int cmd_serve(const fs::path& store_dir, const fs::path& images, const std::string& host, int port,
              double radius, double sigma, const Overrides& ov, std::ostream& out) {
    ProcessingParams params;
    params.render = {radius, sigma};
    params.hard_threshold = ov.threshold.value_or(kDefaultHardThreshold);
    if (!(params.hard_threshold > 0.0 && params.hard_threshold < 1.0)) {
        throw Error(ErrorCode::BadThreshold, "threshold: must lie in (0, 1)");
    }
    SessionStore store(store_dir, params);
    ServiceRouter router(store, images);
    HttpService service(router);
    const int bound = service.bind(host, port);
    out << nlohmann::json{{"listening", host + ":" + std::to_string(bound)}}.dump() << std::endl;
    g_service = &service;
    std::signal(SIGINT, stop_service);
    std::signal(SIGTERM, stop_service);
    service.run();
    g_service = nullptr;
    return 0;
}

int exit_code_for(ErrorCode code) { return code == ErrorCode::Io ? 1 : 2; }

void print_error(std::ostream& err, ErrorCode code, const std::string& message) {
    err << nlohmann::json{{"error", {{"code", error_code_name(code)}, {"message", message}}}}.dump() << "\n";
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"vccnet: trace-to-attention pipeline, training and ingestion service"};
    app.require_subcommand(1);

    std::string config_path;
    std::string out_dir = "out";
    std::string checkpoint;
    std::string split;
    Overrides ov;
    std::uint64_t seed = 0;
    double alpha = 0.0;
    int k = 0;
    double threshold = 0.0;
    std::string attention_mode = "generated";

    const auto common = [&](CLI::App* sub, bool needs_config) {
        auto* c = sub->add_option("--config", config_path, "JSON configuration file");
        if (needs_config) c->required();
        sub->add_option("--out", out_dir, "output directory");
        sub->add_option("--seed", seed, "override the training seed");
        sub->add_option("--alpha", alpha, "override the fusion weight alpha");
        sub->add_option("--k", k, "override the neighbour count");
        sub->add_option("--threshold", threshold, "override the hard-attention threshold");
    };

    std::string traj_file;
    double radius = 150.0;
    double sigma = 25.0;
    auto* extract = app.add_subcommand("extract", "stay points and attention maps from a trajectory JSON");
    extract->add_option("trajectory", traj_file, "trajectory JSON file")->required();
    extract->add_option("--out", out_dir, "output directory");
    extract->add_option("--threshold", threshold, "hard-attention threshold");
    extract->add_option("--radius", radius, "Gaussian truncation radius in px");
    extract->add_option("--sigma", sigma, "Gaussian sigma in px");

    std::string init_out = "config.json";
    auto* init = app.add_subcommand("init-config", "write a configuration with every default filled in");
    init->add_option("--out", init_out, "configuration file to write");

    auto* train_cmd = app.add_subcommand("train", "train generator and classifier jointly");
    common(train_cmd, true);

    auto* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint");
    common(eval_cmd, true);
    eval_cmd->add_option("--checkpoint", checkpoint, "checkpoint file")->required();
    eval_cmd->add_option("--split", split, "all, train, validation or test");
    eval_cmd->add_option("--attention-mode", attention_mode, "generated, radiologist, fused or random");

    int sample = 0;
    int layer = -1;
    int target = -1;
    auto* cam_cmd = app.add_subcommand("gradcam", "Grad-CAM heat map for one sample");
    common(cam_cmd, true);
    cam_cmd->add_option("--checkpoint", checkpoint, "checkpoint file")->required();
    cam_cmd->add_option("--split", split, "all, train, validation or test");
    cam_cmd->add_option("--sample", sample, "sample index within the split");
    cam_cmd->add_option("--layer", layer, "classifier stage, -1 for the deepest");
    cam_cmd->add_option("--class", target, "target class, -1 for the predicted class");

    int stage = 0;
    int node = -1;
    auto* graph_cmd = app.add_subcommand("graphdump", "dump a classifier stage graph and its distance matrices");
    common(graph_cmd, true);
    graph_cmd->add_option("--checkpoint", checkpoint, "checkpoint file")->required();
    graph_cmd->add_option("--split", split, "all, train, validation or test");
    graph_cmd->add_option("--sample", sample, "sample index within the split");
    graph_cmd->add_option("--stage", stage, "classifier stage");
    graph_cmd->add_option("--node", node, "center node, -1 for the grid center");

    auto* ablate_cmd = app.add_subcommand("ablate", "train and evaluate the standard ablation variants");
    common(ablate_cmd, true);

    int synth_n = 16;
    int synth_size = 64;
    std::uint64_t synth_seed = 11;
    auto* synth_cmd = app.add_subcommand("synth", "write a synthetic dataset directory");
    synth_cmd->add_option("--out", out_dir, "output directory");
    synth_cmd->add_option("--n", synth_n, "sample count");
    synth_cmd->add_option("--size", synth_size, "image side in px");
    synth_cmd->add_option("--seed", synth_seed, "generator seed");

    std::string store_dir = "store";
    std::string images_dir;
    std::string host = "127.0.0.1";
    int port = 8080;
    auto* serve_cmd = app.add_subcommand("serve", "run the ingestion service");
    serve_cmd->add_option("--store", store_dir, "session store directory");
    serve_cmd->add_option("--images", images_dir, "directory of <image_id>.png / .vcca base images");
    serve_cmd->add_option("--host", host, "bind address");
    serve_cmd->add_option("--port", port, "port, 0 for any free port");
    serve_cmd->add_option("--radius", radius, "Gaussian truncation radius in px");
    serve_cmd->add_option("--sigma", sigma, "Gaussian sigma in px");
    serve_cmd->add_option("--threshold", threshold, "hard-attention threshold");

    std::vector<std::string> reversed(args.rbegin(), args.rend() - (args.empty() ? 0 : 1));
    try {
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return 0;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help();
        return 0;
    } catch (const CLI::ParseError& e) {
        print_error(err, ErrorCode::Config, e.what());
        return 2;
    }

    const auto given = [](CLI::App* sub, const char* name) {
        const CLI::Option* opt = sub->get_option_no_throw(name);
        return opt != nullptr && opt->count() > 0;
    };
    try {
        CLI::App* sub = app.get_subcommands().front();
        if (given(sub, "--seed")) ov.seed = seed;
        if (given(sub, "--alpha")) ov.alpha = alpha;
        if (given(sub, "--k")) ov.k = k;
        if (given(sub, "--threshold")) ov.threshold = threshold;
        if (sub == eval_cmd) ov.attention_mode = attention_mode;

        if (sub == extract) return cmd_extract(traj_file, out_dir, ov, radius, sigma, out);
        if (sub == init) return cmd_init_config(init_out, out);
        if (sub == synth_cmd) return cmd_synth(synth_n, synth_size, synth_seed, out_dir, out);
        if (sub == serve_cmd) return cmd_serve(store_dir, images_dir, host, port, radius, sigma, ov, out);

        const RunConfig rc = load_config(config_path, ov);
        if (sub == train_cmd) return cmd_train(rc, out_dir, out);
        if (sub == eval_cmd) return cmd_eval(rc, checkpoint, split, ov, out_dir, out);
        if (sub == cam_cmd) {
            return cmd_gradcam(rc, checkpoint, split, sample, layer,
                               target < 0 ? std::nullopt : std::optional<int>(target), out_dir, out);
        }
        if (sub == graph_cmd) {
            return cmd_graphdump(rc, checkpoint, split, sample, stage,
                                 node < 0 ? std::nullopt : std::optional<int>(node), out_dir, out);
        }
        if (sub == ablate_cmd) return cmd_ablate(rc, out_dir, out);
    } catch (const Error& e) {
        print_error(err, e.code(), e.what());
        return exit_code_for(e.code());
    } catch (const fs::filesystem_error& e) {
        print_error(err, ErrorCode::Io, e.what());
        return 1;
    } catch (const std::exception& e) {
        print_error(err, ErrorCode::Validation, e.what());
        return 2;
    }
    return 2;
}

}  // namespace vccnet::cli
