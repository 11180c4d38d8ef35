#include "cli.hpp"
#include "support.hpp"
#include "vccnet/grid_io.hpp"
#include "vccnet/manifest.hpp"

#include <doctest.h>
#include <nlohmann/json.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <sys/wait.h>

using namespace vccnet;
namespace fs = std::filesystem;

namespace {

struct Result {
    int code;
    std::string out, err;
};

Result run(std::vector<std::string> args) {
    args.insert(args.begin(), "vccnet");
    std::ostringstream out, err;
    const int code = cli::run(args, out, err);
    return {code, out.str(), err.str()};
}

fs::path scratch(const std::string& name) {
    auto p = fs::temp_directory_path() / ("vccnet_cli_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

nlohmann::json read_json(const fs::path& p) {
    std::ifstream in(p);
    return nlohmann::json::parse(in);
}

void write_json(const fs::path& p, const nlohmann::json& j) { std::ofstream(p) << j.dump(2); }

/// init-config output shrunk to a 32 px model and an 8-sample set.
fs::path small_config(const fs::path& dir, int epochs = 1) {
    const fs::path cfg = dir / "config.json";
    REQUIRE(run({"init-config", "--out", cfg.string()}).code == 0);
    auto j = read_json(cfg);
    j["epochs"] = epochs;
    j["batch_size"] = 4;
    j["lr"] = 1e-3;
    j["model"]["input_size"] = {32, 32};
    j["model"]["stem_channels"] = 8;
    j["model"]["k"] = 4;
    j["data"]["n"] = 8;
    j["data"]["size"] = 32;
    write_json(cfg, j);
    return cfg;
}

int run_binary(const std::string& args, const fs::path& err_file) {
    const std::string cmd = std::string(VCCNET_BINARY) + " " + args + " >/dev/null 2>" + err_file.string();
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p);
    return {std::istreambuf_iterator<char>(in), {}};
}

}  // namespace

TEST_CASE("extract: two dwells, empty trajectory and unreadable path") {
    const auto dir = scratch("extract");
    write_json(dir / "t.json", trajectory_to_json(testutil::two_dwell_trajectory()));
    const auto ok = run({"extract", (dir / "t.json").string(), "--out", (dir / "out").string()});
    REQUIRE(ok.code == 0);
    CHECK(nlohmann::json::parse(ok.out)["stay_points"] == 2);
    const Grid soft = read_grid(dir / "out" / "soft.vcca");
    CHECK(soft.rows() == 300);
    CHECK(soft.cols() == 400);
    CHECK(fs::exists(dir / "out" / "hard.vcca"));
    CHECK(read_json(dir / "out" / "stay_points.json")["stay_points"].size() == 2);
    CHECK(verify_manifest(dir / "out" / "manifest.json").empty());

    auto empty = trajectory_to_json(testutil::two_dwell_trajectory());
    empty["points"] = nlohmann::json::array();
    write_json(dir / "empty.json", empty);
    const auto e = run({"extract", (dir / "empty.json").string(), "--out", (dir / "o2").string()});
    CHECK(e.code == 2);
    CHECK(nlohmann::json::parse(e.err)["error"]["code"] == "EMPTY_TRAJECTORY");

    const auto io = run({"extract", (dir / "nope.json").string()});
    CHECK(io.code == 1);
    CHECK(nlohmann::json::parse(io.err)["error"]["code"] == "IO");

    auto bad = trajectory_to_json(testutil::two_dwell_trajectory());
    bad["points"][5]["t"] = 0;
    write_json(dir / "bad.json", bad);
    const auto v = run({"extract", (dir / "bad.json").string(), "--out", (dir / "o3").string()});
    CHECK(v.code == 2);
    CHECK(nlohmann::json::parse(v.err)["error"]["code"] == "VALIDATION");
    CHECK(nlohmann::json::parse(v.err)["error"]["message"].get<std::string>().find("points[5]") != std::string::npos);

    CHECK(run({"extract", (dir / "t.json").string(), "--out", (dir / "o4").string(), "--threshold", "1.5"}).code == 2);
}

TEST_CASE("config errors name the key and exit 2") {
    const auto dir = scratch("config");
    const auto cfg = small_config(dir);
    auto j = read_json(cfg);
    j.erase("lr");
    write_json(dir / "nolr.json", j);
    const auto r = run({"train", "--config", (dir / "nolr.json").string(), "--out", (dir / "o").string()});
    CHECK(r.code == 2);
    const auto err = nlohmann::json::parse(r.err);
    CHECK(err["error"]["code"] == "CONFIG");
    CHECK(err["error"]["message"].get<std::string>().find("lr") != std::string::npos);

    std::ofstream(dir / "broken.json") << "{";
    CHECK(run({"train", "--config", (dir / "broken.json").string()}).code == 2);
    CHECK(run({"train"}).code == 2);
    CHECK(run({"frobnicate"}).code == 2);
    CHECK(run({"train", "--config", (dir / "absent.json").string()}).code == 1);
}

TEST_CASE("train, eval, gradcam and graphdump produce verifiable manifests") {
    const auto dir = scratch("pipeline");
    const auto cfg = small_config(dir);
    const auto out_a = dir / "a", out_b = dir / "b";
    REQUIRE(run({"train", "--config", cfg.string(), "--out", out_a.string()}).code == 0);
    REQUIRE(run({"train", "--config", cfg.string(), "--out", out_b.string()}).code == 0);
    const auto ma = read_json(out_a / "manifest.json");
    const auto mb = read_json(out_b / "manifest.json");
    CHECK(ma["command"] == "train");
    std::vector<std::string> files;
    for (const auto& f : ma["files"]) files.push_back(f["path"]);
    CHECK(std::find(files.begin(), files.end(), "checkpoint.vcck") != files.end());
    CHECK(std::find(files.begin(), files.end(), "train_log.csv") != files.end());
    CHECK(ma["files"] == mb["files"]);
    CHECK(verify_manifest(out_a / "manifest.json").empty());

    const auto seeded = run({"train", "--config", cfg.string(), "--out", (dir / "c").string(), "--seed", "123"});
    REQUIRE(seeded.code == 0);
    CHECK(read_json(dir / "c" / "manifest.json")["files"] != ma["files"]);

    const std::string ckpt = (out_a / "checkpoint.vcck").string();
    const auto ev = run({"eval", "--config", cfg.string(), "--checkpoint", ckpt, "--out", (dir / "eval").string()});
    REQUIRE(ev.code == 0);
    const auto metrics = read_json(dir / "eval" / "metrics.json");
    CHECK(metrics["acc"].get<double>() >= 0.0);
    CHECK(metrics["total"] == 8);
    CHECK(metrics["attention_mode"] == "generated");
    CHECK(fs::exists(dir / "eval" / "predictions.csv"));

    const auto rnd = run({"eval", "--config", cfg.string(), "--checkpoint", ckpt, "--out", (dir / "eval_r").string(),
                          "--attention-mode", "random"});
    REQUIRE(rnd.code == 0);
    CHECK(read_json(dir / "eval_r" / "metrics.json")["attention_mode"] == "random");
    CHECK(run({"eval", "--config", cfg.string(), "--checkpoint", ckpt, "--attention-mode", "psychic"}).code == 2);

    const auto cam = run({"gradcam", "--config", cfg.string(), "--checkpoint", ckpt, "--out", (dir / "cam").string()});
    REQUIRE(cam.code == 0);
    CHECK(verify_manifest(dir / "cam" / "manifest.json").empty());
    const auto bad_layer =
        run({"gradcam", "--config", cfg.string(), "--checkpoint", ckpt, "--layer", "9", "--out", (dir / "cam2").string()});
    CHECK(bad_layer.code == 2);
    CHECK(nlohmann::json::parse(bad_layer.err)["error"]["code"] == "BAD_LAYER");

    const auto gd = run({"graphdump", "--config", cfg.string(), "--checkpoint", ckpt, "--out", (dir / "graph").string()});
    REQUIRE(gd.code == 0);
    const auto dump = nlohmann::json::parse(gd.out);
    CHECK(dump.contains("center_node"));
    CHECK(dump["neighbors"].size() == 4);
    CHECK(dump["grid_shape"] == nlohmann::json::array({8, 8}));
    CHECK(verify_manifest(dir / "graph" / "manifest.json").empty());

    CHECK(run({"eval", "--config", cfg.string(), "--checkpoint", (dir / "none.vcck").string()}).code == 1);
}

TEST_CASE("synth writes a dataset directory a config can point at") {
    const auto dir = scratch("synth");
    const auto r = run({"synth", "--out", (dir / "data").string(), "--n", "4", "--size", "32", "--seed", "3"});
    REQUIRE(r.code == 0);
    CHECK(read_json(dir / "data" / "dataset.json")["samples"].size() == 4);
    CHECK(verify_manifest(dir / "data" / "manifest.json").empty());

    const auto cfg = small_config(dir);
    auto j = read_json(cfg);
    j["data"] = {{"kind", "directory"}, {"path", "data"}};
    write_json(cfg, j);
    CHECK(run({"train", "--config", cfg.string(), "--out", (dir / "t").string()}).code == 0);
}

TEST_CASE("init-config contains every training key at its default") {
    const auto dir = scratch("init");
    REQUIRE(run({"init-config", "--out", (dir / "c.json").string()}).code == 0);
    const auto j = read_json(dir / "c.json");
    CHECK(j["lr"] == 2e-4);
    CHECK(j["batch_size"] == 8);
    CHECK(j["epochs"] == 200);
    CHECK(j["lambda_align"] == 0.5);
    CHECK(j["lambda_vag"] == 0.5);
    CHECK(j["alpha"] == 2.0);
    CHECK(j["optimizer"] == "adam");
    CHECK(j.contains("seed"));
    CHECK(j.contains("model"));
    CHECK(j.contains("data"));
}

TEST_CASE("the installed binary maps failures to exit codes") {
    const auto dir = scratch("binary");
    auto empty = trajectory_to_json(testutil::two_dwell_trajectory());
    empty["points"] = nlohmann::json::array();
    write_json(dir / "empty.json", empty);
    write_json(dir / "ok.json", trajectory_to_json(testutil::two_dwell_trajectory()));
    CHECK(run_binary("extract " + (dir / "ok.json").string() + " --out " + (dir / "o").string(), dir / "e0") == 0);
    CHECK(run_binary("extract " + (dir / "empty.json").string(), dir / "e1") == 2);
    CHECK(slurp(dir / "e1").find("EMPTY_TRAJECTORY") != std::string::npos);
    CHECK(run_binary("extract " + (dir / "missing.json").string(), dir / "e2") == 1);
    CHECK(slurp(dir / "e2").find("\"IO\"") != std::string::npos);
    CHECK(run_binary("--help", dir / "e3") == 0);
}
