#include "vccnet/dataset.hpp"

#include "vccnet/imaging.hpp"

namespace vccnet {

namespace fs = std::filesystem;

namespace {

const nlohmann::json& need(const nlohmann::json& j, const std::string& key, const char* what) {
    if (!j.contains(key)) throw Error(ErrorCode::Config, "data." + key + ": missing required key");
    const auto& v = j.at(key);
    const std::string type = what;
    const bool ok = (type == "integer" && v.is_number_integer()) || (type == "number" && v.is_number()) ||
                    (type == "string" && v.is_string());
    if (!ok) throw Error(ErrorCode::Config, "data." + key + ": must be a " + type);
    return v;
}

nlohmann::json parse_json_file(const fs::path& p) {
    const auto bytes = read_file_bytes(p);
    try {
        return nlohmann::json::parse(bytes.begin(), bytes.end());
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::Validation, p.string() + ": " + e.what());
    }
}

Grid load_image_file(const fs::path& p) {
    if (p.extension() == ".png") return decode_png_grid(read_file_bytes(p));
    return read_grid(p);
}

}  // namespace

DataSpec data_spec_from_json(const nlohmann::json& j, const fs::path& base_dir) {
    if (!j.is_object()) throw Error(ErrorCode::Config, "data: expected an object");
    DataSpec spec;
    spec.kind = need(j, "kind", "string").get<std::string>();
    if (spec.kind == "synthetic") {
        spec.n = need(j, "n", "integer").get<int>();
        spec.size = need(j, "size", "integer").get<int>();
        spec.seed = need(j, "seed", "integer").get<std::uint64_t>();
        if (spec.n < 1) throw Error(ErrorCode::Config, "data.n: must be >= 1");
        if (spec.size < 32 || spec.size % 32 != 0) throw Error(ErrorCode::Config, "data.size: must be a multiple of 32");
    } else if (spec.kind == "directory") {
        spec.path = need(j, "path", "string").get<std::string>();
        if (spec.path.is_relative() && !base_dir.empty()) spec.path = base_dir / spec.path;
        spec.render = RenderParams{};
        if (j.contains("seed")) spec.seed = need(j, "seed", "integer").get<std::uint64_t>();
    } else {
        throw Error(ErrorCode::Config, "data.kind: expected \"synthetic\" or \"directory\"");
    }
    if (j.contains("split")) spec.split = need(j, "split", "string").get<std::string>();
    if (spec.split != "all" && spec.split != "train" && spec.split != "validation" && spec.split != "test") {
        throw Error(ErrorCode::Config, "data.split: expected all, train, validation or test");
    }
    if (j.contains("render")) {
        const auto& r = j.at("render");
        spec.render.radius_px = need(r, "radius_px", "number").get<double>();
        spec.render.sigma_px = need(r, "sigma_px", "number").get<double>();
        if (!(spec.render.radius_px > 0) || !(spec.render.sigma_px > 0)) {
            throw Error(ErrorCode::Config, "data.render: radius_px and sigma_px must be positive");
        }
    }
    if (j.contains("hard_threshold")) {
        spec.hard_threshold = need(j, "hard_threshold", "number").get<double>();
        if (!(spec.hard_threshold > 0.0 && spec.hard_threshold < 1.0)) {
            throw Error(ErrorCode::Config, "data.hard_threshold: must lie in (0, 1)");
        }
    }
    return spec;
}

nlohmann::json data_spec_to_json(const DataSpec& spec) {
    nlohmann::json j{{"kind", spec.kind},
                     {"seed", spec.seed},
                     {"split", spec.split},
                     {"render", {{"radius_px", spec.render.radius_px}, {"sigma_px", spec.render.sigma_px}}},
                     {"hard_threshold", spec.hard_threshold}};
    if (spec.kind == "synthetic") {
        j["n"] = spec.n;
        j["size"] = spec.size;
    } else {
        j["path"] = spec.path.string();
    }
    return j;
}

std::vector<Sample> load_samples(const DataSpec& spec, const std::string& split_override) {
    std::vector<Sample> all;
    if (spec.kind == "synthetic") {
        SyntheticConfig cfg;
        cfg.render = spec.render;
        cfg.hard_threshold = spec.hard_threshold;
        all = make_synthetic_dataset(spec.n, spec.size, spec.seed, cfg);
    } else {
        all = read_dataset_dir(spec.path, spec.render, spec.hard_threshold);
    }
    const std::string split = split_override.empty() ? spec.split : split_override;
    if (split == "all") return all;
    DatasetSplit parts = split_dataset(std::move(all), spec.seed);
    if (split == "train") return std::move(parts.train);
    if (split == "validation") return std::move(parts.validation);
    if (split == "test") return std::move(parts.test);
    throw Error(ErrorCode::Config, "split: expected all, train, validation or test");
}

void write_dataset_dir(const fs::path& dir, std::span<const Sample> samples) {
    fs::create_directories(dir / "images");
    fs::create_directories(dir / "trajectories");
    fs::create_directories(dir / "masks");
    nlohmann::json list = nlohmann::json::array();
    for (const auto& s : samples) {
        write_grid(dir / "images" / (s.id + ".vcca"), s.image);
        write_file_bytes(dir / "images" / (s.id + ".png"), encode_png(grid_to_gray8(s.image)));
        write_file_text(dir / "trajectories" / (s.id + ".json"), trajectory_to_json(s.trajectory).dump() + "\n");
        nlohmann::json entry{{"id", s.id},
                             {"image", "images/" + s.id + ".vcca"},
                             {"trajectory", "trajectories/" + s.id + ".json"},
                             {"label", s.label}};
        if (s.lesion_mask.size() > 0) {
            write_grid(dir / "masks" / (s.id + ".vcca"), s.lesion_mask);
            entry["mask"] = "masks/" + s.id + ".vcca";
        }
        list.push_back(std::move(entry));
    }
    write_file_text(dir / "dataset.json", nlohmann::json{{"samples", list}}.dump(2) + "\n");
}

std::vector<Sample> read_dataset_dir(const fs::path& dir, const RenderParams& render, double hard_threshold) {
    const nlohmann::json index = parse_json_file(dir / "dataset.json");
    if (!index.contains("samples") || !index.at("samples").is_array()) {
        throw Error(ErrorCode::Validation, "dataset.json: expected {\"samples\": [...]}");
    }
    std::vector<Sample> out;
    const auto& list = index.at("samples");
    for (std::size_t i = 0; i < list.size(); ++i) {
        const auto& e = list[i];
        const std::string where = "dataset.json samples[" + std::to_string(i) + "]";
        for (const char* key : {"id", "image", "trajectory"}) {
            if (!e.contains(key) || !e.at(key).is_string()) {
                throw Error(ErrorCode::Validation, where + "." + key + ": required string");
            }
        }
        if (!e.contains("label") || !e.at("label").is_number_integer()) {
            throw Error(ErrorCode::Validation, where + ".label: required integer");
        }
        Sample s;
        s.id = e.at("id").get<std::string>();
        s.image = load_image_file(dir / e.at("image").get<std::string>());
        s.trajectory = trajectory_from_json(parse_json_file(dir / e.at("trajectory").get<std::string>()));
        s.label = e.at("label").get<int>();
        if (e.contains("mask")) s.lesion_mask = read_grid(dir / e.at("mask").get<std::string>());
        SyntheticConfig cfg;
        cfg.render = render;
        cfg.hard_threshold = hard_threshold;
        cfg.fixation = s.image.rows() <= 128 ? SyntheticConfig::small_image_fixation_params()
                                             : I2MCParams::defaults_for(s.trajectory.source);
        derive_attention(s, cfg);
        out.push_back(std::move(s));
    }
    return out;
}

}  // namespace vccnet
