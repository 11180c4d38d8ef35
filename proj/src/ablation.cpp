#include "vccnet/ablation.hpp"

#include <map>

namespace vccnet {

std::vector<AblationVariant> standard_ablation(const TrainConfig& train, const ModelConfig& model) {
    std::vector<AblationVariant> out;
    const auto add = [&](std::string name, auto&& edit) {
        AblationVariant v{std::move(name), train, model, AttentionMode::generated};
        edit(v);
        out.push_back(std::move(v));
    };
    add("full", [](AblationVariant&) {});
    add("no_soft", [](AblationVariant& v) { v.train.losses.soft = false; });
    add("no_hard", [](AblationVariant& v) { v.train.losses.hard = false; });
    add("no_aux", [](AblationVariant& v) { v.train.losses.aux = false; });
    add("no_align", [](AblationVariant& v) { v.train.losses.align = false; });
    add("backbone_cnn_only", [](AblationVariant& v) { v.model.vag.backbone = VagBackbone::cnn_only; });
    add("backbone_gnn_only", [](AblationVariant& v) { v.model.vag.backbone = VagBackbone::gnn_only; });
    add("no_vag", [](AblationVariant& v) { v.model.use_vag = false; });
    add("attention_random", [](AblationVariant& v) { v.mode = AttentionMode::random; });
    add("attention_radiologist", [](AblationVariant& v) { v.mode = AttentionMode::radiologist; });
    add("attention_fused", [](AblationVariant& v) { v.mode = AttentionMode::fused; });
    return out;
}

std::vector<AblationRow> run_ablation(const std::vector<AblationVariant>& variants,
                                      std::span<const Sample> train_data, std::span<const Sample> test_data,
                                      const std::function<void(const AblationRow&)>& on_row) {
    std::map<std::string, ModelBundle> trained;
    std::vector<AblationRow> rows;
    for (const auto& v : variants) {
        const std::string key =
            nlohmann::json{{"train", train_config_to_json(v.train)}, {"model", model_config_to_json(v.model)}}.dump();
        auto it = trained.find(key);
        if (it == trained.end()) {
            it = trained.emplace(key, train(v.train, v.model, train_data).bundle).first;
        }
        InferenceOptions opts;
        opts.mode = v.mode;
        opts.seed = v.train.seed;
        AblationRow row{v.name, evaluate(it->second, test_data, opts)};
        if (on_row) on_row(row);
        rows.push_back(std::move(row));
    }
    return rows;
}

nlohmann::json ablation_to_json(const std::vector<AblationRow>& rows) {
    nlohmann::json out = nlohmann::json::array();
    for (const auto& r : rows) {
        nlohmann::json j = metrics_to_json(r.metrics);
        j["variant"] = r.name;
        out.push_back(std::move(j));
    }
    return out;
}

}  // namespace vccnet
