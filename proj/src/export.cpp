#include "vccnet/export.hpp"

#include "vccnet/grid_io.hpp"

#include <fstream>

namespace vccnet {

nlohmann::json graph_dump_json(const PatchGraph<double>& graph, const DistanceMatrix<double>& distances,
                               int center_node) {
    const auto n = static_cast<int>(graph.neighbors.size());
    if (center_node < 0 || center_node >= n) {
        throw Error(ErrorCode::Validation, "graph dump: center node " + std::to_string(center_node) +
                                               " outside [0, " + std::to_string(n - 1) + "]");
    }
    if (distances.values.rows() != n || distances.values.cols() != n) {
        throw Error(ErrorCode::ShapeMismatch, "graph dump: distance matrix does not match the graph");
    }
    nlohmann::json neighbors = nlohmann::json::array();
    for (int j : graph.neighbors[static_cast<std::size_t>(center_node)]) {
        neighbors.push_back({j, distances.values(center_node, j)});
    }
    return {{"center_node", center_node},
            {"neighbors", neighbors},
            {"grid_shape", {graph.grid_height, graph.grid_width}},
            {"k", graph.k},
            {"space", distance_space_name(distances.space)}};
}

void write_distance_matrix(const std::filesystem::path& stem, const DistanceMatrix<double>& matrix) {
    std::filesystem::path grid_path = stem;
    grid_path += ".vcca";
    std::filesystem::path meta_path = stem;
    meta_path += ".json";
    write_grid(grid_path, Grid(matrix.values));
    const nlohmann::json meta{{"space", distance_space_name(matrix.space)},
                              {"rows", matrix.values.rows()},
                              {"cols", matrix.values.cols()},
                              {"grid", grid_path.filename().string()}};
    write_file_text(meta_path, meta.dump(2) + "\n");
}

DistanceMatrix<double> read_distance_matrix(const std::filesystem::path& stem) {
    std::filesystem::path meta_path = stem;
    meta_path += ".json";
    const auto bytes = read_file_bytes(meta_path);
    nlohmann::json meta;
    try {
        meta = nlohmann::json::parse(bytes.begin(), bytes.end());
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::Validation, std::string("distance sidecar: ") + e.what());
    }
    if (!meta.contains("space") || !meta.contains("grid")) {
        throw Error(ErrorCode::Validation, "distance sidecar: space and grid are required");
    }
    const Grid g = read_grid(stem.parent_path() / meta.at("grid").get<std::string>());
    return {g, parse_distance_space(meta.at("space").get<std::string>())};
}

}  // namespace vccnet
