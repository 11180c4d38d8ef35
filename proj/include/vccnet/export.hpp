#ifndef VCCNET_EXPORT_HPP
#define VCCNET_EXPORT_HPP

// Debug and visualisation dumps of classifier graphs and distance matrices.

#include "vccnet/vcc.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>

namespace vccnet {

/// {"center_node", "neighbors": [[index, distance], ...], "grid_shape": [h, w]}
/// with distances read from `distances` (normally the fused matrix).
nlohmann::json graph_dump_json(const PatchGraph<double>& graph, const DistanceMatrix<double>& distances,
                               int center_node);

/// Writes `stem`.vcca (the matrix as a VCCA grid) and `stem`.json holding
/// {"space", "rows", "cols", "grid"} where grid names the .vcca file.
void write_distance_matrix(const std::filesystem::path& stem, const DistanceMatrix<double>& matrix);
DistanceMatrix<double> read_distance_matrix(const std::filesystem::path& stem);

}  // namespace vccnet

#endif  // VCCNET_EXPORT_HPP
