#ifndef VCCNET_CHECKPOINT_HPP
#define VCCNET_CHECKPOINT_HPP

// Checkpoint archive:
//   "VCCK", u32 version (1), u32 header length, header JSON (UTF-8), then for
//   every entry in header["entries"]: u64 length and one VCCA grid blob.
// The header holds the model configuration under "model" and the entries
// as {"name", "kind": "parameter"|"buffer", "rows", "cols"} in file order.
// Entry names are the ParamStore names, e.g. "vag.stem.full.conv.weight",
// "vcc.stage3.gnn0.fc1.bias", "vcc.stem.full.bn.running_mean". Values are
// stored as float32.

#include "vccnet/training.hpp"

#include <filesystem>
#include <vector>

namespace vccnet {

std::vector<std::uint8_t> encode_checkpoint(const ModelBundle& bundle);
/// Throws Error(Validation) on a malformed archive or a missing/misshaped entry.
ModelBundle decode_checkpoint(const std::vector<std::uint8_t>& bytes);

void save_checkpoint(const std::filesystem::path& path, const ModelBundle& bundle);
ModelBundle load_checkpoint(const std::filesystem::path& path);

}  // namespace vccnet

#endif  // VCCNET_CHECKPOINT_HPP
