#ifndef VCCNET_GRID_IO_HPP
#define VCCNET_GRID_IO_HPP

// "VCCA" binary grid: magic, u32 H, u32 W (little-endian), then H*W
// little-endian float32 values in row-major order.

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace vccnet {

using Grid = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

std::vector<std::uint8_t> encode_grid(const Grid& grid);
Grid decode_grid(const std::uint8_t* data, std::size_t size);
inline Grid decode_grid(const std::vector<std::uint8_t>& bytes) {
    return decode_grid(bytes.data(), bytes.size());
}

void write_grid(const std::filesystem::path& path, const Grid& grid);
Grid read_grid(const std::filesystem::path& path);

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path);
void write_file_bytes(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes);
void write_file_text(const std::filesystem::path& path, const std::string& text);

}  // namespace vccnet

#endif  // VCCNET_GRID_IO_HPP
