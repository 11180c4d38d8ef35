#include "vccnet/grid_io.hpp"

#include "vccnet/errors.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

namespace vccnet {

namespace {

constexpr char kMagic[4] = {'V', 'C', 'C', 'A'};

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) {
        out.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xFFu));
    }
}

std::uint32_t get_u32(const std::uint8_t* p) {
    return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
           (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

}  // namespace

std::vector<std::uint8_t> encode_grid(const Grid& grid) {
    std::vector<std::uint8_t> out;
    out.reserve(12 + static_cast<std::size_t>(grid.size()) * 4);
    out.insert(out.end(), std::begin(kMagic), std::end(kMagic));
    put_u32(out, static_cast<std::uint32_t>(grid.rows()));
    put_u32(out, static_cast<std::uint32_t>(grid.cols()));
    for (Eigen::Index r = 0; r < grid.rows(); ++r) {
        for (Eigen::Index c = 0; c < grid.cols(); ++c) {
            put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(grid(r, c))));
        }
    }
    return out;
}

Grid decode_grid(const std::uint8_t* data, std::size_t size) {
    if (size < 12 || std::memcmp(data, kMagic, 4) != 0) {
        throw Error(ErrorCode::Validation, "grid: missing VCCA header");
    }
    const std::uint32_t h = get_u32(data + 4);
    const std::uint32_t w = get_u32(data + 8);
    const std::size_t expected = 12 + static_cast<std::size_t>(h) * w * 4;
    if (size != expected) {
        throw Error(ErrorCode::Validation, "grid: payload size does not match header");
    }
    Grid grid(h, w);
    const std::uint8_t* p = data + 12;
    for (std::uint32_t r = 0; r < h; ++r) {
        for (std::uint32_t c = 0; c < w; ++c, p += 4) {
            grid(r, c) = std::bit_cast<float>(get_u32(p));
        }
    }
    return grid;
}

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error(ErrorCode::Io, "cannot open " + path.string());
    }
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file_bytes(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw Error(ErrorCode::Io, "cannot write " + path.string());
    }
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) {
        throw Error(ErrorCode::Io, "short write to " + path.string());
    }
}

void write_file_text(const std::filesystem::path& path, const std::string& text) {
    write_file_bytes(path, std::vector<std::uint8_t>(text.begin(), text.end()));
}

void write_grid(const std::filesystem::path& path, const Grid& grid) {
    write_file_bytes(path, encode_grid(grid));
}

Grid read_grid(const std::filesystem::path& path) { return decode_grid(read_file_bytes(path)); }

}  // namespace vccnet
