#ifndef VCCNET_IMAGING_HPP
#define VCCNET_IMAGING_HPP

// PNG encode/decode and the attention overlay used by the review endpoint.
//
// Overlay colormap ("hot"): for a soft value v in [0, 1]
//   r = clamp(3v), g = clamp(3v - 1), b = clamp(3v - 2)      (scaled to 0..255)
// and each output channel is base * (1 - a*v) + colour * a*v with a = 0.6,
// so a zero map reproduces the grayscale base exactly.

#include "vccnet/grid_io.hpp"

#include <array>
#include <cstdint>
#include <vector>

namespace vccnet {

struct Image8 {
    int width = 0;
    int height = 0;
    int channels = 1;  // 1 (gray) or 3 (RGB)
    std::vector<std::uint8_t> pixels;  // row-major, interleaved
};

inline constexpr double kOverlayAlpha = 0.6;

std::vector<std::uint8_t> encode_png(const Image8& image);
/// Any PNG decoded to 8-bit RGB or gray (palette, alpha and 16-bit are reduced).
Image8 decode_png(const std::vector<std::uint8_t>& bytes);

/// 8- or 16-bit grayscale (or colour, averaged) PNG as a [0, 1] grid.
Grid decode_png_grid(const std::vector<std::uint8_t>& bytes);
/// Values clamped to [0, 1] and rounded to 0..255.
Image8 grid_to_gray8(const Grid& grid);

std::array<std::uint8_t, 3> hot_colormap(double v);

/// base and soft must share a shape. Output is RGB.
Image8 overlay_attention(const Grid& base, const Grid& soft, double alpha = kOverlayAlpha);

}  // namespace vccnet

#endif  // VCCNET_IMAGING_HPP
