#include "vccnet/imaging.hpp"

#include "vccnet/errors.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <csetjmp>
#include <cstdio>
#include <cstring>

namespace vccnet {

namespace {

struct ReadCursor {
    const std::vector<std::uint8_t>* bytes;
    std::size_t pos;
};

void read_from_memory(png_structp png, png_bytep out, png_size_t n) {
    auto* cur = static_cast<ReadCursor*>(png_get_io_ptr(png));
    if (cur->bytes->size() - cur->pos < n) {
        png_error(png, "truncated PNG data");
    }
    std::memcpy(out, cur->bytes->data() + cur->pos, n);
    cur->pos += n;
}

void write_to_memory(png_structp png, png_bytep data, png_size_t n) {
    auto* out = static_cast<std::vector<std::uint8_t>*>(png_get_io_ptr(png));
    out->insert(out->end(), data, data + n);
}

void flush_noop(png_structp) {}

void raise_png_error(png_structp png, png_const_charp msg) {
    auto* buffer = static_cast<char*>(png_get_error_ptr(png));
    std::snprintf(buffer, 256, "%s", msg);
    png_longjmp(png, 1);
}

void ignore_warning(png_structp, png_const_charp) {}

// Decodes to 1 or 3 channels, 8 or 16 bits per channel (16-bit samples big-endian).
struct RawImage {
    int width = 0;
    int height = 0;
    int channels = 0;
    int depth = 8;
    std::vector<std::uint8_t> data;
};

RawImage decode_raw(const std::vector<std::uint8_t>& bytes, bool keep16) {
    if (bytes.size() < 8 || png_sig_cmp(bytes.data(), 0, 8) != 0) {
        throw Error(ErrorCode::Validation, "png: not a PNG stream");
    }
    char message[256] = "png decode failed";
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, message, raise_png_error, ignore_warning);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw Error(ErrorCode::Io, "png: out of memory");
    }
    RawImage raw;
    std::vector<png_bytep> rows;
    ReadCursor cursor{&bytes, 0};
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw Error(ErrorCode::Validation, std::string("png: ") + message);
    }
    png_set_read_fn(png, &cursor, read_from_memory);
    png_read_info(png, info);
    const png_byte color = png_get_color_type(png, info);
    const png_byte depth = png_get_bit_depth(png, info);
    if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
    if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
    if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
    png_set_strip_alpha(png);
    if (depth == 16 && !keep16) png_set_strip_16(png);
    png_read_update_info(png, info);
    raw.width = static_cast<int>(png_get_image_width(png, info));
    raw.height = static_cast<int>(png_get_image_height(png, info));
    raw.channels = png_get_channels(png, info);
    raw.depth = png_get_bit_depth(png, info);
    const std::size_t stride = png_get_rowbytes(png, info);
    raw.data.resize(stride * static_cast<std::size_t>(raw.height));
    rows.resize(static_cast<std::size_t>(raw.height));
    for (int y = 0; y < raw.height; ++y) rows[y] = raw.data.data() + stride * y;
    png_read_image(png, rows.data());
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);
    return raw;
}

}  // namespace

std::vector<std::uint8_t> encode_png(const Image8& image) {
    if (image.width <= 0 || image.height <= 0 || (image.channels != 1 && image.channels != 3) ||
        image.pixels.size() != static_cast<std::size_t>(image.width) * image.height * image.channels) {
        throw Error(ErrorCode::ShapeMismatch, "png: pixel buffer does not match the image shape");
    }
    char message[256] = "png encode failed";
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, message, raise_png_error, ignore_warning);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
        png_destroy_write_struct(&png, &info);
        throw Error(ErrorCode::Io, "png: out of memory");
    }
    std::vector<std::uint8_t> out;
    std::vector<png_const_bytep> rows(static_cast<std::size_t>(image.height));
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw Error(ErrorCode::Io, std::string("png: ") + message);
    }
    png_set_write_fn(png, &out, write_to_memory, flush_noop);
    png_set_IHDR(png, info, static_cast<png_uint_32>(image.width), static_cast<png_uint_32>(image.height), 8,
                 image.channels == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE,
                 PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    const std::size_t stride = static_cast<std::size_t>(image.width) * image.channels;
    for (int y = 0; y < image.height; ++y) rows[y] = image.pixels.data() + stride * y;
    png_write_rows(png, const_cast<png_bytepp>(rows.data()), static_cast<png_uint_32>(image.height));
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
    return out;
}

Image8 decode_png(const std::vector<std::uint8_t>& bytes) {
    RawImage raw = decode_raw(bytes, false);
    return Image8{raw.width, raw.height, raw.channels, std::move(raw.data)};
}

Grid decode_png_grid(const std::vector<std::uint8_t>& bytes) {
    const RawImage raw = decode_raw(bytes, true);
    const double full = raw.depth == 16 ? 65535.0 : 255.0;
    const int bpc = raw.depth == 16 ? 2 : 1;
    Grid g(raw.height, raw.width);
    for (int y = 0; y < raw.height; ++y) {
        for (int x = 0; x < raw.width; ++x) {
            double sum = 0.0;
            for (int c = 0; c < raw.channels; ++c) {
                const std::size_t at = ((static_cast<std::size_t>(y) * raw.width + x) * raw.channels + c) * bpc;
                sum += bpc == 2 ? (raw.data[at] << 8 | raw.data[at + 1]) : raw.data[at];
            }
            g(y, x) = sum / (raw.channels * full);
        }
    }
    return g;
}

Image8 grid_to_gray8(const Grid& grid) {
    Image8 img{static_cast<int>(grid.cols()), static_cast<int>(grid.rows()), 1, {}};
    img.pixels.resize(static_cast<std::size_t>(grid.size()));
    for (Eigen::Index i = 0; i < grid.size(); ++i) {
        img.pixels[static_cast<std::size_t>(i)] =
            static_cast<std::uint8_t>(std::lround(std::clamp(grid.data()[i], 0.0, 1.0) * 255.0));
    }
    return img;
}

std::array<std::uint8_t, 3> hot_colormap(double v) {
    const auto channel = [](double t) {
        return static_cast<std::uint8_t>(std::lround(std::clamp(t, 0.0, 1.0) * 255.0));
    };
    return {channel(3.0 * v), channel(3.0 * v - 1.0), channel(3.0 * v - 2.0)};
}

Image8 overlay_attention(const Grid& base, const Grid& soft, double alpha) {
    if (base.rows() != soft.rows() || base.cols() != soft.cols()) {
        throw Error(ErrorCode::ShapeMismatch, "overlay: attention map and image differ in shape");
    }
    Image8 img{static_cast<int>(base.cols()), static_cast<int>(base.rows()), 3, {}};
    img.pixels.resize(static_cast<std::size_t>(base.size()) * 3);
    for (Eigen::Index i = 0; i < base.size(); ++i) {
        const double b = std::lround(std::clamp(base.data()[i], 0.0, 1.0) * 255.0);
        const double v = std::clamp(soft.data()[i], 0.0, 1.0);
        const auto colour = hot_colormap(v);
        const double w = alpha * v;
        for (int c = 0; c < 3; ++c) {
            img.pixels[static_cast<std::size_t>(i) * 3 + c] =
                static_cast<std::uint8_t>(std::lround(b * (1.0 - w) + colour[c] * w));
        }
    }
    return img;
}

}  // namespace vccnet
