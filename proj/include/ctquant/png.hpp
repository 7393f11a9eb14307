#pragma once

#include <png.h>

#include <cstdint>
#include <string>
#include <vector>

#include "ctquant/error.hpp"

namespace ctquant {

/// Encodes an 8-bit RGB image (row-major, 3 bytes per pixel) as PNG.
[[nodiscard]] inline std::string encode_png_rgb(const std::vector<std::uint8_t>& rgb, std::uint32_t width,
                                                std::uint32_t height) {
    if (rgb.size() != std::size_t{width} * height * 3 || width == 0 || height == 0) {
        throw Error(ErrorCode::shape_mismatch, "RGB buffer does not match image size");
    }
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) throw Error(ErrorCode::io, "png_create_write_struct failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_write_struct(&png, nullptr);
        throw Error(ErrorCode::io, "png_create_info_struct failed");
    }
    std::string out;
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw Error(ErrorCode::io, "PNG encoding failed");
    }
    png_set_write_fn(
        png, &out,
        [](png_structp p, png_bytep data, png_size_t len) {
            static_cast<std::string*>(png_get_io_ptr(p))->append(reinterpret_cast<const char*>(data), len);
        },
        [](png_structp) {});
    png_set_IHDR(png, info, width, height, 8, PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
                 PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    for (std::uint32_t y = 0; y < height; ++y) {
        png_write_row(png, const_cast<png_bytep>(rgb.data() + std::size_t{y} * width * 3));
    }
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
    return out;
}

}  // namespace ctquant
