#pragma once

#include <tiffio.h>

#include <cstdarg>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <algorithm>
#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "ctquant/error.hpp"
#include "ctquant/volume.hpp"

namespace ctquant {

/// One decoded grayscale plane, widened to 16 bits by value.
struct TiffPlane {
    std::uint32_t height = 0;
    std::uint32_t width = 0;
    std::uint16_t bits_per_sample = 0;
    std::vector<GrayValue> values;
};

enum class TiffCompression { none, deflate };

namespace detail {

inline thread_local std::string tiff_last_error;

inline void tiff_error_handler(const char* module, const char* fmt, va_list args) {
    char buf[512];
    std::vsnprintf(buf, sizeof(buf), fmt, args);
    tiff_last_error = (module ? std::string(module) + ": " : std::string()) + buf;
}

inline void install_tiff_handlers() {
    static const bool installed = [] {
        TIFFSetErrorHandler(tiff_error_handler);
        TIFFSetWarningHandler(nullptr);
        return true;
    }();
    (void)installed;
}

struct TiffCloser {
    void operator()(TIFF* tif) const noexcept { TIFFClose(tif); }
};
using TiffHandle = std::unique_ptr<TIFF, TiffCloser>;

inline TiffHandle open_tiff(const std::filesystem::path& path, const char* mode) {
    install_tiff_handlers();
    tiff_last_error.clear();
    TiffHandle tif(TIFFOpen(path.string().c_str(), mode));
    if (!tif) {
        throw Error(ErrorCode::io, "cannot open TIFF " + path.string() +
                                       (tiff_last_error.empty() ? "" : " (" + tiff_last_error + ")"));
    }
    return tif;
}

inline TiffPlane read_current_directory(TIFF* tif, const std::filesystem::path& path) {
    std::uint32_t width = 0, height = 0;
    std::uint16_t bits = 0, samples = 1, photometric = PHOTOMETRIC_MINISBLACK, format = SAMPLEFORMAT_UINT;
    TIFFGetField(tif, TIFFTAG_IMAGEWIDTH, &width);
    TIFFGetField(tif, TIFFTAG_IMAGELENGTH, &height);
    TIFFGetFieldDefaulted(tif, TIFFTAG_BITSPERSAMPLE, &bits);
    TIFFGetFieldDefaulted(tif, TIFFTAG_SAMPLESPERPIXEL, &samples);
    TIFFGetFieldDefaulted(tif, TIFFTAG_SAMPLEFORMAT, &format);
    TIFFGetField(tif, TIFFTAG_PHOTOMETRIC, &photometric);

    const auto reject = [&](const std::string& why) {
        return Error(ErrorCode::unsupported_format, path.string() + ": " + why);
    };
    if (samples != 1) throw reject("not a single-channel grayscale image");
    if (photometric != PHOTOMETRIC_MINISBLACK && photometric != PHOTOMETRIC_MINISWHITE) {
        throw reject("photometric interpretation is not grayscale");
    }
    if (bits != 8 && bits != 16) throw reject("only 8- and 16-bit samples are supported");
    if (format != SAMPLEFORMAT_UINT) throw reject("only unsigned integer samples are supported");
    if (TIFFIsTiled(tif)) throw reject("tiled TIFF layout is not supported");
    if (width == 0 || height == 0) throw reject("empty image");

    TiffPlane plane{height, width, bits, std::vector<GrayValue>(std::size_t{width} * height)};
    std::vector<std::uint8_t> row(static_cast<std::size_t>(TIFFScanlineSize(tif)));
    for (std::uint32_t y = 0; y < height; ++y) {
        if (TIFFReadScanline(tif, row.data(), y, 0) < 0) {
            throw Error(ErrorCode::io, path.string() + ": failed to decode row " + std::to_string(y) +
                                           (tiff_last_error.empty() ? "" : " (" + tiff_last_error + ")"));
        }
        GrayValue* out = plane.values.data() + std::size_t{y} * width;
        if (bits == 8) {
            for (std::uint32_t x = 0; x < width; ++x) out[x] = row[x];
        } else {
            std::memcpy(out, row.data(), std::size_t{width} * sizeof(GrayValue));
        }
    }
    return plane;
}

inline void write_directory(TIFF* tif, std::span<const GrayValue> values, std::uint32_t height,
                            std::uint32_t width, TiffCompression compression, std::uint16_t page,
                            std::uint16_t pages) {
    TIFFSetField(tif, TIFFTAG_IMAGEWIDTH, width);
    TIFFSetField(tif, TIFFTAG_IMAGELENGTH, height);
    TIFFSetField(tif, TIFFTAG_BITSPERSAMPLE, 16);
    TIFFSetField(tif, TIFFTAG_SAMPLESPERPIXEL, 1);
    TIFFSetField(tif, TIFFTAG_SAMPLEFORMAT, SAMPLEFORMAT_UINT);
    TIFFSetField(tif, TIFFTAG_PHOTOMETRIC, PHOTOMETRIC_MINISBLACK);
    TIFFSetField(tif, TIFFTAG_PLANARCONFIG, PLANARCONFIG_CONTIG);
    TIFFSetField(tif, TIFFTAG_COMPRESSION,
                 compression == TiffCompression::deflate ? COMPRESSION_ADOBE_DEFLATE : COMPRESSION_NONE);
    TIFFSetField(tif, TIFFTAG_ROWSPERSTRIP, TIFFDefaultStripSize(tif, 0));
    if (pages > 1) {
        TIFFSetField(tif, TIFFTAG_SUBFILETYPE, FILETYPE_PAGE);
        TIFFSetField(tif, TIFFTAG_PAGENUMBER, page, pages);
    }
    std::vector<GrayValue> row(width);
    for (std::uint32_t y = 0; y < height; ++y) {
        std::copy_n(values.data() + std::size_t{y} * width, width, row.begin());
        if (TIFFWriteScanline(tif, row.data(), y, 0) < 0) {
            throw Error(ErrorCode::io, "failed to encode TIFF row (" + tiff_last_error + ")");
        }
    }
    if (!TIFFWriteDirectory(tif)) throw Error(ErrorCode::io, "failed to write TIFF directory");
}

}  // namespace detail

/// Reads a single-plane grayscale TIFF (8 or 16 bit, any libtiff codec).
[[nodiscard]] inline TiffPlane read_tiff_plane(const std::filesystem::path& path) {
    auto tif = detail::open_tiff(path, "r");
    if (TIFFNumberOfDirectories(tif.get()) != 1) {
        throw Error(ErrorCode::unsupported_format, path.string() + ": expected a single-plane TIFF");
    }
    return detail::read_current_directory(tif.get(), path);
}

/// Reads every page of a multi-page grayscale TIFF as one volume.
[[nodiscard]] inline Volume<GrayValue> read_tiff_stack(const std::filesystem::path& path) {
    auto tif = detail::open_tiff(path, "r");
    std::vector<TiffPlane> planes;
    do {
        planes.push_back(detail::read_current_directory(tif.get(), path));
        if (planes.back().width != planes.front().width || planes.back().height != planes.front().height) {
            throw Error(ErrorCode::shape_mismatch, path.string() + ": pages differ in shape");
        }
    } while (TIFFReadDirectory(tif.get()));
    const Dims dims{planes.size(), planes.front().height, planes.front().width};
    Volume<GrayValue> vol(dims);
    for (std::size_t z = 0; z < planes.size(); ++z) {
        std::copy(planes[z].values.begin(), planes[z].values.end(), vol.plane(z).begin());
    }
    return vol;
}

inline void write_tiff_plane(const std::filesystem::path& path, std::span<const GrayValue> values,
                             std::uint32_t height, std::uint32_t width,
                             TiffCompression compression = TiffCompression::none) {
    if (values.size() != std::size_t{height} * width) {
        throw Error(ErrorCode::shape_mismatch, "plane size does not match height*width");
    }
    auto tif = detail::open_tiff(path, "w");
    detail::write_directory(tif.get(), values, height, width, compression, 0, 1);
}

/// Writes a 16-bit multi-page TIFF, one page per z-slice.
inline void write_tiff_stack(const std::filesystem::path& path, const Volume<GrayValue>& vol,
                             TiffCompression compression = TiffCompression::deflate) {
    const Dims& d = vol.dims();
    auto tif = detail::open_tiff(path, "w");
    for (std::size_t z = 0; z < d.z; ++z) {
        detail::write_directory(tif.get(), vol.plane(z), static_cast<std::uint32_t>(d.y),
                                static_cast<std::uint32_t>(d.x), compression, static_cast<std::uint16_t>(z),
                                static_cast<std::uint16_t>(d.z));
    }
}

}  // namespace ctquant
