#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "silsm/grid.hpp"

namespace silsm {

using Bytes = std::vector<std::uint8_t>;

/// 8-bit RGB raster, used for overlays.
struct RgbImage {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> pixels;  // interleaved RGB, row-major
};

/**
 * @brief Decode PNG (any colour type / bit depth) or binary PGM (P5) to grayscale.
 *
 * Colour input uses luminance 0.299R + 0.587G + 0.114B; 16-bit samples are
 * scaled to [0, 255]. Alpha is ignored. Throws DecodeError.
 */
GrayImage decode_image(const Bytes& bytes);
GrayImage read_image(const std::filesystem::path& path);

/// Nonzero decoded intensity is foreground.
RegionMask decode_mask(const Bytes& bytes);
RegionMask read_mask(const std::filesystem::path& path);

Bytes encode_png_gray(const Grid<std::uint8_t>& pixels);
Bytes encode_png_rgb(const RgbImage& image);
/// Foreground 255, background 0.
Bytes encode_mask_png(const RegionMask& mask);
/// Intensities rounded and clamped to 8 bits.
Bytes encode_gray_png(const GrayImage& image);

// Flat binary grid: "SILSMPHI" magic, u32 version, u32 width, u32 height,
// then width*height little-endian float64 values in row-major order.
Bytes encode_snapshot(const ScalarGrid& grid);
ScalarGrid decode_snapshot(const Bytes& bytes);

Bytes read_file(const std::filesystem::path& path);
/// Writes via a temporary file and rename.
void write_file(const std::filesystem::path& path, const Bytes& bytes);
void write_file(const std::filesystem::path& path, const std::string& text);

}  // namespace silsm
