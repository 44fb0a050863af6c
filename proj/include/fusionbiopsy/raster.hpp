#pragma once

#include <cstdint>
#include <filesystem>

#include "fusionbiopsy/core.hpp"

namespace fusionbiopsy {

/// A decoded grayscale raster: linear intensities plus the format's full-scale value.
struct Raster {
  GrayImage image;
  std::uint32_t maxval;
};

/// Reads PGM (P2/P5, 8 or 16 bit) or grayscale PNG, chosen by file content.
Raster read_raster(const std::filesystem::path& path);

/// Writes binary PGM. maxval <= 255 uses one byte per sample, otherwise two
/// (big-endian). Values are rounded and clamped to [0, maxval].
void write_pgm(const std::filesystem::path& path, const GrayImage& img, std::uint32_t maxval = 255);

/// Writes a [0,1] image as 8-bit PGM with values scaled by 255.
void write_unit_pgm(const std::filesystem::path& path, const GrayImage& img);

/// Writes a grayscale PNG (8 or 16 bit); values are rounded and clamped.
void write_png(const std::filesystem::path& path, const GrayImage& img, int bit_depth = 8);

}  // namespace fusionbiopsy
