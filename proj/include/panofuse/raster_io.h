#pragma once

// On-disk raster formats.
//
// F32R: a 16-byte ASCII header followed by raw little-endian float32 samples.
//   bytes  0..3   "F32R"
//   bytes  4..8   width, 5 zero-padded decimal digits
//   bytes  9..13  height, 5 zero-padded decimal digits
//   byte   14     channel count, 1 decimal digit (1..9)
//   byte   15     '\n'
//   then width*height*channels float32 values, row-major from the top row,
//   channels interleaved.
//
// PFM: "Pf" (1 channel) or "PF" (3 channels), "\n<W> <H>\n-1.0\n", then
//   little-endian float32 rows stored bottom row first, per the PFM convention.
//
// PNG: 8-bit gray or RGB via libpng.

#include <cstdint>
#include <filesystem>

#include "panofuse/image.h"

namespace panofuse {

void WriteF32R(const std::filesystem::path& path, const ImageF& image);
void WriteF32R(const std::filesystem::path& path, const ImageD& image);
ImageF ReadF32R(const std::filesystem::path& path);

void WritePfm(const std::filesystem::path& path, const ImageF& image);
void WritePfm(const std::filesystem::path& path, const ImageD& image);
ImageF ReadPfm(const std::filesystem::path& path);

// Reads .pfm or .f32r by extension into a double raster.
ImageD ReadRaster(const std::filesystem::path& path);
ImageF ToFloat(const ImageD& image);
ImageD ToDouble(const ImageF& image);

// RGB in [0, 1], 3 channels regardless of the file's color type.
ImageD ReadPng(const std::filesystem::path& path);
void WritePng(const std::filesystem::path& path, const Image<std::uint8_t>& image);
// Quantizes [0, 1] values (clamped) to 8 bits with rounding.
Image<std::uint8_t> Quantize8(const ImageD& image);

// Linear gray mapping of [lo, hi] to [0, 255]; NaN maps to 0.
Image<std::uint8_t> LinearGray(const ImageD& image, double lo, double hi);

// Turbo colormap, evaluated with the published 6th-order polynomial fit:
//   r(t) = 0.13572138 + 4.61539260 t - 42.66032258 t^2 + 132.13108234 t^3
//          - 152.94239396 t^4 + 59.28637943 t^5
//   g(t) = 0.09140261 + 2.19418839 t + 4.84296658 t^2 - 14.18503333 t^3
//          + 4.27729857 t^4 + 2.82956604 t^5
//   b(t) = 0.10667330 + 12.64194608 t - 60.58204836 t^2 + 110.36276771 t^3
//          - 89.90310912 t^4 + 27.34824973 t^5
// with t = clamp((d - lo) / (hi - lo), 0, 1). Invalid (NaN) pixels are black.
Image<std::uint8_t> TurboColorize(const ImageD& depth, double lo, double hi);

}  // namespace panofuse
