// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <string>

#include "dsbias/image.hpp"

namespace dsbias {

/// Bilinear resampling with pixel-center alignment:
/// src = (dst + 0.5) * (src_size / dst_size) - 0.5, clamped to the valid range.
/// U8 inputs produce rounded U8 outputs; F32 inputs stay unrounded.
GrayImage resize_bilinear(const GrayImage& img, std::size_t out_w, std::size_t out_h);

/// Round-trip through a baseline 8x8 DCT codec (IJG-scaled luminance table)
/// at `quality` in [1,100]. Entropy coding is lossless and therefore skipped.
GrayImage reencode_lossy(const GrayImage& img, int quality = 90);

struct ZScoreResult {
  GrayImage image;
  bool degenerate = false;  // input had zero variance; image is all zeros
};

/// Per-image standardisation with the population standard deviation.
ZScoreResult zscore_normalize(const GrayImage& img);

/// Equal-width histogram. U8 images bin [0,256) so that 256 bins map one gray
/// level per bin; F32 images bin [min, max] of the image.
Histogram histogram(const GrayImage& img, std::size_t n_bins);

/// Peak signal-to-noise ratio for the 0..255 range. Identical images give +inf.
double psnr(const GrayImage& a, const GrayImage& b);

// Portable anymap I/O. The P5 path is byte-exact: header "P5\n<w> <h>\n255\n".
GrayImage read_pgm(const std::filesystem::path& path);
void write_pgm(const GrayImage& img, const std::filesystem::path& path);
std::string encode_pgm(const GrayImage& img);
GrayImage decode_pgm(const std::string& bytes);
void write_ppm(const ColorImage& img, const std::filesystem::path& path);
ColorImage read_ppm(const std::filesystem::path& path);

}  // namespace dsbias
