// SPDX-License-Identifier: Apache-2.0
// Baseline block-transform codec round trip: level shift, 8x8 DCT-II,
// quantisation with the standard luminance table scaled by quality, and the
// inverse path. The entropy stage of a real encoder is lossless, so skipping
// it does not change the decoded pixels.
#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>

#include "dsbias/error.hpp"
#include "dsbias/imaging.hpp"

namespace dsbias {

namespace {

constexpr std::array<int, 64> kLumaTable = {
    16, 11, 10, 16, 24,  40,  51,  61,  12, 12, 14, 19, 26,  58,  60,  55,
    14, 13, 16, 24, 40,  57,  69,  56,  14, 17, 22, 29, 51,  87,  80,  62,
    18, 22, 37, 56, 68,  109, 103, 77,  24, 35, 55, 64, 81,  104, 113, 92,
    49, 64, 78, 87, 103, 121, 120, 101, 72, 92, 95, 98, 112, 100, 103, 99};

std::array<double, 64> quant_table(int quality) {
  const int scale = quality < 50 ? 5000 / quality : 200 - 2 * quality;
  std::array<double, 64> q{};
  for (std::size_t i = 0; i < 64; ++i) {
    const int v = (kLumaTable[i] * scale + 50) / 100;
    q[i] = static_cast<double>(std::clamp(v, 1, 255));
  }
  return q;
}

// basis[u][x] = c(u)/2 * cos((2x+1)u*pi/16)
std::array<std::array<double, 8>, 8> dct_basis() {
  std::array<std::array<double, 8>, 8> b{};
  for (int u = 0; u < 8; ++u)
    for (int x = 0; x < 8; ++x) {
      const double cu = u == 0 ? std::sqrt(0.5) : 1.0;
      b[u][x] = 0.5 * cu * std::cos((2.0 * x + 1.0) * u * std::numbers::pi / 16.0);
    }
  return b;
}

}  // namespace

GrayImage reencode_lossy(const GrayImage& img, int quality) {
  if (quality < 1 || quality > 100) throw InvalidInput("reencode_lossy: quality must be in 1..100");
  if (img.domain() != PixelDomain::U8) throw InvalidInput("reencode_lossy: U8 image required");
  if (img.empty()) throw InvalidInput("reencode_lossy: empty image");

  static const auto basis = dct_basis();
  const auto q = quant_table(quality);
  const std::size_t w = img.width(), h = img.height();
  GrayImage out = GrayImage::u8(w, h);

  std::array<double, 64> block{}, tmp{}, coef{};
  for (std::size_t by = 0; by < h; by += 8) {
    for (std::size_t bx = 0; bx < w; bx += 8) {
      // Edge blocks replicate the last row/column, as encoders pad MCUs.
      for (std::size_t y = 0; y < 8; ++y)
        for (std::size_t x = 0; x < 8; ++x)
          block[y * 8 + x] = img.at(std::min(by + y, h - 1), std::min(bx + x, w - 1)) - 128.0;

      for (int y = 0; y < 8; ++y)
        for (int u = 0; u < 8; ++u) {
          double s = 0.0;
          for (int x = 0; x < 8; ++x) s += basis[u][x] * block[y * 8 + x];
          tmp[y * 8 + u] = s;
        }
      for (int v = 0; v < 8; ++v)
        for (int u = 0; u < 8; ++u) {
          double s = 0.0;
          for (int y = 0; y < 8; ++y) s += basis[v][y] * tmp[y * 8 + u];
          const std::size_t k = static_cast<std::size_t>(v * 8 + u);
          coef[k] = std::round(s / q[k]) * q[k];
        }

      for (int v = 0; v < 8; ++v)
        for (int x = 0; x < 8; ++x) {
          double s = 0.0;
          for (int u = 0; u < 8; ++u) s += basis[u][x] * coef[v * 8 + u];
          tmp[v * 8 + x] = s;
        }
      for (std::size_t y = 0; y < 8 && by + y < h; ++y)
        for (std::size_t x = 0; x < 8 && bx + x < w; ++x) {
          double s = 0.0;
          for (std::size_t v = 0; v < 8; ++v) s += basis[v][y] * tmp[v * 8 + x];
          out.at(by + y, bx + x) = static_cast<float>(std::clamp(std::round(s + 128.0), 0.0, 255.0));
        }
    }
  }
  return out;
}

}  // namespace dsbias
