// SPDX-License-Identifier: Apache-2.0
#include "dsbias/imaging.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "dsbias/error.hpp"

namespace dsbias {

namespace {

struct Tap {
  std::size_t lo, hi;
  float frac;  // weight of hi
};

std::vector<Tap> sample_axis(std::size_t src, std::size_t dst) {
  std::vector<Tap> taps(dst);
  const double scale = static_cast<double>(src) / static_cast<double>(dst);
  const double max_coord = static_cast<double>(src - 1);
  for (std::size_t i = 0; i < dst; ++i) {
    double x = (static_cast<double>(i) + 0.5) * scale - 0.5;
    x = std::clamp(x, 0.0, max_coord);
    const auto lo = static_cast<std::size_t>(std::floor(x));
    const std::size_t hi = std::min(lo + 1, src - 1);
    taps[i] = {lo, hi, static_cast<float>(x - static_cast<double>(lo))};
  }
  return taps;
}

}  // namespace

GrayImage resize_bilinear(const GrayImage& img, std::size_t out_w, std::size_t out_h) {
  if (img.empty()) throw InvalidInput("resize_bilinear: empty input image");
  if (out_w == 0 || out_h == 0) throw InvalidInput("resize_bilinear: zero output size");
  if (out_w == img.width() && out_h == img.height()) return img;

  const auto xs = sample_axis(img.width(), out_w);
  const auto ys = sample_axis(img.height(), out_h);
  GrayImage out(out_w, out_h, img.domain());
  for (std::size_t r = 0; r < out_h; ++r) {
    const Tap& ty = ys[r];
    for (std::size_t c = 0; c < out_w; ++c) {
      const Tap& tx = xs[c];
      const float top = img.at(ty.lo, tx.lo) + tx.frac * (img.at(ty.lo, tx.hi) - img.at(ty.lo, tx.lo));
      const float bot = img.at(ty.hi, tx.lo) + tx.frac * (img.at(ty.hi, tx.hi) - img.at(ty.hi, tx.lo));
      out.at(r, c) = top + ty.frac * (bot - top);
    }
  }
  if (img.domain() == PixelDomain::U8) return out.to_u8();
  return out;
}

ZScoreResult zscore_normalize(const GrayImage& img) {
  if (img.size() < 2) throw InvalidInput("zscore_normalize: need at least 2 pixels");
  double mean = 0.0;
  for (float v : img.pixels()) mean += v;
  mean /= static_cast<double>(img.size());
  double var = 0.0;
  for (float v : img.pixels()) var += (v - mean) * (v - mean);
  var /= static_cast<double>(img.size());
  const double sd = std::sqrt(var);

  ZScoreResult res{GrayImage::f32(img.width(), img.height()), false};
  if (!(sd > 1e-12 * std::max(1.0, std::abs(mean)))) {
    res.degenerate = true;
    return res;
  }
  auto out = res.image.pixels();
  auto in = img.pixels();
  for (std::size_t i = 0; i < in.size(); ++i)
    out[i] = static_cast<float>((in[i] - mean) / sd);
  return res;
}

Histogram histogram(const GrayImage& img, std::size_t n_bins) {
  if (n_bins == 0) throw InvalidInput("histogram: n_bins must be >= 1");
  if (img.empty()) throw InvalidInput("histogram: empty image");
  double lo = 0.0, hi = 256.0;
  if (img.domain() == PixelDomain::F32) {
    auto [mn, mx] = std::minmax_element(img.pixels().begin(), img.pixels().end());
    lo = *mn;
    hi = *mx;
    if (hi <= lo) hi = lo + 1.0;
  }
  Histogram h;
  h.bin_edges.resize(n_bins + 1);
  for (std::size_t i = 0; i <= n_bins; ++i)
    h.bin_edges[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n_bins);
  h.counts.assign(n_bins, 0);
  const double scale = static_cast<double>(n_bins) / (hi - lo);
  for (float v : img.pixels()) {
    auto b = static_cast<std::int64_t>(std::floor((v - lo) * scale));
    b = std::clamp<std::int64_t>(b, 0, static_cast<std::int64_t>(n_bins) - 1);
    ++h.counts[static_cast<std::size_t>(b)];
  }
  return h;
}

double psnr(const GrayImage& a, const GrayImage& b) {
  if (a.width() != b.width() || a.height() != b.height() || a.empty())
    throw InvalidInput("psnr: images must be non-empty and equally sized");
  double mse = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = static_cast<double>(a.pixels()[i]) - b.pixels()[i];
    mse += d * d;
  }
  mse /= static_cast<double>(a.size());
  if (mse == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(255.0 * 255.0 / mse);
}

}  // namespace dsbias
