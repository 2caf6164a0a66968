// SPDX-License-Identifier: Apache-2.0
#include "dsbias/image.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "dsbias/error.hpp"

namespace dsbias {

GrayImage::GrayImage(std::size_t width, std::size_t height, PixelDomain domain,
                     std::vector<float> pixels)
    : width_(width), height_(height), domain_(domain), pixels_(std::move(pixels)) {
  if (pixels_.size() != width_ * height_)
    throw InvalidInput("pixel count " + std::to_string(pixels_.size()) + " does not match " +
                       std::to_string(width_) + "x" + std::to_string(height_));
}

GrayImage GrayImage::as_f32() const {
  GrayImage out = *this;
  out.domain_ = PixelDomain::F32;
  return out;
}

GrayImage GrayImage::to_u8() const {
  GrayImage out = *this;
  out.domain_ = PixelDomain::U8;
  for (auto& v : out.pixels_) v = std::clamp(std::round(v), 0.0f, 255.0f);
  return out;
}

bool GrayImage::valid() const {
  if (pixels_.size() != width_ * height_) return false;
  if (domain_ == PixelDomain::F32)
    return std::all_of(pixels_.begin(), pixels_.end(), [](float v) { return std::isfinite(v); });
  return std::all_of(pixels_.begin(), pixels_.end(),
                     [](float v) { return v >= 0.0f && v <= 255.0f && v == std::round(v); });
}

std::uint64_t Histogram::total() const {
  return std::accumulate(counts.begin(), counts.end(), std::uint64_t{0});
}

std::size_t Histogram::mode_bin() const {
  return static_cast<std::size_t>(std::max_element(counts.begin(), counts.end()) - counts.begin());
}

}  // namespace dsbias
