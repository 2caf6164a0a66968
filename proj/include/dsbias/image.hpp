// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace dsbias {

/// Value domain of a GrayImage. U8 images hold integral values in [0,255]
/// (the storage domain); F32 images hold arbitrary finite working values.
enum class PixelDomain : std::uint8_t { U8, F32 };

/// Row-major single-channel raster. Both domains are stored as float so that
/// every operation works on one representation.
class GrayImage {
 public:
  GrayImage() = default;
  GrayImage(std::size_t width, std::size_t height, PixelDomain domain, float fill = 0.0f)
      : width_(width), height_(height), domain_(domain), pixels_(width * height, fill) {}
  GrayImage(std::size_t width, std::size_t height, PixelDomain domain, std::vector<float> pixels);

  static GrayImage u8(std::size_t width, std::size_t height, std::uint8_t fill = 0) {
    return GrayImage(width, height, PixelDomain::U8, static_cast<float>(fill));
  }
  static GrayImage f32(std::size_t width, std::size_t height, float fill = 0.0f) {
    return GrayImage(width, height, PixelDomain::F32, fill);
  }

  std::size_t width() const noexcept { return width_; }
  std::size_t height() const noexcept { return height_; }
  std::size_t size() const noexcept { return pixels_.size(); }
  bool empty() const noexcept { return pixels_.empty(); }
  PixelDomain domain() const noexcept { return domain_; }

  float& at(std::size_t row, std::size_t col) { return pixels_[row * width_ + col]; }
  float at(std::size_t row, std::size_t col) const { return pixels_[row * width_ + col]; }

  std::span<float> pixels() noexcept { return pixels_; }
  std::span<const float> pixels() const noexcept { return pixels_; }

  /// Same pixels reinterpreted in the F32 working domain.
  GrayImage as_f32() const;
  /// Rounds and clamps into the U8 storage domain.
  GrayImage to_u8() const;

  /// Checks the domain invariant (U8: integral values in [0,255]).
  bool valid() const;

  friend bool operator==(const GrayImage&, const GrayImage&) = default;

 private:
  std::size_t width_ = 0;
  std::size_t height_ = 0;
  PixelDomain domain_ = PixelDomain::U8;
  std::vector<float> pixels_;
};

struct Histogram {
  std::vector<double> bin_edges;  // n_bins + 1 strictly increasing edges
  std::vector<std::uint64_t> counts;

  std::uint64_t total() const;
  /// Index of the fullest bin (lowest index on ties).
  std::size_t mode_bin() const;
  friend bool operator==(const Histogram&, const Histogram&) = default;
};

/// Interleaved 8-bit RGB raster, used only for rendered overlays.
struct ColorImage {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<std::uint8_t> rgb;  // 3 * width * height
};

}  // namespace dsbias
