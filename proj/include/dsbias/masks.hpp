// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string_view>
#include <vector>

#include "dsbias/image.hpp"
#include "dsbias/rng.hpp"

namespace dsbias {

/// Anatomy class ids. 0 is the derived background; 1..14 are stored planes.
enum class Anatomy : int {
  Background = 0,
  LeftClavicle = 1,
  RightClavicle = 2,
  LeftScapula = 3,
  RightScapula = 4,
  LeftLung = 5,
  RightLung = 6,
  LeftHilusPulmonis = 7,
  RightHilusPulmonis = 8,
  Heart = 9,
  Aorta = 10,
  FaciesDiaphragmatica = 11,
  Mediastinum = 12,
  Weasand = 13,
  Spine = 14,
};

inline constexpr int kNumPlanes = 14;
inline constexpr int kNumClasses = kNumPlanes + 1;

std::string_view anatomy_name(int id);

/// Planes combined by the lung-heart task.
inline constexpr std::array<int, 6> kLungHeartIds = {5, 6, 7, 8, 9, 10};
inline constexpr std::array<int, 2> kLungIds = {5, 6};

struct BinaryMask {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<std::uint8_t> bits;  // 0 or 1, row-major

  BinaryMask() = default;
  BinaryMask(std::size_t w, std::size_t h) : width(w), height(h), bits(w * h, 0) {}

  std::uint8_t& at(std::size_t r, std::size_t c) { return bits[r * width + c]; }
  std::uint8_t at(std::size_t r, std::size_t c) const { return bits[r * width + c]; }
  std::size_t popcount() const;
  friend bool operator==(const BinaryMask&, const BinaryMask&) = default;
};

/// Stack of per-class binary planes aligned with one image. Planes may overlap.
class MaskSet {
 public:
  MaskSet() = default;
  MaskSet(std::size_t width, std::size_t height);

  std::size_t width() const noexcept { return width_; }
  std::size_t height() const noexcept { return height_; }

  /// Plane for class id 1..14.
  BinaryMask& plane(int id);
  const BinaryMask& plane(int id) const;

  /// Pixels covered by no plane.
  BinaryMask background() const;

  friend bool operator==(const MaskSet&, const MaskSet&) = default;

 private:
  std::size_t width_ = 0;
  std::size_t height_ = 0;
  std::array<BinaryMask, kNumPlanes> planes_;
};

/// Inclusive pixel bounds.
struct BBox {
  std::size_t row_min = 0, row_max = 0, col_min = 0, col_max = 0;
  friend bool operator==(const BBox&, const BBox&) = default;
};

BinaryMask combine_masks(const MaskSet& ms, std::span<const int> ids);

/// Tightest box around the nonzero pixels; throws EmptyMaskError if none.
BBox bbox_nonzero(const BinaryMask& mask);

GrayImage crop(const GrayImage& img, const BBox& box);

/// Zeroes patch x patch squares in the top-left and top-right corners.
GrayImage add_black_patches(const GrayImage& img, std::size_t patch);

struct CropResult {
  GrayImage image;
  bool fell_back = false;  // lung union empty, full image returned
};

/// Crop to the bounding box of the combined left/right lung planes.
CropResult crop_to_lungs(const GrayImage& img, const MaskSet& ms);

/// Gray-level label map: round(id * 255 / 14) of the highest covering id.
GrayImage render_semantic(const MaskSet& ms);

/// One-pixel inner boundaries (4-neighbourhood, image edge counts as outside)
/// of every plane drawn white on black.
GrayImage trace_contours(const MaskSet& ms);

/// Image multiplied by the union of lungs, hili, heart and aorta.
GrayImage lung_heart(const GrayImage& img, const MaskSet& ms);

/// Rearranges patch x patch tiles so that output tile i is input tile perm[i].
GrayImage patch_shuffle(const GrayImage& img, std::size_t patch, std::span<const std::size_t> perm);
GrayImage patch_shuffle(const GrayImage& img, std::size_t patch, Rng& rng);

/// Output pixel i is input pixel perm[i].
GrayImage pixel_shuffle(const GrayImage& img, std::span<const std::size_t> perm);
GrayImage pixel_shuffle(const GrayImage& img, Rng& rng);

// Mask directory layout: one binary P5 per plane named <stem>.c<id>.pgm.
// Missing files are all-zero planes; any nonzero byte reads as 1.
std::filesystem::path mask_plane_path(const std::filesystem::path& mask_dir, std::string_view stem, int id);
MaskSet read_mask_set(const std::filesystem::path& mask_dir, std::string_view stem,
                      std::size_t width, std::size_t height);
/// Writes non-empty planes only (stored as 0/255).
void write_mask_set(const MaskSet& ms, const std::filesystem::path& mask_dir, std::string_view stem);

/// Nearest-neighbour resampling of every plane.
MaskSet resize_masks(const MaskSet& ms, std::size_t out_w, std::size_t out_h);

}  // namespace dsbias
