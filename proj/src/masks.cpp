// SPDX-License-Identifier: Apache-2.0
#include "dsbias/masks.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "dsbias/error.hpp"
#include "dsbias/imaging.hpp"

namespace dsbias {

namespace {

constexpr std::array<std::string_view, kNumClasses> kNames = {
    "Background",          "Left Clavicle",  "Right Clavicle",        "Left Scapula",
    "Right Scapula",       "Left Lung",      "Right Lung",            "Left Hilus Pulmonis",
    "Right Hilus Pulmonis", "Heart",         "Aorta",                 "Facies Diaphragmatica",
    "Mediastinum",         "Weasand",        "Spine"};

void check_plane_id(int id) {
  if (id < 1 || id > kNumPlanes) throw InvalidInput("mask plane id " + std::to_string(id) + " not in 1..14");
}

}  // namespace

std::string_view anatomy_name(int id) {
  if (id < 0 || id >= kNumClasses) throw InvalidInput("anatomy id " + std::to_string(id) + " not in 0..14");
  return kNames[static_cast<std::size_t>(id)];
}

std::size_t BinaryMask::popcount() const {
  return static_cast<std::size_t>(std::count(bits.begin(), bits.end(), std::uint8_t{1}));
}

MaskSet::MaskSet(std::size_t width, std::size_t height) : width_(width), height_(height) {
  for (auto& p : planes_) p = BinaryMask(width, height);
}

BinaryMask& MaskSet::plane(int id) {
  check_plane_id(id);
  return planes_[static_cast<std::size_t>(id - 1)];
}

const BinaryMask& MaskSet::plane(int id) const {
  check_plane_id(id);
  return planes_[static_cast<std::size_t>(id - 1)];
}

BinaryMask MaskSet::background() const {
  BinaryMask bg(width_, height_);
  for (std::size_t i = 0; i < bg.bits.size(); ++i) {
    std::uint8_t covered = 0;
    for (const auto& p : planes_) covered |= p.bits[i];
    bg.bits[i] = covered ? 0 : 1;
  }
  return bg;
}

BinaryMask combine_masks(const MaskSet& ms, std::span<const int> ids) {
  if (ids.empty()) throw InvalidInput("combine_masks: empty id list");
  BinaryMask out(ms.width(), ms.height());
  for (int id : ids) {
    const auto& p = ms.plane(id);
    for (std::size_t i = 0; i < out.bits.size(); ++i) out.bits[i] |= p.bits[i];
  }
  return out;
}

BBox bbox_nonzero(const BinaryMask& mask) {
  BBox box{mask.height, 0, mask.width, 0};
  bool any = false;
  for (std::size_t r = 0; r < mask.height; ++r)
    for (std::size_t c = 0; c < mask.width; ++c)
      if (mask.at(r, c)) {
        any = true;
        box.row_min = std::min(box.row_min, r);
        box.row_max = std::max(box.row_max, r);
        box.col_min = std::min(box.col_min, c);
        box.col_max = std::max(box.col_max, c);
      }
  if (!any) throw EmptyMaskError("bbox_nonzero: mask has no nonzero pixels");
  return box;
}

GrayImage crop(const GrayImage& img, const BBox& box) {
  if (box.row_min > box.row_max || box.col_min > box.col_max || box.row_max >= img.height() ||
      box.col_max >= img.width())
    throw InvalidInput("crop: box outside image bounds");
  const std::size_t w = box.col_max - box.col_min + 1;
  const std::size_t h = box.row_max - box.row_min + 1;
  GrayImage out(w, h, img.domain());
  for (std::size_t r = 0; r < h; ++r) {
    auto src = img.pixels().subspan((box.row_min + r) * img.width() + box.col_min, w);
    std::copy(src.begin(), src.end(), out.pixels().begin() + static_cast<std::ptrdiff_t>(r * w));
  }
  return out;
}

GrayImage add_black_patches(const GrayImage& img, std::size_t patch) {
  if (patch > std::min(img.width(), img.height()))
    throw InvalidInput("add_black_patches: patch " + std::to_string(patch) + " larger than image");
  GrayImage out = img;
  const std::size_t w = img.width();
  for (std::size_t r = 0; r < patch; ++r)
    for (std::size_t c = 0; c < patch; ++c) {
      out.at(r, c) = 0.0f;
      out.at(r, w - patch + c) = 0.0f;
    }
  return out;
}

CropResult crop_to_lungs(const GrayImage& img, const MaskSet& ms) {
  if (ms.width() != img.width() || ms.height() != img.height())
    throw InvalidInput("crop_to_lungs: mask and image dimensions differ");
  const BinaryMask lungs = combine_masks(ms, kLungIds);
  try {
    return {crop(img, bbox_nonzero(lungs)), false};
  } catch (const EmptyMaskError&) {
    return {img, true};
  }
}

GrayImage render_semantic(const MaskSet& ms) {
  GrayImage out = GrayImage::u8(ms.width(), ms.height());
  auto px = out.pixels();
  for (int id = 1; id <= kNumPlanes; ++id) {
    const auto& p = ms.plane(id);
    const float level = std::round(static_cast<float>(id) * 255.0f / kNumPlanes);
    for (std::size_t i = 0; i < px.size(); ++i)
      if (p.bits[i]) px[i] = level;
  }
  return out;
}

GrayImage trace_contours(const MaskSet& ms) {
  const std::size_t w = ms.width(), h = ms.height();
  GrayImage out = GrayImage::u8(w, h);
  for (int id = 1; id <= kNumPlanes; ++id) {
    const auto& p = ms.plane(id);
    for (std::size_t r = 0; r < h; ++r)
      for (std::size_t c = 0; c < w; ++c) {
        if (!p.at(r, c)) continue;
        const bool edge = r == 0 || c == 0 || r + 1 == h || c + 1 == w || !p.at(r - 1, c) ||
                          !p.at(r + 1, c) || !p.at(r, c - 1) || !p.at(r, c + 1);
        if (edge) out.at(r, c) = 255.0f;
      }
  }
  return out;
}

GrayImage lung_heart(const GrayImage& img, const MaskSet& ms) {
  if (ms.width() != img.width() || ms.height() != img.height())
    throw InvalidInput("lung_heart: mask and image dimensions differ");
  const BinaryMask keep = combine_masks(ms, kLungHeartIds);
  GrayImage out = img;
  auto px = out.pixels();
  for (std::size_t i = 0; i < px.size(); ++i) px[i] *= static_cast<float>(keep.bits[i]);
  return out;
}

GrayImage patch_shuffle(const GrayImage& img, std::size_t patch, std::span<const std::size_t> perm) {
  if (patch == 0 || img.empty() || img.width() % patch != 0 || img.height() % patch != 0)
    throw InvalidInput("patch_shuffle: image " + std::to_string(img.width()) + "x" +
                       std::to_string(img.height()) + " not divisible by patch " + std::to_string(patch));
  const std::size_t tiles_x = img.width() / patch;
  const std::size_t n_tiles = tiles_x * (img.height() / patch);
  if (perm.size() != n_tiles) throw InvalidInput("patch_shuffle: permutation size mismatch");
  GrayImage out(img.width(), img.height(), img.domain());
  for (std::size_t t = 0; t < n_tiles; ++t) {
    const std::size_t s = perm[t];
    if (s >= n_tiles) throw InvalidInput("patch_shuffle: permutation index out of range");
    const std::size_t dr = (t / tiles_x) * patch, dc = (t % tiles_x) * patch;
    const std::size_t sr = (s / tiles_x) * patch, sc = (s % tiles_x) * patch;
    for (std::size_t r = 0; r < patch; ++r)
      for (std::size_t c = 0; c < patch; ++c) out.at(dr + r, dc + c) = img.at(sr + r, sc + c);
  }
  return out;
}

GrayImage patch_shuffle(const GrayImage& img, std::size_t patch, Rng& rng) {
  if (patch == 0 || img.empty() || img.width() % patch != 0 || img.height() % patch != 0)
    throw InvalidInput("patch_shuffle: image not divisible by patch " + std::to_string(patch));
  const auto perm = rng.permutation((img.width() / patch) * (img.height() / patch));
  return patch_shuffle(img, patch, perm);
}

GrayImage pixel_shuffle(const GrayImage& img, std::span<const std::size_t> perm) {
  if (perm.size() != img.size()) throw InvalidInput("pixel_shuffle: permutation size mismatch");
  GrayImage out(img.width(), img.height(), img.domain());
  for (std::size_t i = 0; i < perm.size(); ++i) {
    if (perm[i] >= img.size()) throw InvalidInput("pixel_shuffle: permutation index out of range");
    out.pixels()[i] = img.pixels()[perm[i]];
  }
  return out;
}

GrayImage pixel_shuffle(const GrayImage& img, Rng& rng) {
  if (img.empty()) throw InvalidInput("pixel_shuffle: empty image");
  const auto perm = rng.permutation(img.size());
  return pixel_shuffle(img, perm);
}

std::filesystem::path mask_plane_path(const std::filesystem::path& mask_dir, std::string_view stem, int id) {
  return mask_dir / (std::string(stem) + ".c" + std::to_string(id) + ".pgm");
}

MaskSet read_mask_set(const std::filesystem::path& mask_dir, std::string_view stem, std::size_t width,
                      std::size_t height) {
  MaskSet ms(width, height);
  for (int id = 1; id <= kNumPlanes; ++id) {
    const auto path = mask_plane_path(mask_dir, stem, id);
    if (!std::filesystem::exists(path)) continue;
    const GrayImage plane = read_pgm(path);
    if (plane.width() != width || plane.height() != height)
      throw DataError(path.string() + ": mask plane size differs from its image");
    auto& bits = ms.plane(id).bits;
    for (std::size_t i = 0; i < bits.size(); ++i) bits[i] = plane.pixels()[i] != 0.0f ? 1 : 0;
  }
  return ms;
}

void write_mask_set(const MaskSet& ms, const std::filesystem::path& mask_dir, std::string_view stem) {
  for (int id = 1; id <= kNumPlanes; ++id) {
    const auto& p = ms.plane(id);
    if (p.popcount() == 0) continue;
    GrayImage img = GrayImage::u8(ms.width(), ms.height());
    for (std::size_t i = 0; i < p.bits.size(); ++i) img.pixels()[i] = p.bits[i] ? 255.0f : 0.0f;
    write_pgm(img, mask_plane_path(mask_dir, stem, id));
  }
}

MaskSet resize_masks(const MaskSet& ms, std::size_t out_w, std::size_t out_h) {
  if (out_w == ms.width() && out_h == ms.height()) return ms;
  MaskSet out(out_w, out_h);
  for (std::size_t r = 0; r < out_h; ++r) {
    const auto sr = std::min(ms.height() - 1, static_cast<std::size_t>((r + 0.5) * ms.height() / out_h));
    for (std::size_t c = 0; c < out_w; ++c) {
      const auto sc = std::min(ms.width() - 1, static_cast<std::size_t>((c + 0.5) * ms.width() / out_w));
      for (int id = 1; id <= kNumPlanes; ++id) out.plane(id).at(r, c) = ms.plane(id).at(sr, sc);
    }
  }
  return out;
}

}  // namespace dsbias
