// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "dsbias/image.hpp"
#include "dsbias/network.hpp"

namespace dsbias {

struct Heatmap {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<double> values;  // row-major, in [0,1]
  bool degenerate = false;     // raw map was all zero; values are all zero
  bool uniform = false;        // raw map was a positive constant; values are all one

  double at(std::size_t r, std::size_t c) const { return values[r * width + c]; }
};

/// Min-max normalisation with the degenerate and uniform cases flagged.
Heatmap normalize_heatmap(std::size_t width, std::size_t height, std::vector<double> values);

/// Grad-CAM of `class_id` at feature tap `layer` (index into
/// net.feature_taps(), -1 for the last). `input` is the model input (S x S,
/// already normalised). The rectified map is upsampled with resize_bilinear
/// to the input size and then normalised.
template <typename T>
Heatmap gradcam(Network<T>& net, const GrayImage& input, int class_id, int layer = -1);

/// Mean of the per-tap Grad-CAMs, re-normalised.
template <typename T>
Heatmap gradcam_all_layers(Network<T>& net, const GrayImage& input, int class_id);

/// Blue -> cyan -> green -> yellow -> red ramp for v in [0,1].
std::array<std::uint8_t, 3> ramp_color(double v);

/// 50/50 blend of the ramp-mapped heatmap over the grayscale image. F32 images
/// are min-max scaled to 0..255 first.
ColorImage render_overlay(const Heatmap& heatmap, const GrayImage& img);
/// Writes render_overlay as a binary PPM (P6).
void overlay_export(const Heatmap& heatmap, const GrayImage& img, const std::filesystem::path& path);

/// One CSV row per image row, values with 6 decimals.
std::string heatmap_csv(const Heatmap& heatmap);

}  // namespace dsbias
