// SPDX-License-Identifier: Apache-2.0
#include "dsbias/explain.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "dsbias/error.hpp"
#include "dsbias/imaging.hpp"

namespace dsbias {

namespace {

// Forward and backward for d logit[class] / d input; returns the taps.
template <typename T>
std::vector<FeatureTap<T>> backprop_class(Network<T>& net, const GrayImage& input, int class_id) {
  if (input.empty()) throw InvalidInput("gradcam: empty input");
  Tensor<T> x({1, 1, input.height(), input.width()});
  for (std::size_t i = 0; i < input.size(); ++i) x[i] = static_cast<T>(input.pixels()[i]);
  const Tensor<T> logits = net.forward(x);
  if (class_id < 0 || static_cast<std::size_t>(class_id) >= logits.dim(1))
    throw InvalidInput("gradcam: class " + std::to_string(class_id) + " out of range");
  Tensor<T> g(logits.shape());
  g[static_cast<std::size_t>(class_id)] = T(1);
  net.zero_grad();
  net.backward(g);
  auto taps = net.feature_taps();
  if (taps.empty()) throw InvalidInput("gradcam: model has no convolutional feature layer");
  return taps;
}

// Rectified weighted channel sum, upsampled to the input size.
template <typename T>
std::vector<double> upsampled_cam(const FeatureTap<T>& tap, std::size_t out_w, std::size_t out_h) {
  const Tensor<T>& a = *tap.activation;
  const Tensor<T>& g = *tap.gradient;
  if (a.rank() != 4 || g.shape() != a.shape()) throw InvalidInput("gradcam: tap '" + tap.name + "' has no gradient");
  const std::size_t k = a.dim(1), h = a.dim(2), w = a.dim(3), hw = h * w;
  std::vector<double> cam(hw, 0.0);
  for (std::size_t c = 0; c < k; ++c) {
    double wk = 0.0;
    for (std::size_t i = 0; i < hw; ++i) wk += static_cast<double>(g[c * hw + i]);
    wk /= static_cast<double>(hw);
    for (std::size_t i = 0; i < hw; ++i) cam[i] += wk * static_cast<double>(a[c * hw + i]);
  }
  GrayImage small = GrayImage::f32(w, h);
  for (std::size_t i = 0; i < hw; ++i) small.pixels()[i] = static_cast<float>(std::max(0.0, cam[i]));
  const GrayImage up = resize_bilinear(small, out_w, out_h);
  return {up.pixels().begin(), up.pixels().end()};
}

}  // namespace

Heatmap normalize_heatmap(std::size_t width, std::size_t height, std::vector<double> values) {
  if (values.size() != width * height) throw InvalidInput("heatmap: size mismatch");
  Heatmap h{width, height, std::move(values), false, false};
  if (h.values.empty()) throw InvalidInput("heatmap: empty");
  const auto [mn_it, mx_it] = std::minmax_element(h.values.begin(), h.values.end());
  const double mn = *mn_it, mx = *mx_it;
  if (!(mx > 0.0)) {
    h.degenerate = true;
    std::fill(h.values.begin(), h.values.end(), 0.0);
  } else if (mx - mn <= 1e-12 * mx) {
    h.uniform = true;
    std::fill(h.values.begin(), h.values.end(), 1.0);
  } else {
    for (auto& v : h.values) v = (v - mn) / (mx - mn);
  }
  return h;
}

template <typename T>
Heatmap gradcam(Network<T>& net, const GrayImage& input, int class_id, int layer) {
  const auto taps = backprop_class(net, input, class_id);
  const int n = static_cast<int>(taps.size());
  if (layer == -1) layer = n - 1;
  if (layer < 0 || layer >= n)
    throw InvalidInput("gradcam: layer " + std::to_string(layer) + " not in 0.." + std::to_string(n - 1));
  return normalize_heatmap(input.width(), input.height(),
                           upsampled_cam(taps[static_cast<std::size_t>(layer)], input.width(), input.height()));
}

template <typename T>
Heatmap gradcam_all_layers(Network<T>& net, const GrayImage& input, int class_id) {
  const auto taps = backprop_class(net, input, class_id);
  std::vector<double> acc(input.size(), 0.0);
  for (const auto& tap : taps) {
    const Heatmap h = normalize_heatmap(input.width(), input.height(), upsampled_cam(tap, input.width(), input.height()));
    for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += h.values[i];
  }
  for (auto& v : acc) v /= static_cast<double>(taps.size());
  return normalize_heatmap(input.width(), input.height(), std::move(acc));
}

std::array<std::uint8_t, 3> ramp_color(double v) {
  static constexpr double stops[5][3] = {{0, 0, 255}, {0, 255, 255}, {0, 255, 0}, {255, 255, 0}, {255, 0, 0}};
  v = std::clamp(std::isfinite(v) ? v : 0.0, 0.0, 1.0) * 4.0;
  const int i = std::min(3, static_cast<int>(v));
  const double t = v - i;
  std::array<std::uint8_t, 3> out{};
  for (int c = 0; c < 3; ++c)
    out[static_cast<std::size_t>(c)] = static_cast<std::uint8_t>(std::lround(stops[i][c] + t * (stops[i + 1][c] - stops[i][c])));
  return out;
}

ColorImage render_overlay(const Heatmap& heatmap, const GrayImage& img) {
  if (heatmap.width != img.width() || heatmap.height != img.height())
    throw InvalidInput("overlay: heatmap and image dimensions differ");
  GrayImage gray = img;
  if (img.domain() == PixelDomain::F32) {
    const auto [mn, mx] = std::minmax_element(img.pixels().begin(), img.pixels().end());
    const float lo = *mn, range = *mx - *mn;
    for (auto& v : gray.pixels()) v = range > 0 ? (v - lo) / range * 255.0f : 0.0f;
  }
  ColorImage out{img.width(), img.height(), std::vector<std::uint8_t>(img.size() * 3)};
  for (std::size_t i = 0; i < img.size(); ++i) {
    const auto rgb = ramp_color(heatmap.values[i]);
    const double g = std::clamp(static_cast<double>(gray.pixels()[i]), 0.0, 255.0);
    for (std::size_t c = 0; c < 3; ++c)
      out.rgb[i * 3 + c] = static_cast<std::uint8_t>(std::lround(0.5 * g + 0.5 * rgb[c]));
  }
  return out;
}

void overlay_export(const Heatmap& heatmap, const GrayImage& img, const std::filesystem::path& path) {
  write_ppm(render_overlay(heatmap, img), path);
}

std::string heatmap_csv(const Heatmap& heatmap) {
  std::string out;
  char buf[32];
  for (std::size_t r = 0; r < heatmap.height; ++r) {
    for (std::size_t c = 0; c < heatmap.width; ++c) {
      std::snprintf(buf, sizeof buf, c ? ",%.6f" : "%.6f", heatmap.at(r, c));
      out += buf;
    }
    out += "\n";
  }
  return out;
}

template Heatmap gradcam<float>(Network<float>&, const GrayImage&, int, int);
template Heatmap gradcam<double>(Network<double>&, const GrayImage&, int, int);
template Heatmap gradcam_all_layers<float>(Network<float>&, const GrayImage&, int);
template Heatmap gradcam_all_layers<double>(Network<double>&, const GrayImage&, int);

}  // namespace dsbias
