// SPDX-License-Identifier: Apache-2.0
#include "dsbias/augment.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <array>
#include <cmath>
#include <string>

#include "dsbias/error.hpp"

namespace dsbias {

namespace {

struct KindInfo {
  AugmentKind kind;
  std::string_view name;
  std::map<std::string, double> defaults;
};

const std::vector<KindInfo>& kind_table() {
  static const std::vector<KindInfo> table = {
      {AugmentKind::GaussianNoise, "gaussian_noise", {{"mean", 0.0}, {"std", 0.1}}},
      {AugmentKind::ShiftIntensity, "shift_intensity", {{"offset", 0.1}}},
      {AugmentKind::StdShiftIntensity, "std_shift_intensity", {{"factor", 0.1}}},
      {AugmentKind::ScaleIntensity, "scale_intensity", {{"factor", 0.1}}},
      {AugmentKind::ScaleIntensityFixedMean, "scale_intensity_fixed_mean", {{"factor", 0.1}}},
      {AugmentKind::AdjustContrast, "adjust_contrast", {{"gamma_lo", 0.5}, {"gamma_hi", 4.5}}},
      {AugmentKind::SavitzkyGolaySmooth, "savitzky_golay_smooth", {{"window", 5}, {"order", 2}}},
      {AugmentKind::GaussianSmooth, "gaussian_smooth", {{"sigma", 1.0}}},
      {AugmentKind::MedianSmooth, "median_smooth", {{"radius", 1}}},
      {AugmentKind::GaussianSharpen, "gaussian_sharpen", {{"sigma", 1.0}, {"alpha_lo", 10.0}, {"alpha_hi", 30.0}}},
      {AugmentKind::HistogramShift, "histogram_shift", {{"control_points", 10}}},
      {AugmentKind::CoarseDropout, "coarse_dropout", {{"holes", 5}, {"size", 32}, {"fill", 0.0}}},
      {AugmentKind::CoarseShuffle, "coarse_shuffle", {{"holes", 5}, {"max_holes", 10}, {"size", 32}}},
      {AugmentKind::MixUp, "mixup", {{"alpha", 1.0}}},
  };
  return table;
}

const KindInfo& info(AugmentKind kind) {
  for (const auto& k : kind_table())
    if (k.kind == kind) return k;
  throw InvalidInput("unknown augmentation kind");
}

// Half-sample symmetric reflection: d c b a | a b c d | d c b a
std::size_t reflect(std::ptrdiff_t i, std::size_t n) {
  const auto len = static_cast<std::ptrdiff_t>(n);
  if (len == 1) return 0;
  const std::ptrdiff_t period = 2 * len;
  i %= period;
  if (i < 0) i += period;
  return static_cast<std::size_t>(i < len ? i : period - 1 - i);
}

bool is_integral(double v) { return std::isfinite(v) && v == std::floor(v); }

std::pair<double, double> mean_std(const GrayImage& img) {
  double m = 0.0;
  for (float v : img.pixels()) m += v;
  m /= static_cast<double>(img.size());
  double s = 0.0;
  for (float v : img.pixels()) s += (v - m) * (v - m);
  return {m, std::sqrt(s / static_cast<double>(img.size()))};
}

GrayImage map_pixels(const GrayImage& img, auto&& fn) {
  GrayImage out = img.as_f32();
  for (auto& v : out.pixels()) v = static_cast<float>(fn(static_cast<double>(v)));
  return out;
}

GrayImage convolve_separable(const GrayImage& img, const std::vector<double>& k) {
  const auto radius = static_cast<std::ptrdiff_t>(k.size() / 2);
  const std::size_t w = img.width(), h = img.height();
  std::vector<double> tmp(w * h);
  for (std::size_t r = 0; r < h; ++r)
    for (std::size_t c = 0; c < w; ++c) {
      double s = 0.0;
      for (std::ptrdiff_t j = -radius; j <= radius; ++j)
        s += k[static_cast<std::size_t>(j + radius)] *
             img.at(r, reflect(static_cast<std::ptrdiff_t>(c) + j, w));
      tmp[r * w + c] = s;
    }
  GrayImage out = GrayImage::f32(w, h);
  for (std::size_t r = 0; r < h; ++r)
    for (std::size_t c = 0; c < w; ++c) {
      double s = 0.0;
      for (std::ptrdiff_t j = -radius; j <= radius; ++j)
        s += k[static_cast<std::size_t>(j + radius)] * tmp[reflect(static_cast<std::ptrdiff_t>(r) + j, h) * w + c];
      out.at(r, c) = static_cast<float>(s);
    }
  return out;
}

struct Hole {
  std::size_t row, col, h, w;
};

Hole random_hole(const GrayImage& img, std::size_t size, Rng& rng) {
  const std::size_t hh = std::min(size, img.height()), ww = std::min(size, img.width());
  const auto r = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(img.height() - hh)));
  const auto c = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(img.width() - ww)));
  return {r, c, hh, ww};
}

GrayImage histogram_shift(const GrayImage& img, int n_points, Rng& rng) {
  auto [mn_it, mx_it] = std::minmax_element(img.pixels().begin(), img.pixels().end());
  const double mn = *mn_it, mx = *mx_it;
  if (mx <= mn) return img.as_f32();
  const auto n = static_cast<std::size_t>(n_points);
  std::vector<double> ref(n), moved(n);
  for (std::size_t i = 0; i < n; ++i) ref[i] = mn + (mx - mn) * static_cast<double>(i) / static_cast<double>(n - 1);
  moved = ref;
  // Interior points are drawn left to right between their (already moved) left
  // neighbour and their fixed right neighbour, so the remap stays monotone.
  for (std::size_t i = 1; i + 1 < n; ++i) moved[i] = rng.uniform(moved[i - 1], moved[i + 1]);
  return map_pixels(img, [&](double v) {
    auto it = std::upper_bound(ref.begin(), ref.end(), v);
    std::size_t hi = static_cast<std::size_t>(it - ref.begin());
    hi = std::clamp<std::size_t>(hi, 1, n - 1);
    const std::size_t lo = hi - 1;
    const double t = (v - ref[lo]) / (ref[hi] - ref[lo]);
    return moved[lo] + std::clamp(t, 0.0, 1.0) * (moved[hi] - moved[lo]);
  });
}

}  // namespace

std::string_view augment_name(AugmentKind kind) { return info(kind).name; }

AugmentKind parse_augment_kind(std::string_view name) {
  for (const auto& k : kind_table())
    if (k.name == name) return k.kind;
  throw ConfigError("unknown augmentation '" + std::string(name) + "'");
}

AugmentSpec AugmentSpec::make(AugmentKind kind, double prob, const std::map<std::string, double>& overrides) {
  AugmentSpec s;
  s.kind = kind;
  s.prob = prob;
  s.params = info(kind).defaults;
  for (const auto& [key, value] : overrides) {
    if (!s.params.contains(key))
      throw ConfigError("augmentation '" + std::string(info(kind).name) + "' has no parameter '" + key + "'");
    s.params[key] = value;
  }
  s.validate();
  return s;
}

double AugmentSpec::param(const std::string& name) const {
  auto it = params.find(name);
  if (it != params.end()) return it->second;
  return info(kind).defaults.at(name);
}

void AugmentSpec::validate() const {
  const std::string name(info(kind).name);
  auto fail = [&](const std::string& why) { throw InvalidInput(name + ": " + why); };
  if (!(prob >= 0.0 && prob <= 1.0)) fail("prob must be in [0,1]");
  for (const auto& [k, v] : params)
    if (!std::isfinite(v)) fail("parameter '" + k + "' is not finite");
  switch (kind) {
    case AugmentKind::GaussianNoise:
      if (param("std") < 0) fail("negative std");
      break;
    case AugmentKind::ShiftIntensity:
      if (param("offset") < 0) fail("negative offset");
      break;
    case AugmentKind::StdShiftIntensity:
    case AugmentKind::ScaleIntensity:
    case AugmentKind::ScaleIntensityFixedMean:
      if (param("factor") < 0) fail("negative factor");
      break;
    case AugmentKind::AdjustContrast:
      if (!(param("gamma_lo") > 0 && param("gamma_lo") <= param("gamma_hi"))) fail("need 0 < gamma_lo <= gamma_hi");
      break;
    case AugmentKind::SavitzkyGolaySmooth: {
      const double w = param("window"), o = param("order");
      if (!is_integral(w) || w < 1 || static_cast<long>(w) % 2 == 0) fail("window must be a positive odd integer");
      if (!is_integral(o) || o < 0 || o >= w) fail("order must be an integer in [0, window)");
      break;
    }
    case AugmentKind::GaussianSmooth:
      if (param("sigma") < 0) fail("negative sigma");
      break;
    case AugmentKind::MedianSmooth:
      if (!is_integral(param("radius")) || param("radius") < 0) fail("radius must be a non-negative integer");
      break;
    case AugmentKind::GaussianSharpen:
      if (param("sigma") < 0) fail("negative sigma");
      if (param("alpha_lo") > param("alpha_hi")) fail("alpha_lo > alpha_hi");
      break;
    case AugmentKind::HistogramShift:
      if (!is_integral(param("control_points")) || param("control_points") < 3) fail("need >= 3 control points");
      break;
    case AugmentKind::CoarseDropout:
      if (!is_integral(param("holes")) || param("holes") < 0) fail("holes must be a non-negative integer");
      if (!is_integral(param("size")) || param("size") < 1) fail("size must be a positive integer");
      break;
    case AugmentKind::CoarseShuffle:
      if (!is_integral(param("holes")) || param("holes") < 0) fail("holes must be a non-negative integer");
      if (!is_integral(param("max_holes")) || param("max_holes") < param("holes")) fail("max_holes < holes");
      if (!is_integral(param("size")) || param("size") < 1) fail("size must be a positive integer");
      break;
    case AugmentKind::MixUp:
      if (!(param("alpha") > 0)) fail("alpha must be > 0");
      break;
  }
}

std::vector<double> savgol_coefficients(int window, int order) {
  if (window < 1 || window % 2 == 0 || order < 0 || order >= window)
    throw InvalidInput("savgol: need odd window and 0 <= order < window");
  const int half = window / 2;
  // Row 0 of the pseudo-inverse of the Vandermonde design matrix evaluates the
  // least-squares polynomial at the window centre.
  Eigen::MatrixXd design(window, order + 1);
  for (int i = 0; i < window; ++i)
    for (int j = 0; j <= order; ++j) design(i, j) = std::pow(static_cast<double>(i - half), j);
  const Eigen::MatrixXd pinv = design.completeOrthogonalDecomposition().pseudoInverse();
  std::vector<double> c(static_cast<std::size_t>(window));
  for (int i = 0; i < window; ++i) c[static_cast<std::size_t>(i)] = pinv(0, i);
  return c;
}

std::vector<double> gaussian_kernel(double sigma) {
  if (sigma < 0) throw InvalidInput("gaussian_kernel: negative sigma");
  if (sigma == 0) return {1.0};
  const auto radius = static_cast<int>(std::ceil(4.0 * sigma));
  std::vector<double> k(static_cast<std::size_t>(2 * radius + 1));
  double sum = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    const double v = std::exp(-0.5 * (i * i) / (sigma * sigma));
    k[static_cast<std::size_t>(i + radius)] = v;
    sum += v;
  }
  for (auto& v : k) v /= sum;
  return k;
}

GrayImage gaussian_blur(const GrayImage& img, double sigma) {
  return convolve_separable(img, gaussian_kernel(sigma));
}

GrayImage savgol_rows(const GrayImage& img, int window, int order) {
  const auto coef = savgol_coefficients(window, order);
  const int half = window / 2;
  GrayImage out = GrayImage::f32(img.width(), img.height());
  for (std::size_t r = 0; r < img.height(); ++r)
    for (std::size_t c = 0; c < img.width(); ++c) {
      double s = 0.0;
      for (int j = -half; j <= half; ++j)
        s += coef[static_cast<std::size_t>(j + half)] *
             img.at(r, reflect(static_cast<std::ptrdiff_t>(c) + j, img.width()));
      out.at(r, c) = static_cast<float>(s);
    }
  return out;
}

GrayImage median_filter(const GrayImage& img, int radius) {
  if (radius < 0) throw InvalidInput("median_filter: negative radius");
  GrayImage out = GrayImage::f32(img.width(), img.height());
  std::vector<float> window;
  window.reserve(static_cast<std::size_t>((2 * radius + 1) * (2 * radius + 1)));
  for (std::size_t r = 0; r < img.height(); ++r)
    for (std::size_t c = 0; c < img.width(); ++c) {
      window.clear();
      for (int dr = -radius; dr <= radius; ++dr)
        for (int dc = -radius; dc <= radius; ++dc)
          window.push_back(img.at(reflect(static_cast<std::ptrdiff_t>(r) + dr, img.height()),
                                  reflect(static_cast<std::ptrdiff_t>(c) + dc, img.width())));
      auto mid = window.begin() + static_cast<std::ptrdiff_t>(window.size() / 2);
      std::nth_element(window.begin(), mid, window.end());
      out.at(r, c) = *mid;
    }
  return out;
}

GrayImage apply_augmentation(const AugmentSpec& spec, const GrayImage& img, Rng& rng) {
  spec.validate();
  if (spec.kind == AugmentKind::MixUp) throw InvalidInput("mixup acts on batches, not single images");
  if (img.empty()) throw InvalidInput("apply_augmentation: empty image");
  // The probability draw is made unconditionally so the stream position does
  // not depend on spec.prob.
  if (!(rng.uniform() < spec.prob)) return img.as_f32();

  switch (spec.kind) {
    case AugmentKind::GaussianNoise: {
      const double mean = spec.param("mean"), sd = spec.param("std");
      if (sd == 0.0) return map_pixels(img, [&](double v) { return v + mean; });
      return map_pixels(img, [&](double v) { return v + rng.normal(mean, sd); });
    }
    case AugmentKind::ShiftIntensity: {
      const double o = spec.param("offset");
      const double u = rng.uniform(-o, o);
      return map_pixels(img, [&](double v) { return v + u; });
    }
    case AugmentKind::StdShiftIntensity: {
      const double f = spec.param("factor");
      const double shift = rng.uniform(-f, f) * mean_std(img).second;
      return map_pixels(img, [&](double v) { return v + shift; });
    }
    case AugmentKind::ScaleIntensity: {
      const double f = spec.param("factor");
      const double s = 1.0 + rng.uniform(-f, f);
      return map_pixels(img, [&](double v) { return v * s; });
    }
    case AugmentKind::ScaleIntensityFixedMean: {
      const double f = spec.param("factor");
      const double s = 1.0 + rng.uniform(-f, f);
      const double m = mean_std(img).first;
      return map_pixels(img, [&](double v) { return m + (v - m) * s; });
    }
    case AugmentKind::AdjustContrast: {
      const double gamma = rng.uniform(spec.param("gamma_lo"), spec.param("gamma_hi"));
      auto [mn_it, mx_it] = std::minmax_element(img.pixels().begin(), img.pixels().end());
      const double mn = *mn_it, range = *mx_it - *mn_it;
      if (range <= 0) return img.as_f32();
      return map_pixels(img, [&](double v) { return std::pow((v - mn) / range, gamma) * range + mn; });
    }
    case AugmentKind::SavitzkyGolaySmooth:
      return savgol_rows(img, static_cast<int>(spec.param("window")), static_cast<int>(spec.param("order")));
    case AugmentKind::GaussianSmooth:
      return gaussian_blur(img, spec.param("sigma"));
    case AugmentKind::MedianSmooth:
      return median_filter(img, static_cast<int>(spec.param("radius")));
    case AugmentKind::GaussianSharpen: {
      const double alpha = rng.uniform(spec.param("alpha_lo"), spec.param("alpha_hi"));
      const GrayImage blurred = gaussian_blur(img, spec.param("sigma"));
      GrayImage out = img.as_f32();
      for (std::size_t i = 0; i < out.size(); ++i) {
        const double v = img.pixels()[i];
        out.pixels()[i] = static_cast<float>(v + alpha * (v - blurred.pixels()[i]));
      }
      return out;
    }
    case AugmentKind::HistogramShift:
      return histogram_shift(img, static_cast<int>(spec.param("control_points")), rng);
    case AugmentKind::CoarseDropout: {
      GrayImage out = img.as_f32();
      const auto fill = static_cast<float>(spec.param("fill"));
      const auto size = static_cast<std::size_t>(spec.param("size"));
      for (int k = 0; k < static_cast<int>(spec.param("holes")); ++k) {
        const Hole hole = random_hole(img, size, rng);
        for (std::size_t r = 0; r < hole.h; ++r)
          for (std::size_t c = 0; c < hole.w; ++c) out.at(hole.row + r, hole.col + c) = fill;
      }
      return out;
    }
    case AugmentKind::CoarseShuffle: {
      GrayImage out = img.as_f32();
      const auto size = static_cast<std::size_t>(spec.param("size"));
      const auto n_holes = rng.uniform_int(static_cast<std::int64_t>(spec.param("holes")),
                                           static_cast<std::int64_t>(spec.param("max_holes")));
      std::vector<float> buf;
      for (std::int64_t k = 0; k < n_holes; ++k) {
        const Hole hole = random_hole(img, size, rng);
        buf.clear();
        for (std::size_t r = 0; r < hole.h; ++r)
          for (std::size_t c = 0; c < hole.w; ++c) buf.push_back(out.at(hole.row + r, hole.col + c));
        const auto perm = rng.permutation(buf.size());
        std::size_t i = 0;
        for (std::size_t r = 0; r < hole.h; ++r)
          for (std::size_t c = 0; c < hole.w; ++c) out.at(hole.row + r, hole.col + c) = buf[perm[i++]];
      }
      return out;
    }
    case AugmentKind::MixUp:
      break;
  }
  return img.as_f32();
}

AugmentPipeline AugmentPipeline::preset13(double noise_prob, bool scale_all, std::uint64_t seed) {
  AugmentPipeline p;
  p.seed = seed;
  const double other = scale_all ? noise_prob : 0.5;
  p.specs.push_back(AugmentSpec::make(AugmentKind::GaussianNoise, noise_prob));
  for (AugmentKind k : {AugmentKind::ShiftIntensity, AugmentKind::StdShiftIntensity, AugmentKind::ScaleIntensity,
                        AugmentKind::ScaleIntensityFixedMean, AugmentKind::AdjustContrast,
                        AugmentKind::SavitzkyGolaySmooth, AugmentKind::GaussianSmooth, AugmentKind::MedianSmooth,
                        AugmentKind::GaussianSharpen, AugmentKind::HistogramShift, AugmentKind::CoarseDropout,
                        AugmentKind::CoarseShuffle})
    p.specs.push_back(AugmentSpec::make(k, other));
  return p;
}

GrayImage AugmentPipeline::apply(const GrayImage& img, Rng& rng) const {
  GrayImage out = img.as_f32();
  for (const auto& s : specs) out = apply_augmentation(s, out, rng);
  return out;
}

GrayImage AugmentPipeline::apply(const GrayImage& img, std::uint64_t epoch, std::uint64_t index) const {
  Rng rng = Rng::derive(seed, {epoch, index});
  return apply(img, rng);
}

MixedBatch mixup(const LabeledBatch& a, const LabeledBatch& b, std::vector<double> lambdas) {
  if (a.images.size() != b.images.size() || a.labels.size() != a.images.size() ||
      b.labels.size() != b.images.size() || lambdas.size() != a.images.size())
    throw InvalidInput("mixup: batch sizes differ");
  MixedBatch out;
  out.labels_a = a.labels;
  out.labels_b = b.labels;
  for (std::size_t i = 0; i < a.images.size(); ++i) {
    const GrayImage& x = a.images[i];
    const GrayImage& y = b.images[i];
    if (x.width() != y.width() || x.height() != y.height()) throw InvalidInput("mixup: image shapes differ");
    const double lam = lambdas[i];
    GrayImage m = GrayImage::f32(x.width(), x.height());
    for (std::size_t p = 0; p < m.size(); ++p)
      m.pixels()[p] = static_cast<float>(lam * x.pixels()[p] + (1.0 - lam) * y.pixels()[p]);
    out.images.push_back(std::move(m));
  }
  out.lambdas = std::move(lambdas);
  return out;
}

MixedBatch mixup(const LabeledBatch& a, const LabeledBatch& b, double alpha, Rng& rng) {
  if (!(alpha > 0)) throw InvalidInput("mixup: alpha must be > 0");
  if (a.images.size() != b.images.size()) throw InvalidInput("mixup: batch sizes differ");
  std::vector<double> lambdas(a.images.size());
  for (auto& l : lambdas) l = rng.beta(alpha, alpha);
  return mixup(a, b, std::move(lambdas));
}

}  // namespace dsbias
