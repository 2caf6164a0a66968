// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "dsbias/image.hpp"
#include "dsbias/rng.hpp"

namespace dsbias {

/// Intensity and texture augmentations. Everything except MixUp acts on one
/// image; MixUp acts on pairs of batches and is applied by the trainer.
enum class AugmentKind {
  GaussianNoise,
  ShiftIntensity,
  StdShiftIntensity,
  ScaleIntensity,
  ScaleIntensityFixedMean,
  AdjustContrast,
  SavitzkyGolaySmooth,
  GaussianSmooth,
  MedianSmooth,
  GaussianSharpen,
  HistogramShift,
  CoarseDropout,
  CoarseShuffle,
  MixUp,
};

std::string_view augment_name(AugmentKind kind);
AugmentKind parse_augment_kind(std::string_view name);

struct AugmentSpec {
  AugmentKind kind = AugmentKind::GaussianNoise;
  double prob = 0.5;
  std::map<std::string, double> params;  // filled with the kind's defaults

  /// Spec for `kind` with default parameters, optionally overridden.
  static AugmentSpec make(AugmentKind kind, double prob = 0.5,
                          const std::map<std::string, double>& overrides = {});
  double param(const std::string& name) const;
  /// Throws InvalidInput when prob or a parameter is outside its domain.
  void validate() const;
};

/// Applies `spec` with probability spec.prob, otherwise returns `img` as is.
GrayImage apply_augmentation(const AugmentSpec& spec, const GrayImage& img, Rng& rng);

/// Ordered per-image augmentations, deterministic in (seed, stream ids).
struct AugmentPipeline {
  std::vector<AugmentSpec> specs;
  std::uint64_t seed = 0;

  /// The 13 per-image transforms. `noise_prob` is the pipeline-level P used by
  /// Gaussian noise; with `scale_all` every transform uses P instead of 0.5.
  static AugmentPipeline preset13(double noise_prob, bool scale_all, std::uint64_t seed);

  bool empty() const { return specs.empty(); }
  GrayImage apply(const GrayImage& img, std::uint64_t epoch, std::uint64_t index) const;
  GrayImage apply(const GrayImage& img, Rng& rng) const;
};

// Filters shared by several transforms, exposed for testing.
std::vector<double> savgol_coefficients(int window, int order);
std::vector<double> gaussian_kernel(double sigma);
GrayImage gaussian_blur(const GrayImage& img, double sigma);
GrayImage savgol_rows(const GrayImage& img, int window, int order);
GrayImage median_filter(const GrayImage& img, int radius);

struct LabeledBatch {
  std::vector<GrayImage> images;
  std::vector<int> labels;
};

struct MixedBatch {
  std::vector<GrayImage> images;
  std::vector<int> labels_a;
  std::vector<int> labels_b;
  std::vector<double> lambdas;  // weight of the `a` term per pair
};

/// Convex combination lambda*a + (1-lambda)*b with lambda ~ Beta(alpha, alpha).
MixedBatch mixup(const LabeledBatch& a, const LabeledBatch& b, double alpha, Rng& rng);
/// Same with caller-provided mixing weights.
MixedBatch mixup(const LabeledBatch& a, const LabeledBatch& b, std::vector<double> lambdas);

}  // namespace dsbias
