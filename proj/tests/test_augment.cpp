// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>

#include "dsbias/augment.hpp"
#include "dsbias/error.hpp"
#include "dsbias/imaging.hpp"
#include "helpers.hpp"

using namespace dsbias;
using dsbias::testing::random_f32;

namespace {

double mean_of(const GrayImage& img) {
  double s = 0;
  for (float v : img.pixels()) s += v;
  return s / static_cast<double>(img.size());
}

std::vector<float> sorted_pixels(const GrayImage& g) {
  std::vector<float> v(g.pixels().begin(), g.pixels().end());
  std::sort(v.begin(), v.end());
  return v;
}

AugmentSpec always(AugmentKind k, const std::map<std::string, double>& p = {}) { return AugmentSpec::make(k, 1.0, p); }

const AugmentKind kPerImage[] = {
    AugmentKind::GaussianNoise,       AugmentKind::ShiftIntensity,  AugmentKind::StdShiftIntensity,
    AugmentKind::ScaleIntensity,      AugmentKind::ScaleIntensityFixedMean, AugmentKind::AdjustContrast,
    AugmentKind::SavitzkyGolaySmooth, AugmentKind::GaussianSmooth,  AugmentKind::MedianSmooth,
    AugmentKind::GaussianSharpen,     AugmentKind::HistogramShift,  AugmentKind::CoarseDropout,
    AugmentKind::CoarseShuffle};

}  // namespace

TEST_CASE("augmentation names round-trip") {
  for (AugmentKind k : kPerImage) CHECK(parse_augment_kind(augment_name(k)) == k);
  CHECK(parse_augment_kind("mixup") == AugmentKind::MixUp);
  CHECK_THROWS_AS(parse_augment_kind("rotate"), ConfigError);
}

TEST_CASE("defaults follow the transform list") {
  CHECK(AugmentSpec::make(AugmentKind::ShiftIntensity).param("offset") == 0.1);
  CHECK(AugmentSpec::make(AugmentKind::StdShiftIntensity).param("factor") == 0.1);
  CHECK(AugmentSpec::make(AugmentKind::ScaleIntensity).param("factor") == 0.1);
  CHECK(AugmentSpec::make(AugmentKind::ScaleIntensityFixedMean).param("factor") == 0.1);
  CHECK(AugmentSpec::make(AugmentKind::SavitzkyGolaySmooth).param("window") == 5);
  CHECK(AugmentSpec::make(AugmentKind::SavitzkyGolaySmooth).param("order") == 2);
  CHECK(AugmentSpec::make(AugmentKind::GaussianSmooth).param("sigma") == 1.0);
  CHECK(AugmentSpec::make(AugmentKind::MedianSmooth).param("radius") == 1);
  CHECK(AugmentSpec::make(AugmentKind::HistogramShift).param("control_points") == 10);
  CHECK(AugmentSpec::make(AugmentKind::CoarseDropout).param("holes") == 5);
  CHECK(AugmentSpec::make(AugmentKind::CoarseDropout).param("size") == 32);
  CHECK(AugmentSpec::make(AugmentKind::CoarseShuffle).param("max_holes") == 10);
  CHECK(AugmentSpec::make(AugmentKind::MixUp).param("alpha") == 1.0);
  CHECK(AugmentSpec::make(AugmentKind::GaussianNoise).prob == 0.5);
}

TEST_CASE("invalid parameters are rejected") {
  CHECK_THROWS_AS(AugmentSpec::make(AugmentKind::GaussianSmooth, 0.5, {{"sigma", -1}}), InvalidInput);
  CHECK_THROWS_AS(AugmentSpec::make(AugmentKind::SavitzkyGolaySmooth, 0.5, {{"window", 4}}), InvalidInput);
  CHECK_THROWS_AS(AugmentSpec::make(AugmentKind::SavitzkyGolaySmooth, 0.5, {{"order", 5}}), InvalidInput);
  CHECK_THROWS_AS(AugmentSpec::make(AugmentKind::GaussianNoise, 1.5), InvalidInput);
  CHECK_THROWS_AS(AugmentSpec::make(AugmentKind::GaussianNoise, 0.5, {{"sigma", 1}}), ConfigError);
  CHECK_THROWS_AS(savgol_coefficients(6, 2), InvalidInput);
  Rng rng(0);
  CHECK_THROWS_AS(apply_augmentation(AugmentSpec::make(AugmentKind::MixUp), GrayImage::f32(2, 2), rng), InvalidInput);
}

TEST_CASE("prob 0 is identity and prob 1 always applies") {
  Rng rng(30);
  const GrayImage img = random_f32(16, 16, rng, 0, 1);
  for (AugmentKind k : kPerImage) {
    Rng r(1);
    CHECK(apply_augmentation(AugmentSpec::make(k, 0.0), img, r) == img);
  }
  Rng r(2);
  CHECK_FALSE(apply_augmentation(always(AugmentKind::ShiftIntensity), img, r) == img);
}

TEST_CASE("GaussianNoise with sigma 0 is identity") {
  Rng rng(31);
  const GrayImage img = random_f32(9, 9, rng);
  CHECK(apply_augmentation(always(AugmentKind::GaussianNoise, {{"std", 0.0}}), img, rng) == img);
}

TEST_CASE("GaussianNoise has the configured moments") {
  Rng rng(32);
  const GrayImage zero = GrayImage::f32(200, 200);
  const GrayImage out = apply_augmentation(always(AugmentKind::GaussianNoise, {{"std", 0.5}}), zero, rng);
  double m = 0, s = 0;
  for (float v : out.pixels()) m += v;
  m /= 40000;
  for (float v : out.pixels()) s += (v - m) * (v - m);
  CHECK(std::abs(m) < 0.01);
  CHECK(std::sqrt(s / 40000) == doctest::Approx(0.5).epsilon(0.02));
}

TEST_CASE("intensity shifts and scales are single-draw affine maps within bounds") {
  Rng rng(33);
  const GrayImage img = random_f32(10, 10, rng, 0.2, 0.8);
  for (int t = 0; t < 20; ++t) {
    const GrayImage s = apply_augmentation(always(AugmentKind::ShiftIntensity), img, rng);
    const double d = s.pixels()[0] - img.pixels()[0];
    CHECK(std::abs(d) <= 0.1 + 1e-6);
    for (std::size_t i = 0; i < img.size(); ++i) CHECK(s.pixels()[i] - img.pixels()[i] == doctest::Approx(d).epsilon(1e-4));

    const GrayImage sc = apply_augmentation(always(AugmentKind::ScaleIntensity), img, rng);
    const double f = sc.pixels()[0] / img.pixels()[0];
    CHECK(std::abs(f - 1.0) <= 0.1 + 1e-5);
  }
}

TEST_CASE("ScaleIntensityFixedMean preserves the image mean") {
  Rng rng(34);
  for (int t = 0; t < 50; ++t) {
    const GrayImage img = random_f32(16, 16, rng, -1, 3);
    const GrayImage out = apply_augmentation(always(AugmentKind::ScaleIntensityFixedMean, {{"factor", 0.5}}), img, rng);
    CHECK(std::abs(mean_of(out) - mean_of(img)) < 1e-5);
  }
}

TEST_CASE("AdjustContrast keeps the intensity range") {
  Rng rng(35);
  const GrayImage img = random_f32(12, 12, rng, 2, 5);
  const GrayImage out = apply_augmentation(always(AugmentKind::AdjustContrast), img, rng);
  const auto [a, b] = std::minmax_element(img.pixels().begin(), img.pixels().end());
  const auto [c, d] = std::minmax_element(out.pixels().begin(), out.pixels().end());
  CHECK(*c == doctest::Approx(*a).epsilon(1e-5));
  CHECK(*d == doctest::Approx(*b).epsilon(1e-5));
}

TEST_CASE("Savitzky-Golay (5,2) coefficients match a direct least-squares solve") {
  const auto c = savgol_coefficients(5, 2);
  const double expect[] = {-3, 12, 17, 12, -3};
  for (int i = 0; i < 5; ++i) CHECK(std::abs(c[static_cast<std::size_t>(i)] - expect[i] / 35.0) < 1e-9);

  // Independent route: normal equations (A^T A) beta = A^T y for each unit impulse y.
  Eigen::Matrix<double, 5, 3> a;
  for (int i = 0; i < 5; ++i)
    for (int j = 0; j < 3; ++j) a(i, j) = std::pow(i - 2.0, j);
  const Eigen::Matrix3d ata = a.transpose() * a;
  for (int i = 0; i < 5; ++i) {
    Eigen::Matrix<double, 5, 1> y = Eigen::Matrix<double, 5, 1>::Zero();
    y(i) = 1;
    const Eigen::Vector3d beta = ata.ldlt().solve(a.transpose() * y);
    CHECK(std::abs(beta(0) - c[static_cast<std::size_t>(i)]) < 1e-12);
  }
  double s = 0;
  for (double v : savgol_coefficients(7, 3)) s += v;
  CHECK(s == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("Savitzky-Golay reproduces quadratic rows in the interior") {
  GrayImage img = GrayImage::f32(20, 3);
  for (std::size_t r = 0; r < 3; ++r)
    for (std::size_t c = 0; c < 20; ++c) {
      const double x = static_cast<double>(c) / 10.0;
      img.at(r, c) = static_cast<float>(0.3 - 0.7 * x + 0.25 * x * x + 0.1 * static_cast<double>(r));
    }
  Rng rng(0);
  const GrayImage out = apply_augmentation(always(AugmentKind::SavitzkyGolaySmooth), img, rng);
  for (std::size_t r = 0; r < 3; ++r)
    for (std::size_t c = 2; c + 2 < 20; ++c) CHECK(std::abs(out.at(r, c) - img.at(r, c)) < 1e-6);
}

TEST_CASE("Gaussian kernel is normalised and preserves constants") {
  for (double sigma : {0.5, 1.0, 2.5}) {
    const auto k = gaussian_kernel(sigma);
    CHECK(k.size() == 2 * static_cast<std::size_t>(std::ceil(4 * sigma)) + 1);
    double s = 0;
    for (double v : k) s += v;
    CHECK(std::abs(s - 1.0) < 1e-7);
  }
  const GrayImage c = GrayImage::f32(11, 7, 3.25f);
  const GrayImage b = gaussian_blur(c, 1.0);
  for (float v : b.pixels()) CHECK(v == doctest::Approx(3.25f).epsilon(1e-7));
}

TEST_CASE("median filter removes isolated spikes and keeps constants") {
  GrayImage img = GrayImage::f32(7, 7, 1.0f);
  img.at(3, 3) = 100.0f;
  const GrayImage out = median_filter(img, 1);
  for (float v : out.pixels()) CHECK(v == 1.0f);
}

TEST_CASE("GaussianSharpen leaves constant images unchanged") {
  Rng rng(36);
  const GrayImage c = GrayImage::f32(9, 9, 0.4f);
  const GrayImage out = apply_augmentation(always(AugmentKind::GaussianSharpen), c, rng);
  for (float v : out.pixels()) CHECK(v == doctest::Approx(0.4f).epsilon(1e-5));
}

TEST_CASE("HistogramShift is monotone and anchored") {
  Rng rng(37);
  for (int t = 0; t < 30; ++t) {
    const GrayImage img = random_f32(16, 16, rng, 0, 1);
    const GrayImage out = apply_augmentation(always(AugmentKind::HistogramShift), img, rng);
    std::vector<std::pair<float, float>> pairs;
    for (std::size_t i = 0; i < img.size(); ++i) pairs.push_back({img.pixels()[i], out.pixels()[i]});
    std::sort(pairs.begin(), pairs.end());
    for (std::size_t i = 1; i < pairs.size(); ++i)
      if (pairs[i].first > pairs[i - 1].first) CHECK(pairs[i].second >= pairs[i - 1].second - 1e-6f);
    CHECK(pairs.front().second == doctest::Approx(pairs.front().first).epsilon(1e-5));
    CHECK(pairs.back().second == doctest::Approx(pairs.back().first).epsilon(1e-5));
  }
}

TEST_CASE("CoarseDropout zeroes at most holes * size^2 pixels") {
  Rng rng(38);
  const GrayImage img = GrayImage::f32(64, 64, 1.0f);
  const GrayImage out = apply_augmentation(always(AugmentKind::CoarseDropout, {{"size", 8}}), img, rng);
  const auto zeros = std::count(out.pixels().begin(), out.pixels().end(), 0.0f);
  CHECK(zeros >= 64);
  CHECK(zeros <= 5 * 64);
}

TEST_CASE("CoarseShuffle preserves the histogram") {
  Rng rng(39);
  for (int t = 0; t < 20; ++t) {
    const GrayImage img = random_f32(40, 40, rng);
    const GrayImage out = apply_augmentation(always(AugmentKind::CoarseShuffle, {{"size", 8}}), img, rng);
    CHECK(sorted_pixels(out) == sorted_pixels(img));
    CHECK_FALSE(out == img);
  }
}

TEST_CASE("pipelines are deterministic in seed and stream") {
  Rng rng(40);
  const GrayImage img = random_f32(48, 48, rng, 0, 1);
  const AugmentPipeline p = AugmentPipeline::preset13(0.5, false, 123);
  CHECK(p.specs.size() == 13);
  CHECK(p.specs[0].kind == AugmentKind::GaussianNoise);
  const GrayImage a = p.apply(img, 3, 7), b = p.apply(img, 3, 7);
  CHECK(a == b);
  CHECK_FALSE(p.apply(img, 3, 8) == a);
  const AugmentPipeline q = AugmentPipeline::preset13(0.2, true, 123);
  for (const auto& s : q.specs) CHECK(s.prob == 0.2);
  const AugmentPipeline n = AugmentPipeline::preset13(0.2, false, 123);
  CHECK(n.specs[0].prob == 0.2);
  for (std::size_t i = 1; i < n.specs.size(); ++i) CHECK(n.specs[i].prob == 0.5);
}

TEST_CASE("mixup examples") {
  LabeledBatch a{{GrayImage::f32(4, 4, 0.0f), GrayImage::f32(4, 4, 2.0f)}, {0, 1}};
  LabeledBatch b{{GrayImage::f32(4, 4, 100.0f), GrayImage::f32(4, 4, 4.0f)}, {2, 3}};
  const MixedBatch one = mixup(a, b, std::vector<double>{1.0, 1.0});
  CHECK(one.images[0] == a.images[0]);
  CHECK(one.images[1] == a.images[1]);
  const MixedBatch half = mixup(a, b, std::vector<double>{0.5, 0.5});
  for (float v : half.images[0].pixels()) CHECK(v == 50.0f);
  CHECK(half.labels_a == a.labels);
  CHECK(half.labels_b == b.labels);
  LabeledBatch c{{GrayImage::f32(3, 4)}, {0}};
  Rng rng(0);
  CHECK_THROWS_AS(mixup(a, c, 1.0, rng), InvalidInput);
  CHECK_THROWS_AS(mixup(a, b, 0.0, rng), InvalidInput);
}

TEST_CASE("Beta(1,1) mixing weights are uniform (KS statistic)") {
  Rng rng(41);
  std::vector<double> x(100000);
  for (auto& v : x) v = rng.beta(1.0, 1.0);
  std::sort(x.begin(), x.end());
  double d = 0;
  const double n = static_cast<double>(x.size());
  for (std::size_t i = 0; i < x.size(); ++i)
    d = std::max({d, std::abs(static_cast<double>(i + 1) / n - x[i]), std::abs(x[i] - static_cast<double>(i) / n)});
  CHECK(d < 0.01);
}
