// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "dsbias/error.hpp"
#include "dsbias/imaging.hpp"
#include "dsbias/stats.hpp"
#include "dsbias/synth.hpp"
#include "helpers.hpp"
#include "oracles.hpp"

using namespace dsbias;

namespace {

MaskSet random_masks(std::size_t w, std::size_t h, Rng& rng) {
  MaskSet ms(w, h);
  for (int id = 1; id <= kNumPlanes; ++id) ms.plane(id) = dsbias::testing::random_mask(w, h, rng, rng.uniform(0, 0.3));
  return ms;
}

}  // namespace

TEST_CASE("class pixel fractions") {
  MaskSet ms(4, 4);
  auto f = class_pixel_fraction(ms);
  CHECK(f[0] == 1.0);
  for (std::size_t c = 1; c < kNumClasses; ++c) CHECK(f[c] == 0.0);
  for (std::size_t c = 0; c < 4; ++c) ms.plane(5).at(0, c) = 1;
  f = class_pixel_fraction(ms);
  CHECK(f[5] == 0.25);
  CHECK(f[0] == 0.75);

  Rng rng(60);
  for (int t = 0; t < 20; ++t) {
    const MaskSet r = random_masks(8, 8, rng);
    const auto fr = class_pixel_fraction(r);
    std::size_t uncovered = 0;
    for (std::size_t i = 0; i < 64; ++i) {
      bool any = false;
      for (int id = 1; id <= kNumPlanes; ++id) any = any || r.plane(id).bits[i];
      uncovered += any ? 0 : 1;
    }
    CHECK(fr[0] == static_cast<double>(uncovered) / 64.0);
    for (int id = 1; id <= kNumPlanes; ++id) {
      std::size_t n = 0;
      for (auto b : r.plane(id).bits) n += b;
      CHECK(fr[static_cast<std::size_t>(id)] == static_cast<double>(n) / 64.0);
    }
  }
}

TEST_CASE("non-overlapping planes partition the image") {
  Rng rng(61);
  MaskSet ms(10, 10);
  for (std::size_t i = 0; i < 100; ++i) {
    const auto id = static_cast<int>(rng.uniform_int(0, kNumPlanes));
    if (id > 0) ms.plane(id).bits[i] = 1;
  }
  const auto f = class_pixel_fraction(ms);
  double s = 0;
  for (double v : f) s += v;
  CHECK(std::abs(s - 1.0) < 1e-9);
}

TEST_CASE("summary statistics examples") {
  const Summary one = summarize({25.0});
  CHECK(one.mean == 25.0);
  CHECK(one.std == 0.0);
  CHECK(one.median == 25.0);
  CHECK(one.iqr() == 0.0);
  const Summary three = summarize({30.0, 10.0, 20.0});
  CHECK(three.mean == doctest::Approx(20.0));
  CHECK(three.median == 20.0);
  CHECK(three.q1 == 15.0);
  CHECK(three.q3 == 25.0);
  const Summary four = summarize({1, 2, 3, 4});
  CHECK(four.median == 2.5);
  CHECK(four.q1 == 1.75);
  CHECK(four.std == doctest::Approx(std::sqrt(1.25)));
  CHECK_THROWS_AS(summarize({}), InvalidInput);
}

TEST_CASE("quantiles agree with the textbook definition") {
  Rng rng(62);
  for (int t = 0; t < 200; ++t) {
    std::vector<double> x(static_cast<std::size_t>(rng.uniform_int(1, 40)));
    for (auto& v : x) v = rng.uniform(0, 100);
    const Summary s = summarize(x);
    CHECK(std::abs(s.q1 - dsbias::testing::hf7_quantile(x, 0.25)) < 1e-9);
    CHECK(std::abs(s.median - dsbias::testing::hf7_quantile(x, 0.5)) < 1e-9);
    CHECK(std::abs(s.q3 - dsbias::testing::hf7_quantile(x, 0.75)) < 1e-9);
    CHECK(s.q1 <= s.median);
    CHECK(s.median <= s.q3);
    CHECK(s.iqr() >= 0);
  }
}

TEST_CASE("dataset class stats over a generated corpus") {
  SynthSpec spec;
  spec.image_size = 48;
  spec.images_per_source = 8;
  spec.patients_per_source = 4;
  spec.seed = 4;
  SourceSpec a, b;
  a.name = "a";
  b.name = "b";
  b.organ_scale[5] = 1.2;
  spec.sources = {a, b};
  const auto dir = dsbias::testing::temp_dir("stats");
  const Manifest m = synth_generate(spec, dir);
  const ClassStatsReport rep = dataset_class_stats(m);
  CHECK(rep.images == 16);
  CHECK(rep.skipped == 0);
  REQUIRE(rep.rows.size() == 2 * kNumClasses);
  for (const auto& r : rep.rows) {
    CHECK(r.percent.mean >= 0);
    CHECK(r.percent.mean <= 100);
    CHECK(r.percent.median >= r.percent.q1);
    CHECK(r.percent.median <= r.percent.q3);
  }
  const double lung_a = rep.rows[5].percent.mean, lung_b = rep.rows[kNumClasses + 5].percent.mean;
  CHECK(rep.rows[5].dataset == "a");
  CHECK(lung_b / lung_a == doctest::Approx(1.44).epsilon(0.08));

  // Order invariance.
  std::vector<DatasetRecord> rev(m.records().rbegin(), m.records().rend());
  const ClassStatsReport r2 = dataset_class_stats(Manifest(rev, m.base_dir()));
  for (std::size_t i = 0; i < rep.rows.size(); ++i) {
    CHECK(std::abs(rep.rows[i].percent.mean - r2.rows[i].percent.mean) < 1e-9);
    CHECK(rep.rows[i].percent.median == r2.rows[i].percent.median);
  }

  const std::string csv = class_stats_csv(rep);
  CHECK(csv.rfind("dataset,class_id,class_name,mean,std,median,iqr\n", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 1 + 2 * kNumClasses);

  // Records without masks are skipped and reported.
  std::vector<DatasetRecord> recs = m.records();
  recs[0].mask_dir.clear();
  const ClassStatsReport r3 = dataset_class_stats(Manifest(recs, m.base_dir()));
  CHECK(r3.skipped == 1);
  CHECK(r3.warnings.size() == 1);
}

TEST_CASE("distribution report") {
  const auto dir = dsbias::testing::temp_dir("dist");
  write_pgm(GrayImage::u8(4, 4, 100), dir / "c.pgm");
  write_pgm(GrayImage::u8(4, 4, 100), dir / "d.pgm");
  const Manifest m({{"x", "p", Split::Unassigned, "c.pgm", ""},
                    {"y", "q", Split::Unassigned, "d.pgm", ""},
                    {"y", "r", Split::Unassigned, "missing.pgm", ""}},
                   dir);
  const DistributionReport rep = distribution_report(m, 256);
  CHECK(rep.skipped == 1);
  const Histogram& hx = rep.per_dataset.at("x");
  CHECK(hx.counts[100] == 16);
  CHECK(hx.total() == 16);
  CHECK(hx == rep.per_dataset.at("y"));
  const std::string csv = distribution_csv(rep);
  CHECK(csv.find("x,100,100,101,16,1.00000000\n") != std::string::npos);
  const std::string svg = distribution_svg(rep);
  CHECK(svg.rfind("<svg", 0) == 0);
  CHECK(svg.find("</svg>") != std::string::npos);
  CHECK(std::count(svg.begin(), svg.end(), '\n') > 4);
}

TEST_CASE("intensity offsets move the histogram mode") {
  SynthSpec spec;
  spec.image_size = 64;
  spec.images_per_source = 2;
  spec.patients_per_source = 2;
  spec.write_masks = false;
  SourceSpec a, b;
  a.name = "a";
  b.name = "b";
  a.noise_sigma = b.noise_sigma = 0;
  b.intensity_offset = 30;
  spec.sources = {a, b};
  const auto dir = dsbias::testing::temp_dir("mode");
  const DistributionReport rep = distribution_report(synth_generate(spec, dir), 256);
  // Air is unshifted; compare modes above it.
  auto body_mode = [&](const Histogram& h) {
    std::size_t best = 60;
    for (std::size_t i = 60; i < 256; ++i)
      if (h.counts[i] > h.counts[best]) best = i;
    return static_cast<double>(best);
  };
  CHECK(std::abs(body_mode(rep.per_dataset.at("b")) - body_mode(rep.per_dataset.at("a")) - 30.0) <= 3.0);
}
