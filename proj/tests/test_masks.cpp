// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "dsbias/error.hpp"
#include "dsbias/imaging.hpp"
#include "dsbias/masks.hpp"
#include "helpers.hpp"
#include "oracles.hpp"

using namespace dsbias;
using dsbias::testing::random_mask;
using dsbias::testing::brute_bbox;
using dsbias::testing::brute_boundary;
using dsbias::testing::random_u8;

namespace {

MaskSet random_mask_set(std::size_t w, std::size_t h, Rng& rng, double density = 0.2) {
  MaskSet ms(w, h);
  for (int id = 1; id <= kNumPlanes; ++id) ms.plane(id) = random_mask(w, h, rng, density);
  return ms;
}

std::size_t count_value(const GrayImage& img, float v) {
  return static_cast<std::size_t>(std::count(img.pixels().begin(), img.pixels().end(), v));
}

}  // namespace

TEST_CASE("anatomy ids match the named statistics indices") {
  CHECK(anatomy_name(0) == "Background");
  CHECK(anatomy_name(5) == "Left Lung");
  CHECK(anatomy_name(6) == "Right Lung");
  CHECK(anatomy_name(11) == "Facies Diaphragmatica");
  CHECK_THROWS_AS(anatomy_name(15), InvalidInput);
  MaskSet ms(2, 2);
  CHECK_THROWS_AS(ms.plane(0), InvalidInput);
  CHECK_THROWS_AS(ms.plane(15), InvalidInput);
}

TEST_CASE("combine_masks") {
  Rng rng(10);
  MaskSet ms = random_mask_set(3, 3, rng, 0.5);
  const int one[] = {4};
  CHECK(combine_masks(ms, one) == ms.plane(4));

  MaskSet d(4, 4);
  d.plane(1).at(0, 0) = d.plane(1).at(0, 1) = 1;
  d.plane(2).at(3, 3) = 1;
  const int two[] = {1, 2};
  CHECK(combine_masks(d, two).popcount() == 3);

  const int overlap[] = {5, 9};
  const BinaryMask u = combine_masks(ms, overlap);
  for (std::size_t i = 0; i < 9; ++i) CHECK(u.bits[i] == (ms.plane(5).bits[i] | ms.plane(9).bits[i]));

  CHECK_THROWS_AS(combine_masks(ms, std::span<const int>{}), InvalidInput);
  const int bad[] = {0};
  CHECK_THROWS_AS(combine_masks(ms, bad), InvalidInput);
}

TEST_CASE("bbox_nonzero examples") {
  BinaryMask m(7, 5);
  m.at(3, 2) = 1;
  CHECK(bbox_nonzero(m) == BBox{3, 3, 2, 2});
  BinaryMask full(7, 5);
  std::fill(full.bits.begin(), full.bits.end(), 1);
  CHECK(bbox_nonzero(full) == BBox{0, 4, 0, 6});
  CHECK_THROWS_AS(bbox_nonzero(BinaryMask(4, 4)), EmptyMaskError);
}

TEST_CASE("bbox, crop and contour agree with exhaustive oracles on 1000 random 16x16 masks") {
  Rng rng(11);
  for (int t = 0; t < 1000; ++t) {
    const double density = rng.uniform(0.005, 0.6);
    BinaryMask m = random_mask(16, 16, rng, density);
    if (m.popcount() == 0) m.at(static_cast<std::size_t>(rng.uniform_int(0, 15)), static_cast<std::size_t>(rng.uniform_int(0, 15))) = 1;
    const BBox b = bbox_nonzero(m);
    REQUIRE(b == brute_bbox(m));

    const GrayImage img = random_u8(16, 16, rng);
    const GrayImage c = crop(img, b);
    REQUIRE(c.width() == b.col_max - b.col_min + 1);
    REQUIRE(c.height() == b.row_max - b.row_min + 1);
    for (std::size_t r = 0; r < c.height(); ++r)
      for (std::size_t cc = 0; cc < c.width(); ++cc) REQUIRE(c.at(r, cc) == img.at(b.row_min + r, b.col_min + cc));

    MaskSet ms(16, 16);
    ms.plane(static_cast<int>(rng.uniform_int(1, 14))) = m;
    const GrayImage contour = trace_contours(ms);
    const auto expect = brute_boundary(m);
    std::set<std::pair<std::size_t, std::size_t>> got;
    for (std::size_t r = 0; r < 16; ++r)
      for (std::size_t cc = 0; cc < 16; ++cc) {
        REQUIRE((contour.at(r, cc) == 0.0f || contour.at(r, cc) == 255.0f));
        if (contour.at(r, cc) == 255.0f) got.insert({r, cc});
      }
    REQUIRE(got == expect);
  }
}

TEST_CASE("crop examples and errors") {
  Rng rng(12);
  const GrayImage img = random_u8(9, 6, rng);
  CHECK(crop(img, BBox{0, 5, 0, 8}) == img);
  const GrayImage one = crop(img, BBox{2, 2, 7, 7});
  CHECK(one.size() == 1);
  CHECK(one.pixels()[0] == img.at(2, 7));
  CHECK_THROWS_AS(crop(img, BBox{0, 6, 0, 8}), InvalidInput);
  CHECK_THROWS_AS(crop(img, BBox{3, 2, 0, 1}), InvalidInput);
}

TEST_CASE("crop to the mask box keeps every masked pixel") {
  Rng rng(13);
  for (int t = 0; t < 100; ++t) {
    BinaryMask m = random_mask(12, 10, rng, 0.1);
    if (m.popcount() == 0) continue;
    const BBox b = bbox_nonzero(m);
    for (std::size_t r = 0; r < 10; ++r)
      for (std::size_t c = 0; c < 12; ++c)
        if (m.at(r, c)) CHECK((r >= b.row_min && r <= b.row_max && c >= b.col_min && c <= b.col_max));
  }
}

TEST_CASE("add_black_patches") {
  Rng rng(14);
  const GrayImage img = random_u8(10, 8, rng);
  CHECK(add_black_patches(img, 0) == img);

  const GrayImage white = GrayImage::u8(8, 8, 255);
  const GrayImage p = add_black_patches(white, 2);
  CHECK(count_value(p, 0.0f) == 8);
  for (std::size_t r = 0; r < 2; ++r) {
    CHECK(p.at(r, 0) == 0.0f);
    CHECK(p.at(r, 1) == 0.0f);
    CHECK(p.at(r, 6) == 0.0f);
    CHECK(p.at(r, 7) == 0.0f);
  }

  const GrayImage big = add_black_patches(GrayImage::u8(224, 224, 200), 50);
  const double frac = static_cast<double>(count_value(big, 0.0f)) / (224.0 * 224.0);
  CHECK(frac == doctest::Approx(2.0 * 50 * 50 / (224.0 * 224.0)).epsilon(1e-12));
  CHECK(frac == doctest::Approx(0.0996).epsilon(1e-3));

  CHECK(add_black_patches(add_black_patches(img, 3), 3) == add_black_patches(img, 3));
  CHECK_THROWS_AS(add_black_patches(img, 9), InvalidInput);
  // Patches wider than half the image overlap but stay in bounds.
  CHECK(count_value(add_black_patches(GrayImage::u8(10, 8, 1), 8), 0.0f) == 80);
}

TEST_CASE("crop_to_lungs falls back to the full image without lungs") {
  Rng rng(15);
  const GrayImage img = random_u8(10, 10, rng);
  MaskSet ms(10, 10);
  const auto r = crop_to_lungs(img, ms);
  CHECK(r.fell_back);
  CHECK(r.image == img);
  ms.plane(5).at(2, 3) = 1;
  ms.plane(6).at(6, 8) = 1;
  const auto c = crop_to_lungs(img, ms);
  CHECK_FALSE(c.fell_back);
  CHECK(c.image == crop(img, BBox{2, 6, 3, 8}));
  CHECK_THROWS_AS(crop_to_lungs(GrayImage::u8(9, 10), ms), InvalidInput);
}

TEST_CASE("render_semantic") {
  MaskSet ms(6, 4);
  const GrayImage empty = render_semantic(ms);
  CHECK(count_value(empty, 0.0f) == 24);

  MaskSet all(6, 4);
  std::fill(all.plane(14).bits.begin(), all.plane(14).bits.end(), 1);
  CHECK(count_value(render_semantic(all), 255.0f) == 24);

  ms.plane(5).at(1, 1) = ms.plane(5).at(1, 2) = 1;
  ms.plane(9).at(1, 2) = ms.plane(9).at(2, 2) = 1;
  const GrayImage s = render_semantic(ms);
  CHECK(s.at(1, 1) == std::round(5 * 255.0f / 14));
  CHECK(s.at(1, 2) == 164.0f);
  CHECK(s.at(2, 2) == 164.0f);
  CHECK(s.at(0, 0) == 0.0f);
}

TEST_CASE("render_semantic with disjoint planes does not depend on precedence") {
  Rng rng(16);
  for (int t = 0; t < 20; ++t) {
    MaskSet ms(8, 8);
    for (std::size_t i = 0; i < 64; ++i) {
      const auto id = static_cast<int>(rng.uniform_int(0, 14));
      if (id) ms.plane(id).bits[i] = 1;
    }
    const GrayImage s = render_semantic(ms);
    for (std::size_t i = 0; i < 64; ++i) {
      int owner = 0;
      for (int id = 1; id <= kNumPlanes; ++id)
        if (ms.plane(id).bits[i]) owner = id;
      CHECK(s.pixels()[i] == std::round(static_cast<float>(owner) * 255.0f / 14.0f));
    }
  }
}

TEST_CASE("trace_contours examples") {
  MaskSet ms(5, 5);
  ms.plane(3).at(2, 2) = 1;
  const GrayImage single = trace_contours(ms);
  CHECK(count_value(single, 255.0f) == 1);
  CHECK(single.at(2, 2) == 255.0f);

  MaskSet full(6, 5);
  std::fill(full.plane(1).bits.begin(), full.plane(1).bits.end(), 1);
  const GrayImage frame = trace_contours(full);
  CHECK(count_value(frame, 255.0f) == 2 * 6 + 2 * 3);
  for (std::size_t r = 1; r < 4; ++r)
    for (std::size_t c = 1; c < 5; ++c) CHECK(frame.at(r, c) == 0.0f);
}

TEST_CASE("contour pixels lie inside a source plane") {
  Rng rng(17);
  for (int t = 0; t < 50; ++t) {
    const MaskSet ms = random_mask_set(16, 16, rng, 0.15);
    const GrayImage c = trace_contours(ms);
    for (std::size_t i = 0; i < c.size(); ++i) {
      if (c.pixels()[i] != 255.0f) continue;
      bool covered = false;
      for (int id = 1; id <= kNumPlanes; ++id) covered |= ms.plane(id).bits[i] != 0;
      CHECK(covered);
    }
  }
}

TEST_CASE("lung_heart") {
  Rng rng(18);
  const GrayImage img = random_u8(8, 8, rng);
  MaskSet all(8, 8);
  std::fill(all.plane(9).bits.begin(), all.plane(9).bits.end(), 1);
  CHECK(lung_heart(img, all) == img);
  MaskSet none(8, 8);
  std::fill(none.plane(1).bits.begin(), none.plane(1).bits.end(), 1);  // clavicle is not kept
  CHECK(count_value(lung_heart(img, none), 0.0f) == 64);

  for (int t = 0; t < 20; ++t) {
    const MaskSet ms = random_mask_set(8, 8, rng, 0.1);
    const GrayImage im = random_u8(8, 8, rng);
    const GrayImage out = lung_heart(im, ms);
    for (std::size_t i = 0; i < 64; ++i) {
      int keep = 0;
      for (int id : {5, 6, 7, 8, 9, 10}) keep |= ms.plane(id).bits[i];
      CHECK(out.pixels()[i] == im.pixels()[i] * static_cast<float>(keep));
    }
  }
  CHECK_THROWS_AS(lung_heart(GrayImage::u8(7, 8), all), InvalidInput);
}

TEST_CASE("patch_shuffle") {
  Rng rng(19);
  const GrayImage img = random_u8(8, 6, rng);
  const std::vector<std::size_t> ident = {0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11};
  CHECK(patch_shuffle(img, 2, ident) == img);

  GrayImage four = GrayImage::u8(4, 4);
  for (std::size_t i = 0; i < 16; ++i) four.pixels()[i] = static_cast<float>(i);
  Rng a(99), b(99);
  const auto perm = a.permutation(4);
  const GrayImage got = patch_shuffle(four, 2, b);
  for (std::size_t t = 0; t < 4; ++t) {
    const std::size_t dr = (t / 2) * 2, dc = (t % 2) * 2, sr = (perm[t] / 2) * 2, sc = (perm[t] % 2) * 2;
    for (std::size_t r = 0; r < 2; ++r)
      for (std::size_t c = 0; c < 2; ++c) CHECK(got.at(dr + r, dc + c) == four.at(sr + r, sc + c));
  }
  CHECK_THROWS_AS(patch_shuffle(img, 4, rng), InvalidInput);
  CHECK_THROWS_AS(patch_shuffle(img, 0, rng), InvalidInput);
}

TEST_CASE("pixel_shuffle") {
  Rng rng(20);
  const GrayImage one = GrayImage::u8(1, 1, 9);
  CHECK(pixel_shuffle(one, rng) == one);

  GrayImage nine = GrayImage::u8(3, 3);
  for (std::size_t i = 0; i < 9; ++i) nine.pixels()[i] = static_cast<float>(10 * i);
  Rng a(5), b(5);
  const auto perm = a.permutation(9);
  const GrayImage got = pixel_shuffle(nine, b);
  for (std::size_t i = 0; i < 9; ++i) CHECK(got.pixels()[i] == nine.pixels()[perm[i]]);
}

TEST_CASE("shuffles preserve histograms bit-exactly") {
  Rng rng(21);
  for (int t = 0; t < 50; ++t) {
    const GrayImage img = random_u8(16, 16, rng);
    const Histogram h = histogram(img, 256);
    CHECK(histogram(pixel_shuffle(img, rng), 256) == h);
    CHECK(histogram(patch_shuffle(img, 4, rng), 256) == h);
    auto sorted = [](const GrayImage& g) {
      std::vector<float> v(g.pixels().begin(), g.pixels().end());
      std::sort(v.begin(), v.end());
      return v;
    };
    CHECK(sorted(pixel_shuffle(img, rng)) == sorted(img));
  }
}

TEST_CASE("mask directory round-trip") {
  Rng rng(22);
  MaskSet ms = random_mask_set(9, 7, rng, 0.3);
  ms.plane(12) = BinaryMask(9, 7);
  const auto dir = dsbias::testing::temp_dir("masks");
  write_mask_set(ms, dir, "img_01");
  CHECK(std::filesystem::exists(mask_plane_path(dir, "img_01", 5)));
  CHECK(mask_plane_path(dir, "img_01", 5).filename() == "img_01.c5.pgm");
  CHECK_FALSE(std::filesystem::exists(mask_plane_path(dir, "img_01", 12)));
  CHECK(read_mask_set(dir, "img_01", 9, 7) == ms);
  CHECK(read_mask_set(dir, "missing", 9, 7) == MaskSet(9, 7));
  CHECK_THROWS_AS(read_mask_set(dir, "img_01", 8, 7), DataError);
  const BinaryMask bg = ms.background();
  for (std::size_t i = 0; i < bg.bits.size(); ++i) {
    int any = 0;
    for (int id = 1; id <= kNumPlanes; ++id) any |= ms.plane(id).bits[i];
    CHECK(bg.bits[i] == (any ? 0 : 1));
  }
}

TEST_CASE("resize_masks nearest neighbour") {
  MaskSet ms(4, 4);
  ms.plane(5).at(0, 0) = 1;
  const MaskSet up = resize_masks(ms, 8, 8);
  CHECK(up.plane(5).popcount() == 4);
  CHECK(up.plane(5).at(1, 1) == 1);
  CHECK(resize_masks(up, 4, 4) == ms);
}
