// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "dsbias/image.hpp"
#include "dsbias/masks.hpp"
#include "dsbias/rng.hpp"

namespace dsbias::testing {

inline GrayImage random_u8(std::size_t w, std::size_t h, Rng& rng) {
  GrayImage img = GrayImage::u8(w, h);
  for (auto& v : img.pixels()) v = static_cast<float>(rng.uniform_int(0, 255));
  return img;
}

inline GrayImage random_f32(std::size_t w, std::size_t h, Rng& rng, double lo = -1.0, double hi = 1.0) {
  GrayImage img = GrayImage::f32(w, h);
  for (auto& v : img.pixels()) v = static_cast<float>(rng.uniform(lo, hi));
  return img;
}

inline BinaryMask random_mask(std::size_t w, std::size_t h, Rng& rng, double density = 0.3) {
  BinaryMask m(w, h);
  for (auto& b : m.bits) b = rng.bernoulli(density) ? 1 : 0;
  return m;
}

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path temp_dir(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("dsbias_test_" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

inline std::string slurp(const std::filesystem::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

}  // namespace dsbias::testing
