// SPDX-License-Identifier: Apache-2.0
#include "dsbias/rng.hpp"

#include <algorithm>
#include <numeric>

namespace dsbias {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace

Rng Rng::derive(std::uint64_t seed, std::initializer_list<std::uint64_t> stream) {
  std::uint64_t h = splitmix64(seed);
  for (auto s : stream) h = splitmix64(h ^ splitmix64(s + 0x632be59bd9b4e019ULL));
  return Rng(h);
}

double Rng::beta(double a, double b) {
  const double x = std::gamma_distribution<double>(a, 1.0)(engine_);
  const double y = std::gamma_distribution<double>(b, 1.0)(engine_);
  if (x + y == 0.0) return 0.5;
  return x / (x + y);
}

std::vector<std::size_t> Rng::permutation(std::size_t n) {
  std::vector<std::size_t> p(n);
  std::iota(p.begin(), p.end(), std::size_t{0});
  std::shuffle(p.begin(), p.end(), engine_);
  return p;
}

}  // namespace dsbias
