// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <algorithm>
#include <numeric>
#include <stdexcept>
#include <span>
#include <vector>

namespace dsbias {

/// Dense row-major tensor. Shapes are NCHW for feature maps and (N, F) for
/// fully connected activations.
template <typename T>
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<std::size_t> shape, T fill = T(0))
      : shape_(std::move(shape)), values_(count(shape_), fill) {}

  const std::vector<std::size_t>& shape() const { return shape_; }
  std::size_t dim(std::size_t i) const { return shape_.at(i); }
  std::size_t rank() const { return shape_.size(); }
  std::size_t numel() const { return values_.size(); }

  T* data() { return values_.data(); }
  const T* data() const { return values_.data(); }
  std::span<T> values() { return values_; }
  std::span<const T> values() const { return values_; }
  T& operator[](std::size_t i) { return values_[i]; }
  T operator[](std::size_t i) const { return values_[i]; }

  void reshape(std::vector<std::size_t> shape) {
    if (count(shape) != values_.size()) throw std::invalid_argument("reshape: element count changes");
    shape_ = std::move(shape);
  }
  void fill(T v) { std::fill(values_.begin(), values_.end(), v); }

  bool all_finite() const {
    for (T v : values_)
      if (!std::isfinite(v)) return false;
    return true;
  }

  friend bool operator==(const Tensor&, const Tensor&) = default;

  static std::size_t count(const std::vector<std::size_t>& shape) {
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
  }

 private:
  std::vector<std::size_t> shape_;
  std::vector<T> values_;
};

}  // namespace dsbias
