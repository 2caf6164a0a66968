// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "dsbias/layers.hpp"

namespace dsbias {

struct TrainConfig {
  double lr = 1e-4;
  double weight_decay = 1e-4;
  std::size_t batch_size = 64;
  std::size_t epochs = 10;
  std::string scheduler = "cosine";  // cosine | warmup_cosine
  std::size_t warmup_steps = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::uint64_t seed = 0;
  bool mixup = false;
  double mixup_alpha = 1.0;

  void validate() const;
};

template <typename T>
struct LossResult {
  double loss = 0.0;
  Tensor<T> grad;  // d loss / d logits
};

/// Row-wise softmax of (N, C) logits.
template <typename T>
Tensor<T> softmax(const Tensor<T>& logits);

/// Mean over the batch of -log softmax(logits)[target]; gradient (softmax - onehot) / N.
template <typename T>
LossResult<T> cross_entropy(const Tensor<T>& logits, std::span<const int> targets);

/// Cross-entropy against per-row target distributions of shape (N, C).
template <typename T>
LossResult<T> soft_cross_entropy(const Tensor<T>& logits, const Tensor<T>& targets);

template <typename T>
struct AdamState {
  std::vector<Tensor<T>> m;
  std::vector<Tensor<T>> v;
  std::uint64_t step = 0;

  /// Zero moments shaped like `params`.
  static AdamState zeros(const std::vector<Param<T>*>& params);
};

/// One AdamW update of a flat parameter block at step t >= 1. Weight decay is
/// decoupled and applied to the pre-update parameter.
template <typename T>
void adamw_update(std::span<T> p, std::span<const T> g, std::span<T> m, std::span<T> v,
                  std::uint64_t t, double lr, const TrainConfig& cfg);

/// Increments state.step and updates every parameter. Throws NumericError on
/// a non-finite gradient, naming the parameter.
template <typename T>
void adamw_step(const std::vector<Param<T>*>& params, AdamState<T>& state, double lr, const TrainConfig& cfg);

/// Learning rate for step t of `total` (0 <= t <= total).
double lr_schedule(std::size_t t, std::size_t total, const TrainConfig& cfg);

}  // namespace dsbias
