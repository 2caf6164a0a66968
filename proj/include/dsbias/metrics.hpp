// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace dsbias {

struct Metrics {
  std::size_t n_classes = 0;
  std::vector<std::size_t> confusion;  // row = label, column = prediction
  std::vector<double> f1;
  double macro_f1 = 0.0;

  std::size_t count(std::size_t label, std::size_t pred) const { return confusion[label * n_classes + pred]; }
  std::size_t total() const;
};

/// Per-class F1 = 2TP / (2TP + FP + FN), 0 when the denominator is 0.
/// `n_classes` 0 means max(label, pred) + 1.
Metrics f1_scores(std::span<const int> preds, std::span<const int> labels, std::size_t n_classes = 0);

}  // namespace dsbias
