// SPDX-License-Identifier: Apache-2.0
#include "dsbias/metrics.hpp"

#include <algorithm>
#include <numeric>
#include <string>

#include "dsbias/error.hpp"

namespace dsbias {

std::size_t Metrics::total() const { return std::accumulate(confusion.begin(), confusion.end(), std::size_t{0}); }

Metrics f1_scores(std::span<const int> preds, std::span<const int> labels, std::size_t n_classes) {
  if (preds.size() != labels.size() || preds.empty())
    throw InvalidInput("f1_scores: predictions and labels must have equal non-zero length");
  int mx = 0;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    if (preds[i] < 0 || labels[i] < 0) throw InvalidInput("f1_scores: negative class index");
    mx = std::max({mx, preds[i], labels[i]});
  }
  if (n_classes == 0) n_classes = static_cast<std::size_t>(mx) + 1;
  if (static_cast<std::size_t>(mx) >= n_classes)
    throw InvalidInput("f1_scores: class index " + std::to_string(mx) + " >= n_classes");

  Metrics m;
  m.n_classes = n_classes;
  m.confusion.assign(n_classes * n_classes, 0);
  for (std::size_t i = 0; i < preds.size(); ++i)
    ++m.confusion[static_cast<std::size_t>(labels[i]) * n_classes + static_cast<std::size_t>(preds[i])];
  m.f1.assign(n_classes, 0.0);
  for (std::size_t k = 0; k < n_classes; ++k) {
    std::size_t tp = m.count(k, k), fp = 0, fn = 0;
    for (std::size_t j = 0; j < n_classes; ++j) {
      if (j == k) continue;
      fp += m.count(j, k);
      fn += m.count(k, j);
    }
    const std::size_t den = 2 * tp + fp + fn;
    m.f1[k] = den == 0 ? 0.0 : 2.0 * static_cast<double>(tp) / static_cast<double>(den);
  }
  m.macro_f1 = std::accumulate(m.f1.begin(), m.f1.end(), 0.0) / static_cast<double>(n_classes);
  return m;
}

}  // namespace dsbias
