// SPDX-License-Identifier: Apache-2.0
#include "dsbias/optim.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "dsbias/error.hpp"

namespace dsbias {

void TrainConfig::validate() const {
  if (!(lr > 0.0) || !std::isfinite(lr)) throw InvalidInput("train.lr must be > 0");
  if (weight_decay < 0.0) throw InvalidInput("train.weight_decay must be >= 0");
  if (batch_size < 1) throw InvalidInput("train.batch_size must be >= 1");
  if (scheduler != "cosine" && scheduler != "warmup_cosine")
    throw InvalidInput("train.scheduler must be cosine or warmup_cosine, got '" + scheduler + "'");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) throw InvalidInput("train betas must be in [0,1)");
  if (!(eps > 0.0)) throw InvalidInput("train.eps must be > 0");
  if (mixup && !(mixup_alpha > 0.0)) throw InvalidInput("train.mixup_alpha must be > 0");
}

template <typename T>
Tensor<T> softmax(const Tensor<T>& logits) {
  if (logits.rank() != 2) throw InvalidInput("softmax: logits must be (N, C)");
  const std::size_t n = logits.dim(0), c = logits.dim(1);
  Tensor<T> p(logits.shape());
  for (std::size_t i = 0; i < n; ++i) {
    const T* row = logits.data() + i * c;
    const T mx = *std::max_element(row, row + c);
    double s = 0.0;
    for (std::size_t j = 0; j < c; ++j) s += std::exp(static_cast<double>(row[j] - mx));
    for (std::size_t j = 0; j < c; ++j) p[i * c + j] = static_cast<T>(std::exp(static_cast<double>(row[j] - mx)) / s);
  }
  return p;
}

namespace {

// log-sum-exp per row in double
std::vector<double> row_lse(const auto& logits) {
  const std::size_t n = logits.dim(0), c = logits.dim(1);
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    double mx = -INFINITY;
    for (std::size_t j = 0; j < c; ++j) mx = std::max(mx, static_cast<double>(logits[i * c + j]));
    double s = 0.0;
    for (std::size_t j = 0; j < c; ++j) s += std::exp(static_cast<double>(logits[i * c + j]) - mx);
    out[i] = mx + std::log(s);
  }
  return out;
}

}  // namespace

template <typename T>
LossResult<T> cross_entropy(const Tensor<T>& logits, std::span<const int> targets) {
  if (logits.rank() != 2 || logits.dim(0) != targets.size() || targets.empty())
    throw InvalidInput("cross_entropy: logits (N, C) and N targets required");
  const std::size_t n = logits.dim(0), c = logits.dim(1);
  Tensor<T> onehot({n, c});
  for (std::size_t i = 0; i < n; ++i) {
    if (targets[i] < 0 || static_cast<std::size_t>(targets[i]) >= c)
      throw InvalidInput("cross_entropy: target " + std::to_string(targets[i]) + " out of range");
    onehot[i * c + static_cast<std::size_t>(targets[i])] = T(1);
  }
  return soft_cross_entropy(logits, onehot);
}

template <typename T>
LossResult<T> soft_cross_entropy(const Tensor<T>& logits, const Tensor<T>& targets) {
  if (logits.rank() != 2 || targets.shape() != logits.shape() || logits.dim(0) == 0)
    throw InvalidInput("soft_cross_entropy: shape mismatch");
  const std::size_t n = logits.dim(0), c = logits.dim(1);
  const auto lse = row_lse(logits);
  LossResult<T> r;
  r.grad = Tensor<T>(logits.shape());
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < c; ++j) {
      const double logp = static_cast<double>(logits[i * c + j]) - lse[i];
      const double t = static_cast<double>(targets[i * c + j]);
      total -= t * logp;
      r.grad[i * c + j] = static_cast<T>((std::exp(logp) - t) / static_cast<double>(n));
    }
  r.loss = total / static_cast<double>(n);
  if (!std::isfinite(r.loss)) throw NumericError("cross_entropy: non-finite loss");
  return r;
}

template <typename T>
AdamState<T> AdamState<T>::zeros(const std::vector<Param<T>*>& params) {
  AdamState s;
  for (const auto* p : params) {
    s.m.emplace_back(p->value.shape());
    s.v.emplace_back(p->value.shape());
  }
  return s;
}

template <typename T>
void adamw_update(std::span<T> p, std::span<const T> g, std::span<T> m, std::span<T> v,
                  std::uint64_t t, double lr, const TrainConfig& cfg) {
  if (p.size() != g.size() || p.size() != m.size() || p.size() != v.size())
    throw InvalidInput("adamw: parameter, gradient and moment sizes differ");
  if (t < 1) throw InvalidInput("adamw: step must be >= 1");
  const double b1 = cfg.beta1, b2 = cfg.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(t));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(t));
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double gi = static_cast<double>(g[i]);
    const double mi = b1 * static_cast<double>(m[i]) + (1.0 - b1) * gi;
    const double vi = b2 * static_cast<double>(v[i]) + (1.0 - b2) * gi * gi;
    m[i] = static_cast<T>(mi);
    v[i] = static_cast<T>(vi);
    const double mhat = mi / c1, vhat = vi / c2;
    const double pi = static_cast<double>(p[i]);
    p[i] = static_cast<T>(pi - lr * (mhat / (std::sqrt(vhat) + cfg.eps)) - lr * cfg.weight_decay * pi);
  }
}

template <typename T>
void adamw_step(const std::vector<Param<T>*>& params, AdamState<T>& state, double lr, const TrainConfig& cfg) {
  if (state.m.size() != params.size() || state.v.size() != params.size())
    throw InvalidInput("adamw: optimizer state does not match parameters");
  for (const auto* p : params)
    if (!p->grad.all_finite()) throw NumericError("non-finite gradient in parameter '" + p->name + "'");
  ++state.step;
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto* p = params[k];
    adamw_update<T>(p->value.values(), std::span<const T>(p->grad.values()), state.m[k].values(), state.v[k].values(),
                    state.step, lr, cfg);
    if (!p->value.all_finite()) throw NumericError("non-finite value in parameter '" + p->name + "' after update");
  }
}

double lr_schedule(std::size_t t, std::size_t total, const TrainConfig& cfg) {
  if (total == 0) return cfg.lr;
  t = std::min(t, total);
  const double pi = std::numbers::pi;
  if (cfg.scheduler == "warmup_cosine" && cfg.warmup_steps > 0) {
    const std::size_t w = std::min(cfg.warmup_steps, total);
    if (t < w) return cfg.lr * static_cast<double>(t) / static_cast<double>(w);
    if (total == w) return cfg.lr;
    const double frac = static_cast<double>(t - w) / static_cast<double>(total - w);
    return cfg.lr * 0.5 * (1.0 + std::cos(pi * frac));
  }
  return cfg.lr * 0.5 * (1.0 + std::cos(pi * static_cast<double>(t) / static_cast<double>(total)));
}

#define DSBIAS_INSTANTIATE(T)                                                                          \
  template Tensor<T> softmax<T>(const Tensor<T>&);                                                     \
  template LossResult<T> cross_entropy<T>(const Tensor<T>&, std::span<const int>);                     \
  template LossResult<T> soft_cross_entropy<T>(const Tensor<T>&, const Tensor<T>&);                    \
  template struct AdamState<T>;                                                                        \
  template void adamw_update<T>(std::span<T>, std::span<const T>, std::span<T>, std::span<T>,           \
                                std::uint64_t, double, const TrainConfig&);                            \
  template void adamw_step<T>(const std::vector<Param<T>*>&, AdamState<T>&, double, const TrainConfig&);

DSBIAS_INSTANTIATE(float)
DSBIAS_INSTANTIATE(double)
#undef DSBIAS_INSTANTIATE

}  // namespace dsbias
