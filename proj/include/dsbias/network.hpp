// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "dsbias/layers.hpp"

namespace dsbias {

struct ModelConfig {
  std::string arch = "plain";  // plain | residual
  std::size_t input_size = 224;
  std::vector<std::size_t> channels;  // empty: architecture default
  std::size_t hidden = 64;            // plain only
  std::size_t n_classes = 4;
  std::uint64_t seed = 0;

  /// Channels actually used (defaults filled in).
  std::vector<std::size_t> stage_channels() const;
  /// Product of the pooling strides.
  std::size_t downsample_factor() const;
  /// Throws InvalidInput when the architecture cannot be built.
  void validate() const;
};

/// Sequential stack of layers.
template <typename T>
class Network {
 public:
  Network() = default;
  Network(const Network& other);
  Network& operator=(const Network& other);
  Network(Network&&) noexcept = default;
  Network& operator=(Network&&) noexcept = default;

  void add(std::unique_ptr<Layer<T>> layer) { layers_.push_back(std::move(layer)); }
  std::size_t num_layers() const { return layers_.size(); }
  Layer<T>& layer(std::size_t i) { return *layers_.at(i); }

  /// x: (N, 1, S, S) -> logits (N, n_classes).
  Tensor<T> forward(const Tensor<T>& x);
  /// Backpropagates d loss / d logits; accumulates parameter gradients.
  Tensor<T> backward(const Tensor<T>& grad_logits);

  std::vector<Param<T>*> params();
  void zero_grad();
  std::size_t num_parameters();
  /// Rectified convolutional outputs in depth order.
  std::vector<FeatureTap<T>> feature_taps() const;
  std::vector<std::size_t> output_shape(std::vector<std::size_t> in) const;

 private:
  std::vector<std::unique_ptr<Layer<T>>> layers_;
};

/// Builds the architecture described by `cfg` and initialises it from cfg.seed.
template <typename T>
Network<T> build_network(const ModelConfig& cfg);

/// Fan-in uniform initialisation: hidden weights U(+-sqrt(6/fan_in)), weights
/// whose name starts with "head" U(+-1/sqrt(fan_in)), biases zero.
template <typename T>
void init_params(Network<T>& net, std::uint64_t seed);

}  // namespace dsbias
