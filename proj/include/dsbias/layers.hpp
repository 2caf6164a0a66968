// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <memory>
#include <string>
#include <vector>

#include "dsbias/rng.hpp"
#include "dsbias/tensor.hpp"

namespace dsbias {

/// Trainable tensor with its accumulated gradient.
template <typename T>
struct Param {
  std::string name;
  Tensor<T> value;
  Tensor<T> grad;
};

/// A rectified convolutional feature map and the gradient that reached it in
/// the most recent backward pass. Grad-CAM reads these.
template <typename T>
struct FeatureTap {
  std::string name;
  const Tensor<T>* activation = nullptr;
  const Tensor<T>* gradient = nullptr;
};

/// Layers cache what backward needs during forward; backward accumulates
/// parameter gradients and returns the gradient w.r.t. the layer input.
template <typename T>
class Layer {
 public:
  virtual ~Layer() = default;
  virtual Tensor<T> forward(const Tensor<T>& x) = 0;
  virtual Tensor<T> backward(const Tensor<T>& grad_out) = 0;
  virtual void collect_params(std::vector<Param<T>*>& out) { (void)out; }
  virtual void collect_taps(std::vector<FeatureTap<T>>& out) const { (void)out; }
  /// Output shape for a given input shape, used to validate architectures.
  virtual std::vector<std::size_t> output_shape(const std::vector<std::size_t>& in) const = 0;
  virtual std::unique_ptr<Layer<T>> clone() const = 0;
};

/// 3x3 convolution, stride 1, zero padding 1, optionally followed by ReLU.
template <typename T>
class Conv2d final : public Layer<T> {
 public:
  Conv2d(std::string name, std::size_t in_channels, std::size_t out_channels, bool relu);

  Tensor<T> forward(const Tensor<T>& x) override;
  Tensor<T> backward(const Tensor<T>& grad_out) override;
  void collect_params(std::vector<Param<T>*>& out) override;
  void collect_taps(std::vector<FeatureTap<T>>& out) const override;
  std::vector<std::size_t> output_shape(const std::vector<std::size_t>& in) const override;
  std::unique_ptr<Layer<T>> clone() const override { return std::make_unique<Conv2d>(*this); }

  Param<T>& weight() { return weight_; }  // (out, in * 9)
  Param<T>& bias() { return bias_; }
  std::size_t in_channels() const { return in_; }
  std::size_t out_channels() const { return out_; }
  bool relu() const { return relu_; }

 private:
  std::string name_;
  std::size_t in_, out_;
  bool relu_;
  Param<T> weight_, bias_;
  std::vector<std::size_t> in_shape_;
  std::vector<T> cols_;  // im2col of every sample in the batch
  Tensor<T> output_;     // post-activation
  Tensor<T> grad_output_;
};

/// 2x2 max pooling with stride 2.
template <typename T>
class MaxPool2 final : public Layer<T> {
 public:
  Tensor<T> forward(const Tensor<T>& x) override;
  Tensor<T> backward(const Tensor<T>& grad_out) override;
  std::vector<std::size_t> output_shape(const std::vector<std::size_t>& in) const override;
  std::unique_ptr<Layer<T>> clone() const override { return std::make_unique<MaxPool2>(*this); }

 private:
  std::vector<std::size_t> in_shape_;
  std::vector<std::size_t> argmax_;
};

/// (N, C, H, W) -> (N, C*H*W)
template <typename T>
class Flatten final : public Layer<T> {
 public:
  Tensor<T> forward(const Tensor<T>& x) override;
  Tensor<T> backward(const Tensor<T>& grad_out) override;
  std::vector<std::size_t> output_shape(const std::vector<std::size_t>& in) const override;
  std::unique_ptr<Layer<T>> clone() const override { return std::make_unique<Flatten>(*this); }

 private:
  std::vector<std::size_t> in_shape_;
};

/// (N, C, H, W) -> (N, C)
template <typename T>
class GlobalAvgPool final : public Layer<T> {
 public:
  Tensor<T> forward(const Tensor<T>& x) override;
  Tensor<T> backward(const Tensor<T>& grad_out) override;
  std::vector<std::size_t> output_shape(const std::vector<std::size_t>& in) const override;
  std::unique_ptr<Layer<T>> clone() const override { return std::make_unique<GlobalAvgPool>(*this); }

 private:
  std::vector<std::size_t> in_shape_;
};

/// Fully connected layer on (N, F), optionally followed by ReLU.
template <typename T>
class Linear final : public Layer<T> {
 public:
  Linear(std::string name, std::size_t in_features, std::size_t out_features, bool relu);

  Tensor<T> forward(const Tensor<T>& x) override;
  Tensor<T> backward(const Tensor<T>& grad_out) override;
  void collect_params(std::vector<Param<T>*>& out) override;
  std::vector<std::size_t> output_shape(const std::vector<std::size_t>& in) const override;
  std::unique_ptr<Layer<T>> clone() const override { return std::make_unique<Linear>(*this); }

  Param<T>& weight() { return weight_; }  // (out, in)
  Param<T>& bias() { return bias_; }

 private:
  std::string name_;
  std::size_t in_, out_;
  bool relu_;
  Param<T> weight_, bias_;
  Tensor<T> input_;
  Tensor<T> output_;
};

/// out = relu(conv2(relu(conv1(x))) + x) with an identity skip.
template <typename T>
class ResidualBlock final : public Layer<T> {
 public:
  ResidualBlock(std::string name, std::size_t channels);

  Tensor<T> forward(const Tensor<T>& x) override;
  Tensor<T> backward(const Tensor<T>& grad_out) override;
  void collect_params(std::vector<Param<T>*>& out) override;
  void collect_taps(std::vector<FeatureTap<T>>& out) const override;
  std::vector<std::size_t> output_shape(const std::vector<std::size_t>& in) const override;
  std::unique_ptr<Layer<T>> clone() const override { return std::make_unique<ResidualBlock>(*this); }

  Conv2d<T>& first() { return conv1_; }
  Conv2d<T>& second() { return conv2_; }

 private:
  std::string name_;
  Conv2d<T> conv1_, conv2_;
  Tensor<T> output_;
  Tensor<T> grad_output_;
};

}  // namespace dsbias
