// SPDX-License-Identifier: Apache-2.0
#include "dsbias/network.hpp"

#include <cmath>

#include "dsbias/error.hpp"
#include "dsbias/rng.hpp"

namespace dsbias {

std::vector<std::size_t> ModelConfig::stage_channels() const {
  if (!channels.empty()) return channels;
  if (arch == "residual") return {8, 16, 32};
  return {8, 16, 32, 64};
}

std::size_t ModelConfig::downsample_factor() const {
  return std::size_t{1} << stage_channels().size();
}

void ModelConfig::validate() const {
  if (arch != "plain" && arch != "residual") throw InvalidInput("model.arch must be plain or residual, got '" + arch + "'");
  if (n_classes < 2) throw InvalidInput("model.n_classes must be >= 2");
  const auto ch = stage_channels();
  if (ch.empty()) throw InvalidInput("model.channels must not be empty");
  for (auto c : ch)
    if (c == 0) throw InvalidInput("model.channels entries must be positive");
  if (input_size == 0 || input_size % downsample_factor() != 0)
    throw InvalidInput("model.input_size " + std::to_string(input_size) + " not divisible by " +
                       std::to_string(downsample_factor()));
  if (arch == "plain" && hidden == 0) throw InvalidInput("model.hidden must be positive");
}

template <typename T>
Network<T>::Network(const Network& other) {
  for (const auto& l : other.layers_) layers_.push_back(l->clone());
}

template <typename T>
Network<T>& Network<T>::operator=(const Network& other) {
  if (this != &other) {
    layers_.clear();
    for (const auto& l : other.layers_) layers_.push_back(l->clone());
  }
  return *this;
}

template <typename T>
Tensor<T> Network<T>::forward(const Tensor<T>& x) {
  Tensor<T> h = x;
  for (auto& l : layers_) h = l->forward(h);
  return h;
}

template <typename T>
Tensor<T> Network<T>::backward(const Tensor<T>& grad_logits) {
  Tensor<T> g = grad_logits;
  for (auto it = layers_.rbegin(); it != layers_.rend(); ++it) g = (*it)->backward(g);
  return g;
}

template <typename T>
std::vector<Param<T>*> Network<T>::params() {
  std::vector<Param<T>*> out;
  for (auto& l : layers_) l->collect_params(out);
  return out;
}

template <typename T>
void Network<T>::zero_grad() {
  for (auto* p : params()) p->grad.fill(T(0));
}

template <typename T>
std::size_t Network<T>::num_parameters() {
  std::size_t n = 0;
  for (auto* p : params()) n += p->value.numel();
  return n;
}

template <typename T>
std::vector<FeatureTap<T>> Network<T>::feature_taps() const {
  std::vector<FeatureTap<T>> out;
  for (const auto& l : layers_) l->collect_taps(out);
  return out;
}

template <typename T>
std::vector<std::size_t> Network<T>::output_shape(std::vector<std::size_t> in) const {
  for (const auto& l : layers_) in = l->output_shape(in);
  return in;
}

template <typename T>
void init_params(Network<T>& net, std::uint64_t seed) {
  Rng rng(seed);
  for (auto* p : net.params()) {
    p->grad.fill(T(0));
    if (p->value.rank() < 2) {
      p->value.fill(T(0));
      continue;
    }
    const double fan_in = static_cast<double>(p->value.dim(1));
    const bool head = p->name.rfind("head", 0) == 0;
    const double bound = head ? 1.0 / std::sqrt(fan_in) : std::sqrt(6.0 / fan_in);
    for (auto& v : p->value.values()) v = static_cast<T>(rng.uniform(-bound, bound));
  }
}

template <typename T>
Network<T> build_network(const ModelConfig& cfg) {
  cfg.validate();
  const auto ch = cfg.stage_channels();
  Network<T> net;
  std::size_t in = 1;
  if (cfg.arch == "plain") {
    for (std::size_t s = 0; s < ch.size(); ++s) {
      net.add(std::make_unique<Conv2d<T>>("conv" + std::to_string(s + 1), in, ch[s], true));
      net.add(std::make_unique<MaxPool2<T>>());
      in = ch[s];
    }
    const std::size_t side = cfg.input_size / cfg.downsample_factor();
    net.add(std::make_unique<Flatten<T>>());
    net.add(std::make_unique<Linear<T>>("fc1", in * side * side, cfg.hidden, true));
    net.add(std::make_unique<Linear<T>>("head", cfg.hidden, cfg.n_classes, false));
  } else {
    net.add(std::make_unique<Conv2d<T>>("stem", 1, ch[0], true));
    net.add(std::make_unique<MaxPool2<T>>());
    in = ch[0];
    for (std::size_t s = 0; s < ch.size(); ++s) {
      const std::string stage = "stage" + std::to_string(s + 1);
      if (s > 0) {
        net.add(std::make_unique<Conv2d<T>>(stage + ".down", in, ch[s], true));
        net.add(std::make_unique<MaxPool2<T>>());
        in = ch[s];
      }
      net.add(std::make_unique<ResidualBlock<T>>(stage + ".block", in));
    }
    net.add(std::make_unique<GlobalAvgPool<T>>());
    net.add(std::make_unique<Linear<T>>("head", in, cfg.n_classes, false));
  }
  init_params(net, cfg.seed);
  return net;
}

template class Network<float>;
template class Network<double>;
template Network<float> build_network<float>(const ModelConfig&);
template Network<double> build_network<double>(const ModelConfig&);
template void init_params<float>(Network<float>&, std::uint64_t);
template void init_params<double>(Network<double>&, std::uint64_t);

}  // namespace dsbias
