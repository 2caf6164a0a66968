// SPDX-License-Identifier: Apache-2.0
#include "dsbias/layers.hpp"

#include <Eigen/Core>
#include <limits>

#include "dsbias/error.hpp"

namespace dsbias {

namespace {

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MapMat = Eigen::Map<RowMat<T>>;
template <typename T>
using CMapMat = Eigen::Map<const RowMat<T>>;

std::string shape_str(const std::vector<std::size_t>& s) {
  std::string out = "(";
  for (std::size_t i = 0; i < s.size(); ++i) out += (i ? "," : "") + std::to_string(s[i]);
  return out + ")";
}

void expect_rank(const std::vector<std::size_t>& s, std::size_t rank, const char* who) {
  if (s.size() != rank) throw InvalidInput(std::string(who) + ": unexpected input shape " + shape_str(s));
}

template <typename T>
Param<T> make_param(std::string name, std::vector<std::size_t> shape) {
  Param<T> p{std::move(name), Tensor<T>(shape), Tensor<T>(shape)};
  return p;
}

}  // namespace

// ---------------------------------------------------------------- Conv2d

template <typename T>
Conv2d<T>::Conv2d(std::string name, std::size_t in_channels, std::size_t out_channels, bool relu)
    : name_(std::move(name)),
      in_(in_channels),
      out_(out_channels),
      relu_(relu),
      weight_(make_param<T>(name_ + ".weight", {out_channels, in_channels * 9})),
      bias_(make_param<T>(name_ + ".bias", {out_channels})) {}

template <typename T>
std::vector<std::size_t> Conv2d<T>::output_shape(const std::vector<std::size_t>& in) const {
  expect_rank(in, 4, "conv2d");
  if (in[1] != in_) throw InvalidInput(name_ + ": expected " + std::to_string(in_) + " input channels, got " + shape_str(in));
  return {in[0], out_, in[2], in[3]};
}

template <typename T>
Tensor<T> Conv2d<T>::forward(const Tensor<T>& x) {
  const auto out_shape = output_shape(x.shape());
  in_shape_ = x.shape();
  const std::size_t n = in_shape_[0], h = in_shape_[2], w = in_shape_[3], hw = h * w, k = in_ * 9;
  cols_.assign(n * k * hw, T(0));
  Tensor<T> y(out_shape);
  const CMapMat<T> wmat(weight_.value.data(), static_cast<Eigen::Index>(out_), static_cast<Eigen::Index>(k));
  for (std::size_t s = 0; s < n; ++s) {
    T* col = cols_.data() + s * k * hw;
    const T* src = x.data() + s * in_ * hw;
    for (std::size_t c = 0; c < in_; ++c)
      for (std::size_t ky = 0; ky < 3; ++ky)
        for (std::size_t kx = 0; kx < 3; ++kx) {
          T* row = col + (c * 9 + ky * 3 + kx) * hw;
          for (std::size_t yy = 0; yy < h; ++yy) {
            const std::ptrdiff_t sy = static_cast<std::ptrdiff_t>(yy + ky) - 1;
            if (sy < 0 || sy >= static_cast<std::ptrdiff_t>(h)) continue;
            const T* srow = src + c * hw + static_cast<std::size_t>(sy) * w;
            for (std::size_t xx = 0; xx < w; ++xx) {
              const std::ptrdiff_t sx = static_cast<std::ptrdiff_t>(xx + kx) - 1;
              if (sx >= 0 && sx < static_cast<std::ptrdiff_t>(w)) row[yy * w + xx] = srow[sx];
            }
          }
        }
    MapMat<T> ymat(y.data() + s * out_ * hw, static_cast<Eigen::Index>(out_), static_cast<Eigen::Index>(hw));
    const CMapMat<T> cmat(col, static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(hw));
    ymat.noalias() = wmat * cmat;
    for (std::size_t o = 0; o < out_; ++o) ymat.row(static_cast<Eigen::Index>(o)).array() += bias_.value[o];
  }
  if (relu_)
    for (auto& v : y.values()) v = v > T(0) ? v : T(0);
  output_ = y;
  return y;
}

template <typename T>
Tensor<T> Conv2d<T>::backward(const Tensor<T>& grad_out) {
  if (grad_out.shape() != output_.shape()) throw InvalidInput(name_ + ": gradient shape mismatch");
  grad_output_ = grad_out;
  Tensor<T> g = grad_out;
  if (relu_)
    for (std::size_t i = 0; i < g.numel(); ++i)
      if (!(output_[i] > T(0))) g[i] = T(0);

  const std::size_t n = in_shape_[0], h = in_shape_[2], w = in_shape_[3], hw = h * w, k = in_ * 9;
  Tensor<T> gx(in_shape_);
  const CMapMat<T> wmat(weight_.value.data(), static_cast<Eigen::Index>(out_), static_cast<Eigen::Index>(k));
  MapMat<T> gw(weight_.grad.data(), static_cast<Eigen::Index>(out_), static_cast<Eigen::Index>(k));
  std::vector<T> gcol(k * hw);
  for (std::size_t s = 0; s < n; ++s) {
    const CMapMat<T> gmat(g.data() + s * out_ * hw, static_cast<Eigen::Index>(out_), static_cast<Eigen::Index>(hw));
    const CMapMat<T> cmat(cols_.data() + s * k * hw, static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(hw));
    gw.noalias() += gmat * cmat.transpose();
    for (std::size_t o = 0; o < out_; ++o) bias_.grad[o] += gmat.row(static_cast<Eigen::Index>(o)).sum();
    MapMat<T> gc(gcol.data(), static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(hw));
    gc.noalias() = wmat.transpose() * gmat;
    T* dst = gx.data() + s * in_ * hw;
    for (std::size_t c = 0; c < in_; ++c)
      for (std::size_t ky = 0; ky < 3; ++ky)
        for (std::size_t kx = 0; kx < 3; ++kx) {
          const T* row = gcol.data() + (c * 9 + ky * 3 + kx) * hw;
          for (std::size_t yy = 0; yy < h; ++yy) {
            const std::ptrdiff_t sy = static_cast<std::ptrdiff_t>(yy + ky) - 1;
            if (sy < 0 || sy >= static_cast<std::ptrdiff_t>(h)) continue;
            T* drow = dst + c * hw + static_cast<std::size_t>(sy) * w;
            for (std::size_t xx = 0; xx < w; ++xx) {
              const std::ptrdiff_t sx = static_cast<std::ptrdiff_t>(xx + kx) - 1;
              if (sx >= 0 && sx < static_cast<std::ptrdiff_t>(w)) drow[sx] += row[yy * w + xx];
            }
          }
        }
  }
  return gx;
}

template <typename T>
void Conv2d<T>::collect_params(std::vector<Param<T>*>& out) {
  out.push_back(&weight_);
  out.push_back(&bias_);
}

template <typename T>
void Conv2d<T>::collect_taps(std::vector<FeatureTap<T>>& out) const {
  if (relu_) out.push_back({name_, &output_, &grad_output_});
}

// ---------------------------------------------------------------- MaxPool2

template <typename T>
std::vector<std::size_t> MaxPool2<T>::output_shape(const std::vector<std::size_t>& in) const {
  expect_rank(in, 4, "maxpool");
  if (in[2] % 2 || in[3] % 2) throw InvalidInput("maxpool: spatial size " + shape_str(in) + " not even");
  return {in[0], in[1], in[2] / 2, in[3] / 2};
}

template <typename T>
Tensor<T> MaxPool2<T>::forward(const Tensor<T>& x) {
  const auto os = output_shape(x.shape());
  in_shape_ = x.shape();
  Tensor<T> y(os);
  argmax_.assign(y.numel(), 0);
  const std::size_t planes = os[0] * os[1], oh = os[2], ow = os[3], iw = in_shape_[3];
  for (std::size_t p = 0; p < planes; ++p) {
    const std::size_t base = p * in_shape_[2] * iw;
    for (std::size_t r = 0; r < oh; ++r)
      for (std::size_t c = 0; c < ow; ++c) {
        std::size_t best = base + 2 * r * iw + 2 * c;
        for (std::size_t dr = 0; dr < 2; ++dr)
          for (std::size_t dc = 0; dc < 2; ++dc) {
            const std::size_t idx = base + (2 * r + dr) * iw + 2 * c + dc;
            if (x[idx] > x[best]) best = idx;
          }
        const std::size_t o = (p * oh + r) * ow + c;
        y[o] = x[best];
        argmax_[o] = best;
      }
  }
  return y;
}

template <typename T>
Tensor<T> MaxPool2<T>::backward(const Tensor<T>& grad_out) {
  Tensor<T> gx(in_shape_);
  for (std::size_t o = 0; o < grad_out.numel(); ++o) gx[argmax_[o]] += grad_out[o];
  return gx;
}

// ---------------------------------------------------------------- Flatten

template <typename T>
std::vector<std::size_t> Flatten<T>::output_shape(const std::vector<std::size_t>& in) const {
  if (in.empty()) throw InvalidInput("flatten: rank-0 input");
  std::size_t f = 1;
  for (std::size_t i = 1; i < in.size(); ++i) f *= in[i];
  return {in[0], f};
}

template <typename T>
Tensor<T> Flatten<T>::forward(const Tensor<T>& x) {
  in_shape_ = x.shape();
  Tensor<T> y = x;
  y.reshape(output_shape(x.shape()));
  return y;
}

template <typename T>
Tensor<T> Flatten<T>::backward(const Tensor<T>& grad_out) {
  Tensor<T> g = grad_out;
  g.reshape(in_shape_);
  return g;
}

// ---------------------------------------------------------------- GlobalAvgPool

template <typename T>
std::vector<std::size_t> GlobalAvgPool<T>::output_shape(const std::vector<std::size_t>& in) const {
  expect_rank(in, 4, "global_avg_pool");
  return {in[0], in[1]};
}

template <typename T>
Tensor<T> GlobalAvgPool<T>::forward(const Tensor<T>& x) {
  in_shape_ = x.shape();
  Tensor<T> y(output_shape(x.shape()));
  const std::size_t hw = in_shape_[2] * in_shape_[3];
  for (std::size_t p = 0; p < y.numel(); ++p) {
    T s = T(0);
    for (std::size_t i = 0; i < hw; ++i) s += x[p * hw + i];
    y[p] = s / static_cast<T>(hw);
  }
  return y;
}

template <typename T>
Tensor<T> GlobalAvgPool<T>::backward(const Tensor<T>& grad_out) {
  Tensor<T> gx(in_shape_);
  const std::size_t hw = in_shape_[2] * in_shape_[3];
  for (std::size_t p = 0; p < grad_out.numel(); ++p) {
    const T g = grad_out[p] / static_cast<T>(hw);
    for (std::size_t i = 0; i < hw; ++i) gx[p * hw + i] = g;
  }
  return gx;
}

// ---------------------------------------------------------------- Linear

template <typename T>
Linear<T>::Linear(std::string name, std::size_t in_features, std::size_t out_features, bool relu)
    : name_(std::move(name)),
      in_(in_features),
      out_(out_features),
      relu_(relu),
      weight_(make_param<T>(name_ + ".weight", {out_features, in_features})),
      bias_(make_param<T>(name_ + ".bias", {out_features})) {}

template <typename T>
std::vector<std::size_t> Linear<T>::output_shape(const std::vector<std::size_t>& in) const {
  expect_rank(in, 2, "linear");
  if (in[1] != in_) throw InvalidInput(name_ + ": expected " + std::to_string(in_) + " features, got " + shape_str(in));
  return {in[0], out_};
}

template <typename T>
Tensor<T> Linear<T>::forward(const Tensor<T>& x) {
  Tensor<T> y(output_shape(x.shape()));
  input_ = x;
  const auto n = static_cast<Eigen::Index>(x.dim(0));
  const CMapMat<T> xm(x.data(), n, static_cast<Eigen::Index>(in_));
  const CMapMat<T> wm(weight_.value.data(), static_cast<Eigen::Index>(out_), static_cast<Eigen::Index>(in_));
  MapMat<T> ym(y.data(), n, static_cast<Eigen::Index>(out_));
  ym.noalias() = xm * wm.transpose();
  for (Eigen::Index r = 0; r < n; ++r)
    for (std::size_t o = 0; o < out_; ++o) {
      T& v = ym(r, static_cast<Eigen::Index>(o));
      v += bias_.value[o];
      if (relu_ && !(v > T(0))) v = T(0);
    }
  output_ = y;
  return y;
}

template <typename T>
Tensor<T> Linear<T>::backward(const Tensor<T>& grad_out) {
  if (grad_out.shape() != output_.shape()) throw InvalidInput(name_ + ": gradient shape mismatch");
  Tensor<T> g = grad_out;
  if (relu_)
    for (std::size_t i = 0; i < g.numel(); ++i)
      if (!(output_[i] > T(0))) g[i] = T(0);
  const auto n = static_cast<Eigen::Index>(g.dim(0));
  const CMapMat<T> gm(g.data(), n, static_cast<Eigen::Index>(out_));
  const CMapMat<T> xm(input_.data(), n, static_cast<Eigen::Index>(in_));
  const CMapMat<T> wm(weight_.value.data(), static_cast<Eigen::Index>(out_), static_cast<Eigen::Index>(in_));
  MapMat<T> gw(weight_.grad.data(), static_cast<Eigen::Index>(out_), static_cast<Eigen::Index>(in_));
  gw.noalias() += gm.transpose() * xm;
  for (std::size_t o = 0; o < out_; ++o) bias_.grad[o] += gm.col(static_cast<Eigen::Index>(o)).sum();
  Tensor<T> gx(input_.shape());
  MapMat<T> gxm(gx.data(), n, static_cast<Eigen::Index>(in_));
  gxm.noalias() = gm * wm;
  return gx;
}

template <typename T>
void Linear<T>::collect_params(std::vector<Param<T>*>& out) {
  out.push_back(&weight_);
  out.push_back(&bias_);
}

// ---------------------------------------------------------------- ResidualBlock

template <typename T>
ResidualBlock<T>::ResidualBlock(std::string name, std::size_t channels)
    : name_(name), conv1_(name + ".conv1", channels, channels, true), conv2_(name + ".conv2", channels, channels, false) {}

template <typename T>
std::vector<std::size_t> ResidualBlock<T>::output_shape(const std::vector<std::size_t>& in) const {
  return conv2_.output_shape(conv1_.output_shape(in));
}

template <typename T>
Tensor<T> ResidualBlock<T>::forward(const Tensor<T>& x) {
  Tensor<T> y = conv2_.forward(conv1_.forward(x));
  for (std::size_t i = 0; i < y.numel(); ++i) {
    const T v = y[i] + x[i];
    y[i] = v > T(0) ? v : T(0);
  }
  output_ = y;
  return y;
}

template <typename T>
Tensor<T> ResidualBlock<T>::backward(const Tensor<T>& grad_out) {
  grad_output_ = grad_out;
  Tensor<T> g = grad_out;
  for (std::size_t i = 0; i < g.numel(); ++i)
    if (!(output_[i] > T(0))) g[i] = T(0);
  Tensor<T> gx = conv1_.backward(conv2_.backward(g));
  for (std::size_t i = 0; i < gx.numel(); ++i) gx[i] += g[i];
  return gx;
}

template <typename T>
void ResidualBlock<T>::collect_params(std::vector<Param<T>*>& out) {
  conv1_.collect_params(out);
  conv2_.collect_params(out);
}

template <typename T>
void ResidualBlock<T>::collect_taps(std::vector<FeatureTap<T>>& out) const {
  conv1_.collect_taps(out);
  out.push_back({name_, &output_, &grad_output_});
}

template class Conv2d<float>;
template class Conv2d<double>;
template class MaxPool2<float>;
template class MaxPool2<double>;
template class Flatten<float>;
template class Flatten<double>;
template class GlobalAvgPool<float>;
template class GlobalAvgPool<double>;
template class Linear<float>;
template class Linear<double>;
template class ResidualBlock<float>;
template class ResidualBlock<double>;

}  // namespace dsbias
