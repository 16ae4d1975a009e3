#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "d2i/nn/tensor.hpp"

namespace d2i::nn {

struct LayerSpec {
  enum class Kind : std::uint8_t { conv = 1, relu = 2, maxpool = 3, dense = 4, dropout = 5, softmax = 6 };
  Kind kind = Kind::relu;
  int out_channels = 0;  // conv
  int kernel = 0;        // conv, square
  int units = 0;         // dense
  float rate = 0.0f;     // dropout

  static LayerSpec conv(int out_channels, int kernel) {
    return {Kind::conv, out_channels, kernel, 0, 0.0f};
  }
  static LayerSpec relu() { return {Kind::relu, 0, 0, 0, 0.0f}; }
  static LayerSpec maxpool() { return {Kind::maxpool, 0, 0, 0, 0.0f}; }
  static LayerSpec dense(int units) { return {Kind::dense, 0, 0, units, 0.0f}; }
  static LayerSpec dropout(float rate) { return {Kind::dropout, 0, 0, 0, rate}; }
  static LayerSpec softmax() { return {Kind::softmax, 0, 0, 0, 0.0f}; }
};

struct Shape3 {
  int c = 0, h = 0, w = 0;
  bool operator==(const Shape3&) const = default;
};

template <class T>
struct ParamTensor {
  std::string name;
  std::vector<int> shape;
  AlignedVector<T> value;
  AlignedVector<T> grad;
  bool trainable = true;

  std::size_t size() const { return value.size(); }
  void zero_grad() { std::fill(grad.begin(), grad.end(), T(0)); }
};

namespace detail {

// Truncated normal scaled by fan-in (He): std = sqrt(2/fan_in), resampling
// anything beyond two standard deviations. A fixed std of 0.1 saturates the
// softmax as soon as the dense fan-in grows past a few thousand.
template <class T>
void init_truncated_normal(AlignedVector<T>& values, int fan_in, std::mt19937_64& rng) {
  const double stddev = std::sqrt(2.0 / std::max(1, fan_in));
  std::normal_distribution<double> dist(0.0, stddev);
  for (auto& v : values) {
    double z = dist(rng);
    while (std::abs(z) > 2.0 * stddev) z = dist(rng);
    v = static_cast<T>(z);
  }
}

template <class T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <class T>
using MatMap = Eigen::Map<RowMat<T>>;
template <class T>
using ConstMatMap = Eigen::Map<const RowMat<T>>;

}  // namespace detail

template <class T>
class Layer {
 public:
  virtual ~Layer() = default;
  virtual LayerSpec spec() const = 0;
  virtual Shape3 output_shape(Shape3 in) const = 0;
  // `seed` only matters for layers that draw randomness (dropout); calling
  // forward twice with the same inputs, mode and seed gives identical output.
  virtual Tensor4<T> forward(const Tensor4<T>& x, bool train, std::uint64_t seed) = 0;
  // Uses the caches of the most recent forward call.
  virtual Tensor4<T> backward(const Tensor4<T>& dy) = 0;
  virtual std::vector<ParamTensor<T>*> params() { return {}; }
};

// Cross-correlation, stride 1, same padding. Weights laid out
// [out][in][ky][kx]; forward/backward run one GEMM per image over the
// im2col buffer so batch-parallel execution stays deterministic.
template <class T>
class Conv2D : public Layer<T> {
 public:
  Conv2D(int in_channels, int out_channels, int kernel, std::mt19937_64& rng)
      : in_(in_channels), out_(out_channels), k_(kernel) {
    if (kernel < 1 || out_channels < 1 || in_channels < 1) throw ConfigError("conv: bad geometry");
    weights_.name = "conv_w";
    weights_.shape = {out_, in_, k_, k_};
    weights_.value.resize(std::size_t(out_) * in_ * k_ * k_);
    weights_.grad.assign(weights_.value.size(), T(0));
    detail::init_truncated_normal(weights_.value, in_ * k_ * k_, rng);
    bias_.name = "conv_b";
    bias_.shape = {out_};
    bias_.value.assign(out_, T(0));
    bias_.grad.assign(out_, T(0));
  }

  LayerSpec spec() const override { return LayerSpec::conv(out_, k_); }
  Shape3 output_shape(Shape3 in) const override { return {out_, in.h, in.w}; }
  std::vector<ParamTensor<T>*> params() override { return {&weights_, &bias_}; }

  Tensor4<T> forward(const Tensor4<T>& x, bool, std::uint64_t) override {
    if (x.c != in_) throw ConfigError("conv: input channels mismatch");
    in_shape_ = {x.c, x.h, x.w};
    batch_ = x.n;
    const int hw = x.h * x.w;
    const int patch = in_ * k_ * k_;
    cols_.assign(std::size_t(x.n) * hw * patch, T(0));

    Tensor4<T> y(x.n, out_, x.h, x.w);
    detail::ConstMatMap<T> wmat(weights_.value.data(), out_, patch);
#pragma omp parallel for schedule(static)
    for (int b = 0; b < x.n; ++b) {
      T* col = cols_.data() + std::size_t(b) * hw * patch;
      im2col(x, b, col);
      detail::ConstMatMap<T> cmat(col, hw, patch);
      detail::MatMap<T> ymat(y.v.data() + std::size_t(b) * y.per_image(), out_, hw);
      ymat.noalias() = wmat * cmat.transpose();
      for (int oc = 0; oc < out_; ++oc) ymat.row(oc).array() += bias_.value[oc];
    }
    return y;
  }

  Tensor4<T> backward(const Tensor4<T>& dy) override {
    const int hw = in_shape_.h * in_shape_.w;
    const int patch = in_ * k_ * k_;
    Tensor4<T> dx(batch_, in_, in_shape_.h, in_shape_.w);
    AlignedVector<T> dw_partial(std::size_t(batch_) * out_ * patch);
    detail::ConstMatMap<T> wmat(weights_.value.data(), out_, patch);

#pragma omp parallel for schedule(static)
    for (int b = 0; b < batch_; ++b) {
      detail::ConstMatMap<T> dymat(dy.v.data() + std::size_t(b) * dy.per_image(), out_, hw);
      detail::ConstMatMap<T> cmat(cols_.data() + std::size_t(b) * hw * patch, hw, patch);
      detail::MatMap<T> dwmat(dw_partial.data() + std::size_t(b) * out_ * patch, out_, patch);
      dwmat.noalias() = dymat * cmat;

      AlignedVector<T> dcol(std::size_t(hw) * patch);
      detail::MatMap<T> dcmat(dcol.data(), hw, patch);
      dcmat.noalias() = dymat.transpose() * wmat;
      col2im(dcol.data(), dx, b);
    }

    // Reduce the per-image pieces in image order, independent of threading.
    detail::MatMap<T> dwacc(weights_.grad.data(), out_, patch);
    for (int b = 0; b < batch_; ++b) {
      dwacc += detail::ConstMatMap<T>(dw_partial.data() + std::size_t(b) * out_ * patch, out_, patch);
    }
    for (int b = 0; b < batch_; ++b) {
      detail::ConstMatMap<T> dymat(dy.v.data() + std::size_t(b) * dy.per_image(), out_, hw);
      for (int oc = 0; oc < out_; ++oc) bias_.grad[oc] += dymat.row(oc).sum();
    }
    return dx;
  }

 private:
  void im2col(const Tensor4<T>& x, int b, T* col) const {
    const int h = x.h, w = x.w;
    const int pad = (k_ - 1) / 2;
    const int patch = in_ * k_ * k_;
    for (int y = 0; y < h; ++y) {
      for (int xx = 0; xx < w; ++xx) {
        T* row = col + (std::size_t(y) * w + xx) * patch;
        for (int ic = 0; ic < in_; ++ic) {
          for (int ky = 0; ky < k_; ++ky) {
            const int sy = y + ky - pad;
            for (int kx = 0; kx < k_; ++kx) {
              const int sx = xx + kx - pad;
              row[(ic * k_ + ky) * k_ + kx] =
                  (sy >= 0 && sy < h && sx >= 0 && sx < w) ? x.at(b, ic, sy, sx) : T(0);
            }
          }
        }
      }
    }
  }

  void col2im(const T* dcol, Tensor4<T>& dx, int b) const {
    const int h = in_shape_.h, w = in_shape_.w;
    const int pad = (k_ - 1) / 2;
    const int patch = in_ * k_ * k_;
    for (int y = 0; y < h; ++y) {
      for (int xx = 0; xx < w; ++xx) {
        const T* row = dcol + (std::size_t(y) * w + xx) * patch;
        for (int ic = 0; ic < in_; ++ic) {
          for (int ky = 0; ky < k_; ++ky) {
            const int sy = y + ky - pad;
            if (sy < 0 || sy >= h) continue;
            for (int kx = 0; kx < k_; ++kx) {
              const int sx = xx + kx - pad;
              if (sx < 0 || sx >= w) continue;
              dx.at(b, ic, sy, sx) += row[(ic * k_ + ky) * k_ + kx];
            }
          }
        }
      }
    }
  }

 protected:
  int in_, out_, k_;
  ParamTensor<T> weights_, bias_;

 private:
  Shape3 in_shape_{};
  int batch_ = 0;
  AlignedVector<T> cols_;
};

template <class T>
class Relu final : public Layer<T> {
 public:
  LayerSpec spec() const override { return LayerSpec::relu(); }
  Shape3 output_shape(Shape3 in) const override { return in; }

  Tensor4<T> forward(const Tensor4<T>& x, bool, std::uint64_t) override {
    mask_.assign(x.size(), 0);
    Tensor4<T> y = x;
    for (std::size_t i = 0; i < y.v.size(); ++i) {
      if (y.v[i] > T(0)) {
        mask_[i] = 1;
      } else {
        y.v[i] = T(0);
      }
    }
    return y;
  }

  Tensor4<T> backward(const Tensor4<T>& dy) override {
    Tensor4<T> dx = dy;
    for (std::size_t i = 0; i < dx.v.size(); ++i) {
      if (!mask_[i]) dx.v[i] = T(0);
    }
    return dx;
  }

 private:
  std::vector<std::uint8_t> mask_;
};

// 2x2 window, stride 2. Odd trailing rows/columns pool over the clipped
// window (equivalent to padding with -inf). The winning input index per
// output cell is recorded so backward routes gradient only there.
template <class T>
class MaxPool final : public Layer<T> {
 public:
  LayerSpec spec() const override { return LayerSpec::maxpool(); }
  Shape3 output_shape(Shape3 in) const override { return {in.c, (in.h + 1) / 2, (in.w + 1) / 2}; }

  Tensor4<T> forward(const Tensor4<T>& x, bool, std::uint64_t) override {
    in_shape_ = {x.c, x.h, x.w};
    batch_ = x.n;
    const int oh = (x.h + 1) / 2, ow = (x.w + 1) / 2;
    Tensor4<T> y(x.n, x.c, oh, ow);
    argmax_.resize(y.size());
    for (int b = 0; b < x.n; ++b) {
      for (int c = 0; c < x.c; ++c) {
        for (int oy = 0; oy < oh; ++oy) {
          for (int ox = 0; ox < ow; ++ox) {
            T best{};
            std::size_t best_idx = 0;
            bool first = true;
            for (int dy0 = 0; dy0 < 2; ++dy0) {
              const int sy = oy * 2 + dy0;
              if (sy >= x.h) continue;
              for (int dx0 = 0; dx0 < 2; ++dx0) {
                const int sx = ox * 2 + dx0;
                if (sx >= x.w) continue;
                const T v = x.at(b, c, sy, sx);
                if (first || v > best) {
                  best = v;
                  best_idx = ((std::size_t(b) * x.c + c) * x.h + sy) * x.w + sx;
                  first = false;
                }
              }
            }
            y.at(b, c, oy, ox) = best;
            argmax_[((std::size_t(b) * x.c + c) * oh + oy) * ow + ox] = best_idx;
          }
        }
      }
    }
    return y;
  }

  Tensor4<T> backward(const Tensor4<T>& dy) override {
    Tensor4<T> dx(batch_, in_shape_.c, in_shape_.h, in_shape_.w);
    for (std::size_t i = 0; i < dy.v.size(); ++i) dx.v[argmax_[i]] += dy.v[i];
    return dx;
  }

 private:
  Shape3 in_shape_{};
  int batch_ = 0;
  std::vector<std::size_t> argmax_;
};

// Fully connected over the flattened (c*h*w) features; output is (n, units, 1, 1).
template <class T>
class Dense final : public Layer<T> {
 public:
  Dense(int in_features, int units, std::mt19937_64& rng) : in_features_(in_features), units_(units) {
    if (in_features < 1 || units < 1) throw ConfigError("dense: bad geometry");
    weights_.name = "dense_w";
    weights_.shape = {units_, in_features_};
    weights_.value.resize(std::size_t(units_) * in_features_);
    weights_.grad.assign(weights_.value.size(), T(0));
    detail::init_truncated_normal(weights_.value, in_features_, rng);
    bias_.name = "dense_b";
    bias_.shape = {units_};
    bias_.value.assign(units_, T(0));
    bias_.grad.assign(units_, T(0));
  }

  LayerSpec spec() const override { return LayerSpec::dense(units_); }
  Shape3 output_shape(Shape3 in) const override {
    if (in.c * in.h * in.w != in_features_) throw ConfigError("dense: input features mismatch");
    return {units_, 1, 1};
  }
  std::vector<ParamTensor<T>*> params() override { return {&weights_, &bias_}; }

  Tensor4<T> forward(const Tensor4<T>& x, bool, std::uint64_t) override {
    if (int(x.per_image()) != in_features_) throw ConfigError("dense: input features mismatch");
    x_cache_ = x;
    Tensor4<T> y(x.n, units_, 1, 1);
    detail::ConstMatMap<T> xmat(x.v.data(), x.n, in_features_);
    detail::ConstMatMap<T> wmat(weights_.value.data(), units_, in_features_);
    detail::MatMap<T> ymat(y.v.data(), x.n, units_);
    ymat.noalias() = xmat * wmat.transpose();
    detail::ConstMatMap<T> bmat(bias_.value.data(), 1, units_);
    ymat.rowwise() += bmat.row(0);
    return y;
  }

  Tensor4<T> backward(const Tensor4<T>& dy) override {
    const int n = x_cache_.n;
    detail::ConstMatMap<T> dymat(dy.v.data(), n, units_);
    detail::ConstMatMap<T> xmat(x_cache_.v.data(), n, in_features_);
    detail::MatMap<T> dwmat(weights_.grad.data(), units_, in_features_);
    dwmat.noalias() += dymat.transpose() * xmat;
    detail::MatMap<T> dbmat(bias_.grad.data(), 1, units_);
    dbmat.row(0) += dymat.colwise().sum();

    Tensor4<T> dx(n, x_cache_.c, x_cache_.h, x_cache_.w);
    detail::MatMap<T> dxmat(dx.v.data(), n, in_features_);
    detail::ConstMatMap<T> wmat(weights_.value.data(), units_, in_features_);
    dxmat.noalias() = dymat * wmat;
    return dx;
  }

 private:
  int in_features_, units_;
  ParamTensor<T> weights_, bias_;
  Tensor4<T> x_cache_;
};

// Inverted dropout: kept activations scale by 1/(1-rate) in train mode so
// eval needs no correction, and rate 0 is exactly the identity.
template <class T>
class Dropout final : public Layer<T> {
 public:
  explicit Dropout(float rate, int layer_index) : rate_(rate), layer_index_(layer_index) {
    if (rate < 0.0f || rate >= 1.0f) throw ConfigError("dropout: rate must lie in [0, 1)");
  }

  LayerSpec spec() const override { return LayerSpec::dropout(rate_); }
  Shape3 output_shape(Shape3 in) const override { return in; }

  Tensor4<T> forward(const Tensor4<T>& x, bool train, std::uint64_t seed) override {
    if (!train || rate_ == 0.0f) {
      mask_.assign(x.size(), 1);
      scaled_ = false;
      return x;
    }
    std::mt19937_64 rng(seed ^ (0x9E3779B97F4A7C15ULL * std::uint64_t(layer_index_ + 1)));
    std::bernoulli_distribution keep(1.0 - rate_);
    mask_.resize(x.size());
    scaled_ = true;
    const T scale = T(1) / (T(1) - T(rate_));
    Tensor4<T> y = x;
    for (std::size_t i = 0; i < y.v.size(); ++i) {
      mask_[i] = keep(rng) ? 1 : 0;
      y.v[i] = mask_[i] ? y.v[i] * scale : T(0);
    }
    return y;
  }

  Tensor4<T> backward(const Tensor4<T>& dy) override {
    Tensor4<T> dx = dy;
    if (!scaled_) return dx;
    const T scale = T(1) / (T(1) - T(rate_));
    for (std::size_t i = 0; i < dx.v.size(); ++i) dx.v[i] = mask_[i] ? dx.v[i] * scale : T(0);
    return dx;
  }

  float rate() const { return rate_; }

 private:
  float rate_;
  int layer_index_;
  std::vector<std::uint8_t> mask_;
  bool scaled_ = false;
};

// Row-stable softmax over the channel axis of a (n, c, 1, 1) tensor.
template <class T>
class Softmax final : public Layer<T> {
 public:
  LayerSpec spec() const override { return LayerSpec::softmax(); }
  Shape3 output_shape(Shape3 in) const override {
    if (in.h != 1 || in.w != 1) throw ConfigError("softmax: expects (n, c, 1, 1) input");
    return in;
  }

  Tensor4<T> forward(const Tensor4<T>& x, bool, std::uint64_t) override {
    Tensor4<T> y = x;
    for (int b = 0; b < x.n; ++b) {
      T* row = y.v.data() + std::size_t(b) * x.c;
      T hi = row[0];
      for (int c = 1; c < x.c; ++c) hi = std::max(hi, row[c]);
      T sum = T(0);
      for (int c = 0; c < x.c; ++c) {
        row[c] = std::exp(row[c] - hi);
        sum += row[c];
      }
      for (int c = 0; c < x.c; ++c) row[c] /= sum;
    }
    probs_ = y;
    return y;
  }

  Tensor4<T> backward(const Tensor4<T>& dy) override {
    Tensor4<T> dx = dy;
    for (int b = 0; b < dy.n; ++b) {
      const T* p = probs_.v.data() + std::size_t(b) * dy.c;
      T* g = dx.v.data() + std::size_t(b) * dy.c;
      T inner = T(0);
      for (int c = 0; c < dy.c; ++c) inner += p[c] * g[c];
      for (int c = 0; c < dy.c; ++c) g[c] = p[c] * (g[c] - inner);
    }
    return dx;
  }

 private:
  Tensor4<T> probs_;
};

}  // namespace d2i::nn
