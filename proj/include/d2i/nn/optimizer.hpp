#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "d2i/nn/layers.hpp"

namespace d2i::nn {

template <class T>
class Optimizer {
 public:
  virtual ~Optimizer() = default;
  // Applies one update from the accumulated gradients. Parameters with
  // trainable == false are left bitwise untouched.
  virtual void step(const std::vector<ParamTensor<T>*>& params) = 0;
};

template <class T>
class Sgd final : public Optimizer<T> {
 public:
  explicit Sgd(T lr) : lr_(lr) {}

  void step(const std::vector<ParamTensor<T>*>& params) override {
    for (auto* p : params) {
      if (!p->trainable) continue;
      for (std::size_t i = 0; i < p->value.size(); ++i) p->value[i] -= lr_ * p->grad[i];
    }
  }

 private:
  T lr_;
};

// Standard Adam with bias correction. Moment buffers are keyed by the
// position of the tensor in the params() order, which is stable per model.
template <class T>
class Adam final : public Optimizer<T> {
 public:
  explicit Adam(T lr, T beta1 = T(0.9), T beta2 = T(0.999), T eps = T(1e-8))
      : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {}

  void step(const std::vector<ParamTensor<T>*>& params) override {
    if (m_.empty()) {
      m_.resize(params.size());
      v_.resize(params.size());
      for (std::size_t i = 0; i < params.size(); ++i) {
        m_[i].assign(params[i]->size(), T(0));
        v_[i].assign(params[i]->size(), T(0));
      }
    }
    ++t_;
    const T bc1 = T(1) - T(std::pow(double(beta1_), double(t_)));
    const T bc2 = T(1) - T(std::pow(double(beta2_), double(t_)));
    for (std::size_t i = 0; i < params.size(); ++i) {
      auto* p = params[i];
      if (!p->trainable) continue;
      for (std::size_t j = 0; j < p->value.size(); ++j) {
        const T g = p->grad[j];
        m_[i][j] = beta1_ * m_[i][j] + (T(1) - beta1_) * g;
        v_[i][j] = beta2_ * v_[i][j] + (T(1) - beta2_) * g * g;
        const T m_hat = m_[i][j] / bc1;
        const T v_hat = v_[i][j] / bc2;
        p->value[j] -= lr_ * m_hat / (std::sqrt(v_hat) + eps_);
      }
    }
  }

 private:
  T lr_, beta1_, beta2_, eps_;
  long long t_ = 0;
  std::vector<std::vector<T>> m_;
  std::vector<std::vector<T>> v_;
};

}  // namespace d2i::nn
