#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "d2i/nn/model.hpp"

namespace d2i::nn {

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::size_t checked = 0;
};

// Central-difference check of every parameter gradient (and the input
// gradient) against loss_and_backward. Error per coordinate is
// |ga - gn| / max(1, |ga|, |gn|): relative for large gradients, absolute for
// small ones. `stride` > 1 samples every stride-th coordinate of each
// tensor. The dropout seed is held fixed so all evaluations see one mask.
template <class T>
GradCheckResult grad_check(Cnn<T>& model, const Tensor4<T>& x, const std::vector<int>& labels,
                           double step, std::size_t stride = 1, std::uint64_t dropout_seed = 1234) {
  model.zero_grads();
  Tensor4<T> dx;
  model.loss_and_backward(x, labels, dropout_seed, &dx);

  std::vector<AlignedVector<T>> analytic;
  for (auto* p : model.params()) analytic.push_back(p->grad);

  GradCheckResult result;
  auto update = [&](double ga, double gn) {
    const double rel = std::abs(ga - gn) / std::max({1.0, std::abs(ga), std::abs(gn)});
    result.max_rel_error = std::max(result.max_rel_error, rel);
    ++result.checked;
  };

  auto numeric_at = [&](T* slot) {
    const T saved = *slot;
    *slot = saved + T(step);
    const double up = model.loss_only(x, labels, dropout_seed);
    *slot = saved - T(step);
    const double down = model.loss_only(x, labels, dropout_seed);
    *slot = saved;
    return (up - down) / (2.0 * step);
  };

  auto params = model.params();
  for (std::size_t t = 0; t < params.size(); ++t) {
    for (std::size_t j = 0; j < params[t]->size(); j += stride) {
      update(double(analytic[t][j]), numeric_at(&params[t]->value[j]));
    }
  }

  Tensor4<T> probe = x;
  for (std::size_t j = 0; j < probe.size(); j += stride) {
    const T saved = probe.v[j];
    probe.v[j] = saved + T(step);
    const double up = model.loss_only(probe, labels, dropout_seed);
    probe.v[j] = saved - T(step);
    const double down = model.loss_only(probe, labels, dropout_seed);
    probe.v[j] = saved;
    update(double(dx.v[j]), (up - down) / (2.0 * step));
  }
  return result;
}

}  // namespace d2i::nn
