#pragma once

#include <Eigen/Core>
#include <cstddef>
#include <vector>

#include "d2i/errors.hpp"

namespace d2i::nn {

// All buffers that Eigen maps over use one fixed alignment. Heap addresses
// would otherwise steer the GEMM kernels' peeling and change the floating
// summation order between runs.
template <class T>
using AlignedVector = std::vector<T, Eigen::aligned_allocator<T>>;

// Dense (batch, channel, height, width) array, row-major in that order.
template <class T>
struct Tensor4 {
  int n = 0, c = 0, h = 0, w = 0;
  AlignedVector<T> v;

  Tensor4() = default;
  Tensor4(int n_, int c_, int h_, int w_)
      : n(n_), c(c_), h(h_), w(w_), v(std::size_t(n_) * c_ * h_ * w_, T(0)) {
    if (n_ < 1 || c_ < 1 || h_ < 1 || w_ < 1) throw ConfigError("Tensor4 dims must be positive");
  }

  std::size_t size() const { return v.size(); }
  std::size_t per_image() const { return std::size_t(c) * h * w; }

  T& at(int b, int ch, int y, int x) { return v[((std::size_t(b) * c + ch) * h + y) * w + x]; }
  const T& at(int b, int ch, int y, int x) const {
    return v[((std::size_t(b) * c + ch) * h + y) * w + x];
  }

  bool same_shape(const Tensor4& o) const { return n == o.n && c == o.c && h == o.h && w == o.w; }

  template <class U>
  Tensor4<U> cast() const {
    Tensor4<U> out(n, c, h, w);
    for (std::size_t i = 0; i < v.size(); ++i) out.v[i] = static_cast<U>(v[i]);
    return out;
  }
};

using Tensor4f = Tensor4<float>;

}  // namespace d2i::nn
