#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "asc/common.hpp"

namespace asc::nn {

// Dense rank-4 array [batch][channels][height][width], row-major.
template <typename T>
struct Tensor4 {
  int b = 0, c = 0, h = 0, w = 0;
  std::vector<T> v;

  Tensor4() = default;
  Tensor4(int b_, int c_, int h_, int w_)
      : b(b_), c(c_), h(h_), w(w_),
        v(static_cast<size_t>(b_) * c_ * h_ * w_, T{0}) {}

  size_t numel() const { return v.size(); }

  size_t index(int bi, int ci, int yi, int xi) const {
    return ((static_cast<size_t>(bi) * c + ci) * h + yi) * w + xi;
  }
  T& at(int bi, int ci, int yi, int xi) { return v[index(bi, ci, yi, xi)]; }
  T at(int bi, int ci, int yi, int xi) const { return v[index(bi, ci, yi, xi)]; }

  T* plane(int bi, int ci) { return v.data() + (static_cast<size_t>(bi) * c + ci) * h * w; }
  const T* plane(int bi, int ci) const {
    return v.data() + (static_cast<size_t>(bi) * c + ci) * h * w;
  }

  bool same_shape(const Tensor4& o) const {
    return b == o.b && c == o.c && h == o.h && w == o.w;
  }

  bool all_finite() const {
    for (const T& x : v)
      if (!std::isfinite(static_cast<double>(x))) return false;
    return true;
  }

  template <typename U>
  Tensor4<U> cast() const {
    Tensor4<U> out(b, c, h, w);
    for (size_t i = 0; i < v.size(); ++i) out.v[i] = static_cast<U>(v[i]);
    return out;
  }
};

}  // namespace asc::nn
