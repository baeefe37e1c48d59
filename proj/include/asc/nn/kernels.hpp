#pragma once

#include <algorithm>
#include <vector>

#include "asc/nn/kernels_serial.hpp"
#include "asc/nn/tensor.hpp"

// OpenMP-parallel kernels. Work is split so that every output element is
// produced by exactly one thread with a fixed reduction order, so results
// are bit-identical for any thread count.

namespace asc::nn {

// C[M][N] += A[M][K] * B[K][N], row-major. C must be preloaded by the
// caller (zeros, or the bias). N is tiled so a [K][tile] panel of B stays
// in cache; rows are register-blocked by 4.
template <typename T>
void gemm_accumulate(int M, int N, int K, const T* A, const T* B, T* C, bool par) {
  int tile = N;
  constexpr long kPanelBytes = 768 * 1024;
  if (static_cast<long>(K) * tile * static_cast<long>(sizeof(T)) > kPanelBytes) {
    tile = static_cast<int>(kPanelBytes / (static_cast<long>(K) * sizeof(T)));
    tile = std::max(tile, 64);
  }
#pragma omp parallel for schedule(static) if (par)
  for (int i0 = 0; i0 < M; i0 += 4) {
    const int ib = std::min(4, M - i0);
    for (int j0 = 0; j0 < N; j0 += tile) {
      const int j1 = std::min(j0 + tile, N);
      if (ib == 4) {
        T* c0 = C + static_cast<size_t>(i0 + 0) * N;
        T* c1 = C + static_cast<size_t>(i0 + 1) * N;
        T* c2 = C + static_cast<size_t>(i0 + 2) * N;
        T* c3 = C + static_cast<size_t>(i0 + 3) * N;
        for (int k = 0; k < K; ++k) {
          const T a0 = A[static_cast<size_t>(i0 + 0) * K + k];
          const T a1 = A[static_cast<size_t>(i0 + 1) * K + k];
          const T a2 = A[static_cast<size_t>(i0 + 2) * K + k];
          const T a3 = A[static_cast<size_t>(i0 + 3) * K + k];
          const T* b = B + static_cast<size_t>(k) * N;
#pragma omp simd
          for (int j = j0; j < j1; ++j) {
            const T bv = b[j];
            c0[j] += a0 * bv;
            c1[j] += a1 * bv;
            c2[j] += a2 * bv;
            c3[j] += a3 * bv;
          }
        }
      } else {
        for (int i = i0; i < i0 + ib; ++i) {
          T* c = C + static_cast<size_t>(i) * N;
          for (int k = 0; k < K; ++k) {
            const T a = A[static_cast<size_t>(i) * K + k];
            const T* b = B + static_cast<size_t>(k) * N;
#pragma omp simd
            for (int j = j0; j < j1; ++j) c[j] += a * b[j];
          }
        }
      }
    }
  }
}

// C[M][K] += A[M][N] * B[K][N]^T: every C entry is a dot of two rows.
template <typename T>
void gemm_abt_accumulate(int M, int K, int N, const T* A, const T* B, T* C, bool par) {
#pragma omp parallel for schedule(static) if (par)
  for (int i = 0; i < M; ++i) {
    const T* a = A + static_cast<size_t>(i) * N;
    for (int k = 0; k < K; ++k) {
      const T* b = B + static_cast<size_t>(k) * N;
      T acc{0};
#pragma omp simd reduction(+ : acc)
      for (int j = 0; j < N; ++j) acc += a[j] * b[j];
      C[static_cast<size_t>(i) * K + k] += acc;
    }
  }
}

// Unfold one image into a [in_c*kh*kw][out_h*out_w] column matrix; the row
// index (ic*kh + ky)*kw + kx matches the flat kernel layout.
template <typename T>
void im2col(const Tensor4<T>& in, int b, int kh, int kw, int stride, const ConvGeom& g,
            T* col) {
  const int N = g.out_h * g.out_w;
  for (int ic = 0; ic < in.c; ++ic) {
    const T* plane = in.plane(b, ic);
    for (int ky = 0; ky < kh; ++ky)
      for (int kx = 0; kx < kw; ++kx) {
        T* row = col + (static_cast<size_t>(ic) * kh * kw + static_cast<size_t>(ky) * kw + kx) * N;
        size_t n = 0;
        for (int oy = 0; oy < g.out_h; ++oy) {
          const int iy = oy * stride - g.pad_top + ky;
          if (iy < 0 || iy >= in.h) {
            for (int ox = 0; ox < g.out_w; ++ox) row[n++] = T{0};
            continue;
          }
          const T* src = plane + static_cast<size_t>(iy) * in.w;
          for (int ox = 0; ox < g.out_w; ++ox) {
            const int ix = ox * stride - g.pad_left + kx;
            row[n++] = (ix < 0 || ix >= in.w) ? T{0} : src[ix];
          }
        }
      }
  }
}

// Fold a column-gradient matrix back onto the input gradient (accumulates).
template <typename T>
void col2im_accumulate(const T* col, int in_c, int in_h, int in_w, int kh, int kw, int stride,
                       const ConvGeom& g, T* grad_plane0) {
  const int N = g.out_h * g.out_w;
  for (int ic = 0; ic < in_c; ++ic) {
    T* plane = grad_plane0 + static_cast<size_t>(ic) * in_h * in_w;
    for (int ky = 0; ky < kh; ++ky)
      for (int kx = 0; kx < kw; ++kx) {
        const T* row =
            col + (static_cast<size_t>(ic) * kh * kw + static_cast<size_t>(ky) * kw + kx) * N;
        size_t n = 0;
        for (int oy = 0; oy < g.out_h; ++oy) {
          const int iy = oy * stride - g.pad_top + ky;
          if (iy < 0 || iy >= in_h) {
            n += static_cast<size_t>(g.out_w);
            continue;
          }
          T* dst = plane + static_cast<size_t>(iy) * in_w;
          for (int ox = 0; ox < g.out_w; ++ox, ++n) {
            const int ix = ox * stride - g.pad_left + kx;
            if (ix >= 0 && ix < in_w) dst[ix] += row[n];
          }
        }
      }
  }
}

template <typename T>
Tensor4<T> conv2d_forward(const Tensor4<T>& in, const Tensor4<T>& kernels,
                          const std::vector<T>& bias, int stride, Pad pad) {
  if (kernels.c != in.c) throw DataError("conv2d: kernel in_c does not match input");
  if (static_cast<int>(bias.size()) != kernels.b)
    throw DataError("conv2d: bias length does not match out_c");
  const ConvGeom g = conv_geometry(in.h, in.w, kernels.h, kernels.w, stride, pad);
  const int K = in.c * kernels.h * kernels.w;
  const int N = g.out_h * g.out_w;
  const int M = kernels.b;
  Tensor4<T> out(in.b, M, g.out_h, g.out_w);

  // 1x1 stride-1 kernels read the input planes directly; no unfold needed.
  const bool direct = kernels.h == 1 && kernels.w == 1 && stride == 1;
  const bool par_batch = in.b >= 2;

#pragma omp parallel if (par_batch)
  {
    std::vector<T> col(direct ? 0 : static_cast<size_t>(K) * N);
#pragma omp for schedule(static)
    for (int b = 0; b < in.b; ++b) {
      T* dst = out.plane(b, 0);
      for (int oc = 0; oc < M; ++oc)
        std::fill_n(dst + static_cast<size_t>(oc) * N, N, bias[oc]);
      const T* B = direct ? in.plane(b, 0) : col.data();
      if (!direct) im2col(in, b, kernels.h, kernels.w, stride, g, col.data());
      gemm_accumulate(M, N, K, kernels.v.data(), B, dst, !par_batch);
    }
  }
  return out;
}

template <typename T>
void conv2d_backward(const Tensor4<T>& in, const Tensor4<T>& kernels,
                     const Tensor4<T>& grad_out, int stride, Pad pad, Tensor4<T>* grad_in,
                     Tensor4<T>* grad_kernels, std::vector<T>* grad_bias) {
  const ConvGeom g = conv_geometry(in.h, in.w, kernels.h, kernels.w, stride, pad);
  const int K = in.c * kernels.h * kernels.w;
  const int N = g.out_h * g.out_w;
  const int M = kernels.b;
  const bool direct = kernels.h == 1 && kernels.w == 1 && stride == 1;

  grad_bias->assign(static_cast<size_t>(M), T{0});
#pragma omp parallel for schedule(static)
  for (int oc = 0; oc < M; ++oc) {
    T acc{0};
    for (int b = 0; b < in.b; ++b) {
      const T* go = grad_out.plane(b, oc);
      for (int n = 0; n < N; ++n) acc += go[n];
    }
    (*grad_bias)[oc] = acc;
  }

  // Kernel gradient: batch items accumulated in order, rows parallel.
  *grad_kernels = Tensor4<T>(kernels.b, kernels.c, kernels.h, kernels.w);
  {
    std::vector<T> col(direct ? 0 : static_cast<size_t>(K) * N);
    for (int b = 0; b < in.b; ++b) {
      const T* B = direct ? in.plane(b, 0) : col.data();
      if (!direct) im2col(in, b, kernels.h, kernels.w, stride, g, col.data());
      gemm_abt_accumulate(M, K, N, grad_out.plane(b, 0), B, grad_kernels->v.data(), true);
    }
  }

  // Input gradient: independent per batch item.
  *grad_in = Tensor4<T>(in.b, in.c, in.h, in.w);
  std::vector<T> kt(static_cast<size_t>(K) * M);  // kernels transposed to [K][M]
  for (int oc = 0; oc < M; ++oc)
    for (int k = 0; k < K; ++k)
      kt[static_cast<size_t>(k) * M + oc] = kernels.v[static_cast<size_t>(oc) * K + k];

  const bool par_batch = in.b >= 2;
#pragma omp parallel if (par_batch)
  {
    std::vector<T> colgrad(static_cast<size_t>(K) * N);
#pragma omp for schedule(static)
    for (int b = 0; b < in.b; ++b) {
      std::fill(colgrad.begin(), colgrad.end(), T{0});
      gemm_accumulate(K, N, M, kt.data(), grad_out.plane(b, 0), colgrad.data(), !par_batch);
      if (direct) {
        T* dst = grad_in->plane(b, 0);
        std::copy(colgrad.begin(), colgrad.end(), dst);
      } else {
        col2im_accumulate(colgrad.data(), in.c, in.h, in.w, kernels.h, kernels.w, stride, g,
                          grad_in->plane(b, 0));
      }
    }
  }
}

template <typename T>
Tensor4<T> depthwise_forward(const Tensor4<T>& in, const Tensor4<T>& kernels,
                             const std::vector<T>& bias, int stride, Pad pad) {
  if (kernels.b != in.c || kernels.c != 1)
    throw DataError("depthwise: kernel shape must be [c][1][kh][kw]");
  if (static_cast<int>(bias.size()) != in.c)
    throw DataError("depthwise: bias length does not match channels");
  const ConvGeom g = conv_geometry(in.h, in.w, kernels.h, kernels.w, stride, pad);
  Tensor4<T> out(in.b, in.c, g.out_h, g.out_w);
  const int planes = in.b * in.c;
#pragma omp parallel for schedule(static)
  for (int p = 0; p < planes; ++p) {
    const int b = p / in.c;
    const int c = p % in.c;
    const T* src = in.plane(b, c);
    const T* k = kernels.plane(c, 0);
    T* dst = out.plane(b, c);
    for (int oy = 0; oy < g.out_h; ++oy)
      for (int ox = 0; ox < g.out_w; ++ox) {
        T acc = bias[c];
        for (int ky = 0; ky < kernels.h; ++ky) {
          const int iy = oy * stride - g.pad_top + ky;
          if (iy < 0 || iy >= in.h) continue;
          for (int kx = 0; kx < kernels.w; ++kx) {
            const int ix = ox * stride - g.pad_left + kx;
            if (ix < 0 || ix >= in.w) continue;
            acc += src[static_cast<size_t>(iy) * in.w + ix] * k[static_cast<size_t>(ky) * kernels.w + kx];
          }
        }
        dst[static_cast<size_t>(oy) * g.out_w + ox] = acc;
      }
  }
  return out;
}

template <typename T>
void depthwise_backward(const Tensor4<T>& in, const Tensor4<T>& kernels,
                        const Tensor4<T>& grad_out, int stride, Pad pad, Tensor4<T>* grad_in,
                        Tensor4<T>* grad_kernels, std::vector<T>* grad_bias) {
  const ConvGeom g = conv_geometry(in.h, in.w, kernels.h, kernels.w, stride, pad);
  *grad_in = Tensor4<T>(in.b, in.c, in.h, in.w);
  *grad_kernels = Tensor4<T>(kernels.b, kernels.c, kernels.h, kernels.w);
  grad_bias->assign(static_cast<size_t>(in.c), T{0});

  // Kernel and bias gradients: one thread per channel, batch in order.
#pragma omp parallel for schedule(static)
  for (int c = 0; c < in.c; ++c) {
    T* gk = grad_kernels->plane(c, 0);
    T gb{0};
    for (int b = 0; b < in.b; ++b) {
      const T* go = grad_out.plane(b, c);
      const T* src = in.plane(b, c);
      for (int oy = 0; oy < g.out_h; ++oy)
        for (int ox = 0; ox < g.out_w; ++ox) {
          const T gov = go[static_cast<size_t>(oy) * g.out_w + ox];
          gb += gov;
          for (int ky = 0; ky < kernels.h; ++ky) {
            const int iy = oy * stride - g.pad_top + ky;
            if (iy < 0 || iy >= in.h) continue;
            for (int kx = 0; kx < kernels.w; ++kx) {
              const int ix = ox * stride - g.pad_left + kx;
              if (ix < 0 || ix >= in.w) continue;
              gk[static_cast<size_t>(ky) * kernels.w + kx] +=
                  gov * src[static_cast<size_t>(iy) * in.w + ix];
            }
          }
        }
    }
    (*grad_bias)[c] = gb;
  }

  // Input gradient planes are disjoint per (b, c).
  const int planes = in.b * in.c;
#pragma omp parallel for schedule(static)
  for (int p = 0; p < planes; ++p) {
    const int b = p / in.c;
    const int c = p % in.c;
    const T* go = grad_out.plane(b, c);
    const T* k = kernels.plane(c, 0);
    T* gi = grad_in->plane(b, c);
    for (int oy = 0; oy < g.out_h; ++oy)
      for (int ox = 0; ox < g.out_w; ++ox) {
        const T gov = go[static_cast<size_t>(oy) * g.out_w + ox];
        for (int ky = 0; ky < kernels.h; ++ky) {
          const int iy = oy * stride - g.pad_top + ky;
          if (iy < 0 || iy >= in.h) continue;
          for (int kx = 0; kx < kernels.w; ++kx) {
            const int ix = ox * stride - g.pad_left + kx;
            if (ix < 0 || ix >= in.w) continue;
            gi[static_cast<size_t>(iy) * in.w + ix] += gov * k[static_cast<size_t>(ky) * kernels.w + kx];
          }
        }
      }
  }
}

template <typename T>
Tensor4<T> dense_forward(const Tensor4<T>& in, const Tensor4<T>& weights,
                         const std::vector<T>& bias) {
  if (in.h != 1 || in.w != 1) throw DataError("dense: input spatial dims must be 1x1");
  if (weights.c != in.c) throw DataError("dense: weight in dim does not match input");
  Tensor4<T> out(in.b, weights.b, 1, 1);
#pragma omp parallel for schedule(static)
  for (int b = 0; b < in.b; ++b) {
    const T* x = in.plane(b, 0);
    T* y = out.plane(b, 0);
    for (int o = 0; o < weights.b; ++o) {
      const T* w = weights.plane(o, 0);
      T acc = bias[o];
#pragma omp simd reduction(+ : acc)
      for (int i = 0; i < in.c; ++i) acc += w[i] * x[i];
      y[o] = acc;
    }
  }
  return out;
}

template <typename T>
void dense_backward(const Tensor4<T>& in, const Tensor4<T>& weights, const Tensor4<T>& grad_out,
                    Tensor4<T>* grad_in, Tensor4<T>* grad_weights, std::vector<T>* grad_bias) {
  *grad_in = Tensor4<T>(in.b, in.c, 1, 1);
  *grad_weights = Tensor4<T>(weights.b, weights.c, 1, 1);
  grad_bias->assign(static_cast<size_t>(weights.b), T{0});
#pragma omp parallel for schedule(static)
  for (int o = 0; o < weights.b; ++o) {
    T* gw = grad_weights->plane(o, 0);
    T gb{0};
    for (int b = 0; b < in.b; ++b) {
      const T go = grad_out.at(b, o, 0, 0);
      gb += go;
      const T* x = in.plane(b, 0);
#pragma omp simd
      for (int i = 0; i < in.c; ++i) gw[i] += go * x[i];
    }
    (*grad_bias)[o] = gb;
  }
#pragma omp parallel for schedule(static)
  for (int b = 0; b < in.b; ++b) {
    T* gx = grad_in->plane(b, 0);
    for (int o = 0; o < weights.b; ++o) {
      const T go = grad_out.at(b, o, 0, 0);
      const T* w = weights.plane(o, 0);
#pragma omp simd
      for (int i = 0; i < in.c; ++i) gx[i] += go * w[i];
    }
  }
}

}  // namespace asc::nn
