#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "asc/nn/kernels.hpp"
#include "asc/nn/tensor.hpp"

namespace asc::nn {

// --- ReLU --------------------------------------------------------------------

template <typename T>
Tensor4<T> relu_forward(const Tensor4<T>& in, std::vector<uint8_t>* mask) {
  Tensor4<T> out(in.b, in.c, in.h, in.w);
  mask->resize(in.numel());
  const size_t n = in.numel();
#pragma omp parallel for schedule(static)
  for (long i = 0; i < static_cast<long>(n); ++i) {
    const bool pos = in.v[i] > T{0};
    (*mask)[i] = pos ? 1 : 0;
    out.v[i] = pos ? in.v[i] : T{0};
  }
  return out;
}

template <typename T>
Tensor4<T> relu_backward(const Tensor4<T>& grad_out, const std::vector<uint8_t>& mask) {
  Tensor4<T> gin(grad_out.b, grad_out.c, grad_out.h, grad_out.w);
  const size_t n = grad_out.numel();
#pragma omp parallel for schedule(static)
  for (long i = 0; i < static_cast<long>(n); ++i)
    gin.v[i] = mask[i] ? grad_out.v[i] : T{0};
  return gin;
}

// --- 2x2 max pooling, stride 2 ------------------------------------------------
//
// Odd trailing rows/columns are dropped. Ties go to the first occurrence in
// row-major scan order, which makes the backward pass deterministic.

template <typename T>
Tensor4<T> maxpool2x2_forward(const Tensor4<T>& in, std::vector<int>* argmax) {
  const int oh = in.h / 2;
  const int ow = in.w / 2;
  if (oh < 1 || ow < 1) throw DataError("maxpool2x2: input spatial dims below 2x2");
  Tensor4<T> out(in.b, in.c, oh, ow);
  argmax->assign(out.numel(), 0);
  const int planes = in.b * in.c;
#pragma omp parallel for schedule(static)
  for (int p = 0; p < planes; ++p) {
    const int b = p / in.c;
    const int c = p % in.c;
    const T* src = in.plane(b, c);
    T* dst = out.plane(b, c);
    int* am = argmax->data() + (static_cast<size_t>(b) * in.c + c) * oh * ow;
    for (int oy = 0; oy < oh; ++oy)
      for (int ox = 0; ox < ow; ++ox) {
        T best = -std::numeric_limits<T>::infinity();
        int best_idx = 0;
        for (int dy = 0; dy < 2; ++dy)
          for (int dx = 0; dx < 2; ++dx) {
            const int iy = 2 * oy + dy;
            const int ix = 2 * ox + dx;
            const T val = src[static_cast<size_t>(iy) * in.w + ix];
            if (val > best) {
              best = val;
              best_idx = iy * in.w + ix;
            }
          }
        dst[static_cast<size_t>(oy) * ow + ox] = best;
        am[static_cast<size_t>(oy) * ow + ox] = best_idx;
      }
  }
  return out;
}

template <typename T>
Tensor4<T> maxpool2x2_backward(const Tensor4<T>& grad_out, const std::vector<int>& argmax,
                               int in_h, int in_w) {
  Tensor4<T> gin(grad_out.b, grad_out.c, in_h, in_w);
  const int planes = grad_out.b * grad_out.c;
  const int on = grad_out.h * grad_out.w;
#pragma omp parallel for schedule(static)
  for (int p = 0; p < planes; ++p) {
    const int b = p / grad_out.c;
    const int c = p % grad_out.c;
    const T* go = grad_out.plane(b, c);
    T* gi = gin.plane(b, c);
    const int* am = argmax.data() + static_cast<size_t>(p) * on;
    for (int n = 0; n < on; ++n) gi[am[n]] += go[n];
  }
  return gin;
}

// --- Global average pooling -----------------------------------------------------

template <typename T>
Tensor4<T> global_avg_pool_forward(const Tensor4<T>& in) {
  Tensor4<T> out(in.b, in.c, 1, 1);
  const int planes = in.b * in.c;
  const T inv = T{1} / static_cast<T>(in.h * in.w);
#pragma omp parallel for schedule(static)
  for (int p = 0; p < planes; ++p) {
    const T* src = in.v.data() + static_cast<size_t>(p) * in.h * in.w;
    T acc{0};
    for (int i = 0; i < in.h * in.w; ++i) acc += src[i];
    out.v[p] = acc * inv;
  }
  return out;
}

template <typename T>
Tensor4<T> global_avg_pool_backward(const Tensor4<T>& grad_out, int in_h, int in_w) {
  Tensor4<T> gin(grad_out.b, grad_out.c, in_h, in_w);
  const int planes = grad_out.b * grad_out.c;
  const T inv = T{1} / static_cast<T>(in_h * in_w);
#pragma omp parallel for schedule(static)
  for (int p = 0; p < planes; ++p) {
    const T g = grad_out.v[p] * inv;
    T* gi = gin.v.data() + static_cast<size_t>(p) * in_h * in_w;
    for (int i = 0; i < in_h * in_w; ++i) gi[i] = g;
  }
  return gin;
}

// --- Batch normalization ----------------------------------------------------------

enum class Mode { train, eval };

template <typename T>
struct BatchNormCache {
  Tensor4<T> xhat;
  std::vector<T> invstd;  // per channel
};

// Train mode normalizes by batch statistics over (batch, h, w) and updates
// the running stats by EMA; eval mode uses the running stats.
template <typename T>
Tensor4<T> batchnorm_forward(const Tensor4<T>& in, const std::vector<T>& gamma,
                             const std::vector<T>& beta, std::vector<T>* run_mean,
                             std::vector<T>* run_var, Mode mode, T momentum, T epsilon,
                             BatchNormCache<T>* cache) {
  if (static_cast<int>(gamma.size()) != in.c || static_cast<int>(beta.size()) != in.c)
    throw DataError("batchnorm: gamma/beta length does not match channels");
  const long count = static_cast<long>(in.b) * in.h * in.w;
  if (mode == Mode::train && count <= 1)
    throw NumericError("batchnorm: degenerate statistics (batch*h*w = 1 in train mode)");

  Tensor4<T> out(in.b, in.c, in.h, in.w);
  if (cache != nullptr) {
    cache->xhat = Tensor4<T>(in.b, in.c, in.h, in.w);
    cache->invstd.assign(static_cast<size_t>(in.c), T{0});
  }
  const int hw = in.h * in.w;

#pragma omp parallel for schedule(static)
  for (int c = 0; c < in.c; ++c) {
    T mean, var;
    if (mode == Mode::train) {
      T sum{0};
      for (int b = 0; b < in.b; ++b) {
        const T* src = in.plane(b, c);
        for (int i = 0; i < hw; ++i) sum += src[i];
      }
      mean = sum / static_cast<T>(count);
      T sq{0};
      for (int b = 0; b < in.b; ++b) {
        const T* src = in.plane(b, c);
        for (int i = 0; i < hw; ++i) {
          const T d = src[i] - mean;
          sq += d * d;
        }
      }
      var = sq / static_cast<T>(count);
      (*run_mean)[c] = momentum * (*run_mean)[c] + (T{1} - momentum) * mean;
      (*run_var)[c] = momentum * (*run_var)[c] + (T{1} - momentum) * var;
    } else {
      mean = (*run_mean)[c];
      var = (*run_var)[c];
    }
    const T invstd = T{1} / std::sqrt(var + epsilon);
    if (cache != nullptr) cache->invstd[c] = invstd;
    const T g = gamma[c];
    const T be = beta[c];
    for (int b = 0; b < in.b; ++b) {
      const T* src = in.plane(b, c);
      T* dst = out.plane(b, c);
      T* xh = cache != nullptr ? cache->xhat.plane(b, c) : nullptr;
      for (int i = 0; i < hw; ++i) {
        const T xhat = (src[i] - mean) * invstd;
        if (xh != nullptr) xh[i] = xhat;
        dst[i] = g * xhat + be;
      }
    }
  }
  return out;
}

// Backward through the train-mode forward (gradients flow through the batch
// statistics).
template <typename T>
Tensor4<T> batchnorm_backward(const Tensor4<T>& grad_out, const BatchNormCache<T>& cache,
                              const std::vector<T>& gamma, std::vector<T>* grad_gamma,
                              std::vector<T>* grad_beta) {
  const Tensor4<T>& xhat = cache.xhat;
  Tensor4<T> gin(grad_out.b, grad_out.c, grad_out.h, grad_out.w);
  grad_gamma->assign(gamma.size(), T{0});
  grad_beta->assign(gamma.size(), T{0});
  const int hw = grad_out.h * grad_out.w;
  const T count = static_cast<T>(static_cast<long>(grad_out.b) * hw);

#pragma omp parallel for schedule(static)
  for (int c = 0; c < grad_out.c; ++c) {
    T dg{0}, db{0};
    for (int b = 0; b < grad_out.b; ++b) {
      const T* go = grad_out.plane(b, c);
      const T* xh = xhat.plane(b, c);
      for (int i = 0; i < hw; ++i) {
        dg += go[i] * xh[i];
        db += go[i];
      }
    }
    (*grad_gamma)[c] = dg;
    (*grad_beta)[c] = db;
    const T scale = gamma[c] * cache.invstd[c] / count;
    for (int b = 0; b < grad_out.b; ++b) {
      const T* go = grad_out.plane(b, c);
      const T* xh = xhat.plane(b, c);
      T* gi = gin.plane(b, c);
      for (int i = 0; i < hw; ++i) gi[i] = scale * (count * go[i] - db - xh[i] * dg);
    }
  }
  return gin;
}

// --- Softmax + cross-entropy -----------------------------------------------------

// Row-stable softmax on [batch][classes][1][1] logits.
template <typename T>
Tensor4<T> softmax_rows(const Tensor4<T>& logits) {
  Tensor4<T> probs(logits.b, logits.c, 1, 1);
  for (int b = 0; b < logits.b; ++b) {
    const T* x = logits.plane(b, 0);
    T* p = probs.plane(b, 0);
    T mx = x[0];
    for (int j = 1; j < logits.c; ++j) mx = std::max(mx, x[j]);
    T sum{0};
    for (int j = 0; j < logits.c; ++j) {
      p[j] = std::exp(x[j] - mx);
      sum += p[j];
    }
    for (int j = 0; j < logits.c; ++j) p[j] /= sum;
  }
  return probs;
}

// Mean cross-entropy over the batch against (possibly soft) targets, plus
// the gradient with respect to the logits: (p - t) / batch. Log
// probabilities come from the log-sum-exp form, so extreme logits are safe.
template <typename T>
T softmax_cross_entropy(const Tensor4<T>& logits, const std::vector<std::vector<T>>& targets,
                        Tensor4<T>* grad_logits) {
  if (static_cast<int>(targets.size()) != logits.b)
    throw DataError("cross_entropy: target count does not match batch");
  const int nc = logits.c;
  if (grad_logits != nullptr) *grad_logits = Tensor4<T>(logits.b, nc, 1, 1);
  const T invb = T{1} / static_cast<T>(logits.b);
  T loss{0};
  for (int b = 0; b < logits.b; ++b) {
    if (static_cast<int>(targets[b].size()) != nc)
      throw DataError("cross_entropy: target length does not match class count");
    const T* x = logits.plane(b, 0);
    T mx = x[0];
    for (int j = 1; j < nc; ++j) mx = std::max(mx, x[j]);
    T sum{0};
    for (int j = 0; j < nc; ++j) sum += std::exp(x[j] - mx);
    const T logsum = std::log(sum);
    for (int j = 0; j < nc; ++j) {
      const T logp = x[j] - mx - logsum;
      loss -= targets[b][j] * logp * invb;
      if (grad_logits != nullptr) {
        const T p = std::exp(logp);
        grad_logits->at(b, j, 0, 0) = (p - targets[b][j]) * invb;
      }
    }
  }
  return loss;
}

// Depthwise-separable convolution: per-channel 3x3 followed by 1x1
// cross-channel mixing. Exactly the composition of the two kernels it is
// built from.
template <typename T>
Tensor4<T> depthwise_separable_forward(const Tensor4<T>& in, const Tensor4<T>& depthwise_kernels,
                                       const std::vector<T>& depthwise_bias,
                                       const Tensor4<T>& pointwise_kernels,
                                       const std::vector<T>& pointwise_bias, int stride, Pad pad) {
  const Tensor4<T> mid = depthwise_forward(in, depthwise_kernels, depthwise_bias, stride, pad);
  return conv2d_forward(mid, pointwise_kernels, pointwise_bias, 1, Pad::same);
}

}  // namespace asc::nn
