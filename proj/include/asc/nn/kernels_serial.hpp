#pragma once

#include <vector>

#include "asc/nn/tensor.hpp"

// Serial reference kernels: straight loop nests with no blocking and no
// threading. These are the ground truth the parallel kernels are tested
// against, and the baseline the benchmark compares against.

namespace asc::nn {

enum class Pad { same, valid };

struct ConvGeom {
  int out_h = 0, out_w = 0;
  int pad_top = 0, pad_left = 0;
};

// "same" keeps output spatial size at ceil(in/stride), padding split with
// the extra row/column at the bottom/right.
inline ConvGeom conv_geometry(int in_h, int in_w, int kh, int kw, int stride, Pad pad) {
  ConvGeom g;
  if (stride < 1) throw DataError("conv: stride must be >= 1");
  if (pad == Pad::same) {
    g.out_h = (in_h + stride - 1) / stride;
    g.out_w = (in_w + stride - 1) / stride;
    const int pad_h = std::max((g.out_h - 1) * stride + kh - in_h, 0);
    const int pad_w = std::max((g.out_w - 1) * stride + kw - in_w, 0);
    g.pad_top = pad_h / 2;
    g.pad_left = pad_w / 2;
  } else {
    if (in_h < kh || in_w < kw)
      throw DataError("conv: input smaller than kernel with valid padding");
    g.out_h = (in_h - kh) / stride + 1;
    g.out_w = (in_w - kw) / stride + 1;
  }
  return g;
}

namespace serial {

// Cross-correlation; kernels are [out_c][in_c][kh][kw].
template <typename T>
Tensor4<T> conv2d_forward(const Tensor4<T>& in, const Tensor4<T>& kernels,
                          const std::vector<T>& bias, int stride, Pad pad) {
  if (kernels.c != in.c) throw DataError("conv2d: kernel in_c does not match input");
  if (static_cast<int>(bias.size()) != kernels.b)
    throw DataError("conv2d: bias length does not match out_c");
  const ConvGeom g = conv_geometry(in.h, in.w, kernels.h, kernels.w, stride, pad);
  Tensor4<T> out(in.b, kernels.b, g.out_h, g.out_w);
  for (int b = 0; b < in.b; ++b)
    for (int oc = 0; oc < kernels.b; ++oc)
      for (int oy = 0; oy < g.out_h; ++oy)
        for (int ox = 0; ox < g.out_w; ++ox) {
          T acc = bias[oc];
          for (int ic = 0; ic < in.c; ++ic)
            for (int ky = 0; ky < kernels.h; ++ky)
              for (int kx = 0; kx < kernels.w; ++kx) {
                const int iy = oy * stride - g.pad_top + ky;
                const int ix = ox * stride - g.pad_left + kx;
                if (iy < 0 || iy >= in.h || ix < 0 || ix >= in.w) continue;
                acc += in.at(b, ic, iy, ix) * kernels.at(oc, ic, ky, kx);
              }
          out.at(b, oc, oy, ox) = acc;
        }
  return out;
}

template <typename T>
void conv2d_backward(const Tensor4<T>& in, const Tensor4<T>& kernels,
                     const Tensor4<T>& grad_out, int stride, Pad pad, Tensor4<T>* grad_in,
                     Tensor4<T>* grad_kernels, std::vector<T>* grad_bias) {
  const ConvGeom g = conv_geometry(in.h, in.w, kernels.h, kernels.w, stride, pad);
  *grad_in = Tensor4<T>(in.b, in.c, in.h, in.w);
  *grad_kernels = Tensor4<T>(kernels.b, kernels.c, kernels.h, kernels.w);
  grad_bias->assign(static_cast<size_t>(kernels.b), T{0});
  for (int b = 0; b < in.b; ++b)
    for (int oc = 0; oc < kernels.b; ++oc)
      for (int oy = 0; oy < g.out_h; ++oy)
        for (int ox = 0; ox < g.out_w; ++ox) {
          const T go = grad_out.at(b, oc, oy, ox);
          (*grad_bias)[oc] += go;
          for (int ic = 0; ic < in.c; ++ic)
            for (int ky = 0; ky < kernels.h; ++ky)
              for (int kx = 0; kx < kernels.w; ++kx) {
                const int iy = oy * stride - g.pad_top + ky;
                const int ix = ox * stride - g.pad_left + kx;
                if (iy < 0 || iy >= in.h || ix < 0 || ix >= in.w) continue;
                grad_kernels->at(oc, ic, ky, kx) += go * in.at(b, ic, iy, ix);
                grad_in->at(b, ic, iy, ix) += go * kernels.at(oc, ic, ky, kx);
              }
        }
}

// Per-channel spatial convolution; kernels are [c][1][kh][kw].
template <typename T>
Tensor4<T> depthwise_forward(const Tensor4<T>& in, const Tensor4<T>& kernels,
                             const std::vector<T>& bias, int stride, Pad pad) {
  if (kernels.b != in.c || kernels.c != 1)
    throw DataError("depthwise: kernel shape must be [c][1][kh][kw]");
  if (static_cast<int>(bias.size()) != in.c)
    throw DataError("depthwise: bias length does not match channels");
  const ConvGeom g = conv_geometry(in.h, in.w, kernels.h, kernels.w, stride, pad);
  Tensor4<T> out(in.b, in.c, g.out_h, g.out_w);
  for (int b = 0; b < in.b; ++b)
    for (int c = 0; c < in.c; ++c)
      for (int oy = 0; oy < g.out_h; ++oy)
        for (int ox = 0; ox < g.out_w; ++ox) {
          T acc = bias[c];
          for (int ky = 0; ky < kernels.h; ++ky)
            for (int kx = 0; kx < kernels.w; ++kx) {
              const int iy = oy * stride - g.pad_top + ky;
              const int ix = ox * stride - g.pad_left + kx;
              if (iy < 0 || iy >= in.h || ix < 0 || ix >= in.w) continue;
              acc += in.at(b, c, iy, ix) * kernels.at(c, 0, ky, kx);
            }
          out.at(b, c, oy, ox) = acc;
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
  for (int b = 0; b < in.b; ++b)
    for (int c = 0; c < in.c; ++c)
      for (int oy = 0; oy < g.out_h; ++oy)
        for (int ox = 0; ox < g.out_w; ++ox) {
          const T go = grad_out.at(b, c, oy, ox);
          (*grad_bias)[c] += go;
          for (int ky = 0; ky < kernels.h; ++ky)
            for (int kx = 0; kx < kernels.w; ++kx) {
              const int iy = oy * stride - g.pad_top + ky;
              const int ix = ox * stride - g.pad_left + kx;
              if (iy < 0 || iy >= in.h || ix < 0 || ix >= in.w) continue;
              grad_kernels->at(c, 0, ky, kx) += go * in.at(b, c, iy, ix);
              grad_in->at(b, c, iy, ix) += go * kernels.at(c, 0, ky, kx);
            }
        }
}

// Fully connected on [b][c][1][1] tensors; weights are [out][in][1][1].
template <typename T>
Tensor4<T> dense_forward(const Tensor4<T>& in, const Tensor4<T>& weights,
                         const std::vector<T>& bias) {
  if (in.h != 1 || in.w != 1) throw DataError("dense: input spatial dims must be 1x1");
  if (weights.c != in.c) throw DataError("dense: weight in dim does not match input");
  Tensor4<T> out(in.b, weights.b, 1, 1);
  for (int b = 0; b < in.b; ++b)
    for (int o = 0; o < weights.b; ++o) {
      T acc = bias[o];
      for (int i = 0; i < in.c; ++i) acc += weights.at(o, i, 0, 0) * in.at(b, i, 0, 0);
      out.at(b, o, 0, 0) = acc;
    }
  return out;
}

template <typename T>
void dense_backward(const Tensor4<T>& in, const Tensor4<T>& weights,
                    const Tensor4<T>& grad_out, Tensor4<T>* grad_in, Tensor4<T>* grad_weights,
                    std::vector<T>* grad_bias) {
  *grad_in = Tensor4<T>(in.b, in.c, 1, 1);
  *grad_weights = Tensor4<T>(weights.b, weights.c, 1, 1);
  grad_bias->assign(static_cast<size_t>(weights.b), T{0});
  for (int b = 0; b < in.b; ++b)
    for (int o = 0; o < weights.b; ++o) {
      const T go = grad_out.at(b, o, 0, 0);
      (*grad_bias)[o] += go;
      for (int i = 0; i < in.c; ++i) {
        grad_weights->at(o, i, 0, 0) += go * in.at(b, i, 0, 0);
        grad_in->at(b, i, 0, 0) += go * weights.at(o, i, 0, 0);
      }
    }
}

}  // namespace serial
}  // namespace asc::nn
