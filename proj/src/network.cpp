#include "asc/nn/network.hpp"

namespace asc::nn {

std::string to_string(LayerKind kind) {
  switch (kind) {
    case LayerKind::conv3x3: return "conv3x3";
    case LayerKind::depthwise3x3: return "depthwise3x3";
    case LayerKind::pointwise1x1: return "pointwise1x1";
    case LayerKind::batchnorm: return "batchnorm";
    case LayerKind::relu: return "relu";
    case LayerKind::maxpool2x2: return "maxpool2x2";
    case LayerKind::global_avg_pool: return "global_avg_pool";
    case LayerKind::dense: return "dense";
    case LayerKind::softmax: return "softmax";
  }
  return "?";
}

namespace {

[[noreturn]] void shape_error(size_t i, const LayerSpec& l, const std::string& what) {
  throw DataError("network spec: layer " + std::to_string(i) + " (" + to_string(l.kind) +
                  "): " + what);
}

}  // namespace

void NetworkSpec::shape_check() const {
  if (layers.empty()) throw DataError("network spec: no layers");
  if (n_classes < 2) throw DataError("network spec: n_classes must be >= 2");
  if (in_c < 1 || in_h < 1 || in_w < 1) throw DataError("network spec: bad input shape");

  int c = in_c, h = in_h, w = in_w;
  for (size_t i = 0; i < layers.size(); ++i) {
    const LayerSpec& l = layers[i];
    switch (l.kind) {
      case LayerKind::conv3x3:
      case LayerKind::pointwise1x1:
        if (l.in_c != c)
          shape_error(i, l, "expects " + std::to_string(l.in_c) + " input channels, got " +
                             std::to_string(c));
        if (l.out_c < 1) shape_error(i, l, "needs a positive output width");
        if (l.stride < 1) shape_error(i, l, "needs a positive stride");
        c = l.out_c;
        h = (h + l.stride - 1) / l.stride;
        w = (w + l.stride - 1) / l.stride;
        break;
      case LayerKind::depthwise3x3:
        if (l.in_c != c)
          shape_error(i, l, "expects " + std::to_string(l.in_c) + " channels, got " +
                             std::to_string(c));
        h = (h + l.stride - 1) / l.stride;
        w = (w + l.stride - 1) / l.stride;
        break;
      case LayerKind::batchnorm:
        if (l.in_c != c)
          shape_error(i, l, "expects " + std::to_string(l.in_c) + " channels, got " +
                             std::to_string(c));
        break;
      case LayerKind::relu:
        break;
      case LayerKind::maxpool2x2:
        if (h < 2 || w < 2) shape_error(i, l, "input spatial dims below 2x2");
        h /= 2;
        w /= 2;
        break;
      case LayerKind::global_avg_pool:
        h = 1;
        w = 1;
        break;
      case LayerKind::dense:
        if (h != 1 || w != 1) shape_error(i, l, "requires 1x1 spatial input");
        if (l.in_c != c)
          shape_error(i, l, "expects " + std::to_string(l.in_c) + " inputs, got " +
                             std::to_string(c));
        c = l.out_c;
        break;
      case LayerKind::softmax:
        if (h != 1 || w != 1) shape_error(i, l, "requires 1x1 spatial input");
        break;
    }
  }
  if (h != 1 || w != 1 || c != n_classes)
    throw DataError("network spec: stack ends at (" + std::to_string(c) + "," +
                    std::to_string(h) + "," + std::to_string(w) + "), expected (" +
                    std::to_string(n_classes) + ",1,1)");

  const size_t n = layers.size();
  if (n < 3 || layers[n - 1].kind != LayerKind::softmax ||
      layers[n - 2].kind != LayerKind::dense ||
      layers[n - 3].kind != LayerKind::global_avg_pool)
    throw DataError("network spec: tail must be global_avg_pool -> dense -> softmax");
}

uint64_t NetworkSpec::fingerprint() const {
  std::ostringstream s;
  s << "net1|" << name << "|nc=" << n_classes << "|in=" << in_c << "x" << in_h << "x" << in_w;
  for (const LayerSpec& l : layers)
    s << "|" << to_string(l.kind) << "," << l.in_c << "," << l.out_c << "," << l.stride;
  return fnv1a64(s.str());
}

namespace {

void conv_bn_relu(std::vector<LayerSpec>& ls, int in_c, int out_c, int stride = 1) {
  ls.push_back({LayerKind::conv3x3, in_c, out_c, stride});
  ls.push_back({LayerKind::batchnorm, out_c, out_c, 1});
  ls.push_back({LayerKind::relu, 0, 0, 1});
}

void separable_bn_relu(std::vector<LayerSpec>& ls, int in_c, int out_c) {
  ls.push_back({LayerKind::depthwise3x3, in_c, in_c, 1});
  ls.push_back({LayerKind::pointwise1x1, in_c, out_c, 1});
  ls.push_back({LayerKind::batchnorm, out_c, out_c, 1});
  ls.push_back({LayerKind::relu, 0, 0, 1});
}

void tail(std::vector<LayerSpec>& ls, int c, int n_classes) {
  ls.push_back({LayerKind::global_avg_pool, 0, 0, 1});
  ls.push_back({LayerKind::dense, c, n_classes, 1});
  ls.push_back({LayerKind::softmax, 0, 0, 1});
}

}  // namespace

NetworkSpec vgg_style(int in_c, int in_h, int in_w, int n_classes) {
  NetworkSpec spec;
  spec.name = "vgg_style";
  spec.in_c = in_c;
  spec.in_h = in_h;
  spec.in_w = in_w;
  spec.n_classes = n_classes;
  int c = in_c;
  for (int width : {32, 64, 128, 256}) {
    conv_bn_relu(spec.layers, c, width);
    conv_bn_relu(spec.layers, width, width);
    spec.layers.push_back({LayerKind::maxpool2x2, 0, 0, 1});
    c = width;
  }
  conv_bn_relu(spec.layers, c, 512);
  tail(spec.layers, 512, n_classes);
  spec.shape_check();
  return spec;
}

NetworkSpec xception_style(int in_c, int in_h, int in_w, int n_classes) {
  NetworkSpec spec;
  spec.name = "xception_style";
  spec.in_c = in_c;
  spec.in_h = in_h;
  spec.in_w = in_w;
  spec.n_classes = n_classes;
  conv_bn_relu(spec.layers, in_c, 32, 2);
  int c = 32;
  for (int width : {64, 128, 256, 256}) {
    separable_bn_relu(spec.layers, c, width);
    separable_bn_relu(spec.layers, width, width);
    spec.layers.push_back({LayerKind::maxpool2x2, 0, 0, 1});
    c = width;
  }
  tail(spec.layers, c, n_classes);
  spec.shape_check();
  return spec;
}

NetworkSpec make_preset(const std::string& name, int in_c, int in_h, int in_w, int n_classes) {
  if (name == "vgg_style") return vgg_style(in_c, in_h, in_w, n_classes);
  if (name == "xception_style") return xception_style(in_c, in_h, in_w, n_classes);
  throw DataError("unknown network preset: \"" + name +
                  "\" (vgg_style, xception_style)");
}

}  // namespace asc::nn
