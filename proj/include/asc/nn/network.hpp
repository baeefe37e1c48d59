#pragma once

#include <cstdint>
#include <sstream>
#include <string>
#include <vector>

#include "asc/dsp.hpp"
#include "asc/nn/layers.hpp"

namespace asc::nn {

enum class LayerKind : uint8_t {
  conv3x3,
  depthwise3x3,
  pointwise1x1,
  batchnorm,
  relu,
  maxpool2x2,
  global_avg_pool,
  dense,
  softmax,
};

std::string to_string(LayerKind kind);

struct LayerSpec {
  LayerKind kind;
  int in_c = 0;   // conv/pointwise/dense input width; channels for depthwise/batchnorm
  int out_c = 0;  // conv/pointwise/dense output width
  int stride = 1;
};

// Declarative layer stack. The tail is always global_avg_pool -> dense ->
// softmax; shape_check enforces it.
struct NetworkSpec {
  std::string name = "custom";
  std::vector<LayerSpec> layers;
  int n_classes = 15;
  int in_c = 3, in_h = 128, in_w = 128;

  void shape_check() const;  // throws DataError naming the first bad layer
  uint64_t fingerprint() const;
};

// Named presets. Block widths fixed; input shape and class count are free
// so the same stack serves single- and multi-channel inputs.
NetworkSpec vgg_style(int in_c, int in_h, int in_w, int n_classes = 15);
NetworkSpec xception_style(int in_c, int in_h, int in_w, int n_classes = 15);
NetworkSpec make_preset(const std::string& name, int in_c, int in_h, int in_w,
                        int n_classes = 15);

constexpr double kBatchNormEpsilon = 1e-5;
constexpr double kBatchNormMomentum = 0.9;

template <typename T>
struct LayerParams {
  Tensor4<T> w;                         // kernels / dense weights
  std::vector<T> b;                     // bias
  std::vector<T> gamma, beta;           // batchnorm scale/shift
  std::vector<T> run_mean, run_var;     // batchnorm running stats
};

template <typename T>
struct LayerGrads {
  Tensor4<T> w;
  std::vector<T> b, gamma, beta;
};

template <typename T>
struct LayerCacheEntry {
  Tensor4<T> input;
  std::vector<uint8_t> relu_mask;
  std::vector<int> argmax;
  BatchNormCache<T> bn;
  int in_h = 0, in_w = 0;
};

template <typename T>
struct ForwardCache {
  std::vector<LayerCacheEntry<T>> layers;
  Tensor4<T> logits;
};

template <typename T>
struct Gradients {
  std::vector<LayerGrads<T>> layers;
  Tensor4<T> input;
};

// A spec plus its learned parameters. Value-like; copyable between threads.
template <typename T>
class Network {
 public:
  Network() = default;

  // He-uniform kernels, zero biases, gamma=1, beta=0, running stats (0, 1);
  // deterministic under the seed.
  static Network init(const NetworkSpec& spec, uint64_t seed);

  const NetworkSpec& spec() const { return spec_; }
  uint64_t seed() const { return seed_; }
  std::vector<LayerParams<T>>& layers() { return layers_; }
  const std::vector<LayerParams<T>>& layers() const { return layers_; }

  NormStats& norm_stats() { return norm_stats_; }
  const NormStats& norm_stats() const { return norm_stats_; }

  // Probabilities [batch][n_classes][1][1]; rows sum to 1. Train mode
  // updates batchnorm running statistics. Pass a cache to enable backward.
  Tensor4<T> forward(const Tensor4<T>& input, Mode mode, ForwardCache<T>* cache);

  // grad_logits is the gradient with respect to the pre-softmax logits
  // (softmax_cross_entropy produces exactly that).
  Gradients<T> backward(const ForwardCache<T>& cache, const Tensor4<T>& grad_logits) const;

  template <typename U>
  Network<U> cast() const {
    Network<U> out;
    out.spec_ = spec_;
    out.seed_ = seed_;
    out.norm_stats_ = norm_stats_;
    out.layers_.resize(layers_.size());
    for (size_t i = 0; i < layers_.size(); ++i) {
      out.layers_[i].w = layers_[i].w.template cast<U>();
      auto cv = [](const std::vector<T>& v) {
        std::vector<U> r(v.size());
        for (size_t j = 0; j < v.size(); ++j) r[j] = static_cast<U>(v[j]);
        return r;
      };
      out.layers_[i].b = cv(layers_[i].b);
      out.layers_[i].gamma = cv(layers_[i].gamma);
      out.layers_[i].beta = cv(layers_[i].beta);
      out.layers_[i].run_mean = cv(layers_[i].run_mean);
      out.layers_[i].run_var = cv(layers_[i].run_var);
    }
    return out;
  }

  NetworkSpec spec_;
  std::vector<LayerParams<T>> layers_;
  NormStats norm_stats_;
  uint64_t seed_ = 0;
};

enum class LrSchedule { constant, step };

struct OptimizerConfig {
  double learning_rate = 0.01;
  double momentum = 0.9;
  double weight_decay = 0.002;
  LrSchedule schedule = LrSchedule::step;
  double step_factor = 0.5;
  int step_every = 30;

  void validate() const {
    if (learning_rate <= 0.0) throw DataError("optimizer: learning_rate must be positive");
    if (momentum < 0.0 || momentum >= 1.0)
      throw DataError("optimizer: momentum must be in [0, 1)");
    if (weight_decay < 0.0) throw DataError("optimizer: weight_decay must be >= 0");
    if (schedule == LrSchedule::step && (step_every < 1 || step_factor <= 0.0))
      throw DataError("optimizer: bad step schedule");
  }

  double lr_at(int epoch) const {
    if (schedule == LrSchedule::constant) return learning_rate;
    double lr = learning_rate;
    for (int e = step_every; e <= epoch; e += step_every) lr *= step_factor;
    return lr;
  }
};

// SGD with momentum. Weight decay is an additive lambda*w term on conv and
// dense kernels only; biases and batchnorm parameters are not decayed.
template <typename T>
class SgdOptimizer {
 public:
  void step(Network<T>& net, const Gradients<T>& grads, const OptimizerConfig& config,
            int epoch);

 private:
  std::vector<LayerGrads<T>> velocity_;
};

// --- implementation ---------------------------------------------------------

template <typename T>
Network<T> Network<T>::init(const NetworkSpec& spec, uint64_t seed) {
  spec.shape_check();
  Network net;
  net.spec_ = spec;
  net.seed_ = seed;
  net.layers_.resize(spec.layers.size());
  Rng rng = Rng(seed).fork(0x1217ull);

  auto he_uniform = [&rng](Tensor4<T>& w, int fan_in) {
    const double bound = std::sqrt(6.0 / fan_in);
    for (T& x : w.v) x = static_cast<T>(rng.uniform(-bound, bound));
  };

  for (size_t i = 0; i < spec.layers.size(); ++i) {
    const LayerSpec& l = spec.layers[i];
    LayerParams<T>& p = net.layers_[i];
    switch (l.kind) {
      case LayerKind::conv3x3:
        p.w = Tensor4<T>(l.out_c, l.in_c, 3, 3);
        he_uniform(p.w, l.in_c * 9);
        p.b.assign(static_cast<size_t>(l.out_c), T{0});
        break;
      case LayerKind::depthwise3x3:
        p.w = Tensor4<T>(l.in_c, 1, 3, 3);
        he_uniform(p.w, 9);
        p.b.assign(static_cast<size_t>(l.in_c), T{0});
        break;
      case LayerKind::pointwise1x1:
        p.w = Tensor4<T>(l.out_c, l.in_c, 1, 1);
        he_uniform(p.w, l.in_c);
        p.b.assign(static_cast<size_t>(l.out_c), T{0});
        break;
      case LayerKind::dense:
        p.w = Tensor4<T>(l.out_c, l.in_c, 1, 1);
        he_uniform(p.w, l.in_c);
        p.b.assign(static_cast<size_t>(l.out_c), T{0});
        break;
      case LayerKind::batchnorm:
        p.gamma.assign(static_cast<size_t>(l.in_c), T{1});
        p.beta.assign(static_cast<size_t>(l.in_c), T{0});
        p.run_mean.assign(static_cast<size_t>(l.in_c), T{0});
        p.run_var.assign(static_cast<size_t>(l.in_c), T{1});
        break;
      default:
        break;
    }
  }
  return net;
}

template <typename T>
Tensor4<T> Network<T>::forward(const Tensor4<T>& input, Mode mode, ForwardCache<T>* cache) {
  if (input.c != spec_.in_c || input.h != spec_.in_h || input.w != spec_.in_w) {
    std::ostringstream msg;
    msg << "forward: input shape (" << input.c << "," << input.h << "," << input.w
        << ") does not match the spec (" << spec_.in_c << "," << spec_.in_h << ","
        << spec_.in_w << ")";
    throw DataError(msg.str());
  }
  if (cache != nullptr) {
    cache->layers.clear();
    cache->layers.resize(spec_.layers.size());
  }

  Tensor4<T> x = input;
  for (size_t i = 0; i < spec_.layers.size(); ++i) {
    const LayerSpec& l = spec_.layers[i];
    LayerParams<T>& p = layers_[i];
    LayerCacheEntry<T>* ce = cache != nullptr ? &cache->layers[i] : nullptr;
    switch (l.kind) {
      case LayerKind::conv3x3:
      case LayerKind::pointwise1x1: {
        if (ce != nullptr) ce->input = x;
        x = conv2d_forward(x, p.w, p.b, l.stride, Pad::same);
        break;
      }
      case LayerKind::depthwise3x3: {
        if (ce != nullptr) ce->input = x;
        x = depthwise_forward(x, p.w, p.b, l.stride, Pad::same);
        break;
      }
      case LayerKind::batchnorm: {
        x = batchnorm_forward(x, p.gamma, p.beta, &p.run_mean, &p.run_var, mode,
                              static_cast<T>(kBatchNormMomentum),
                              static_cast<T>(kBatchNormEpsilon),
                              ce != nullptr ? &ce->bn : nullptr);
        break;
      }
      case LayerKind::relu: {
        std::vector<uint8_t> scratch;
        x = relu_forward(x, ce != nullptr ? &ce->relu_mask : &scratch);
        break;
      }
      case LayerKind::maxpool2x2: {
        std::vector<int> scratch;
        if (ce != nullptr) {
          ce->in_h = x.h;
          ce->in_w = x.w;
        }
        x = maxpool2x2_forward(x, ce != nullptr ? &ce->argmax : &scratch);
        break;
      }
      case LayerKind::global_avg_pool: {
        if (ce != nullptr) {
          ce->in_h = x.h;
          ce->in_w = x.w;
        }
        x = global_avg_pool_forward(x);
        break;
      }
      case LayerKind::dense: {
        if (ce != nullptr) ce->input = x;
        x = dense_forward(x, p.w, p.b);
        break;
      }
      case LayerKind::softmax: {
        if (cache != nullptr) cache->logits = x;
        x = softmax_rows(x);
        break;
      }
    }
  }
  return x;
}

template <typename T>
Gradients<T> Network<T>::backward(const ForwardCache<T>& cache,
                                  const Tensor4<T>& grad_logits) const {
  Gradients<T> grads;
  grads.layers.resize(spec_.layers.size());
  Tensor4<T> g = grad_logits;
  for (size_t ri = spec_.layers.size(); ri-- > 0;) {
    const LayerSpec& l = spec_.layers[ri];
    const LayerParams<T>& p = layers_[ri];
    const LayerCacheEntry<T>& ce = cache.layers[ri];
    LayerGrads<T>& lg = grads.layers[ri];
    switch (l.kind) {
      case LayerKind::softmax:
        // grad_logits already includes the softmax jacobian (fused with the
        // cross-entropy); nothing to do here.
        break;
      case LayerKind::dense: {
        Tensor4<T> gin;
        dense_backward(ce.input, p.w, g, &gin, &lg.w, &lg.b);
        g = std::move(gin);
        break;
      }
      case LayerKind::global_avg_pool:
        g = global_avg_pool_backward(g, ce.in_h, ce.in_w);
        break;
      case LayerKind::maxpool2x2:
        g = maxpool2x2_backward(g, ce.argmax, ce.in_h, ce.in_w);
        break;
      case LayerKind::relu:
        g = relu_backward(g, ce.relu_mask);
        break;
      case LayerKind::batchnorm:
        g = batchnorm_backward(g, ce.bn, p.gamma, &lg.gamma, &lg.beta);
        break;
      case LayerKind::conv3x3:
      case LayerKind::pointwise1x1: {
        Tensor4<T> gin;
        conv2d_backward(ce.input, p.w, g, l.stride, Pad::same, &gin, &lg.w, &lg.b);
        g = std::move(gin);
        break;
      }
      case LayerKind::depthwise3x3: {
        Tensor4<T> gin;
        depthwise_backward(ce.input, p.w, g, l.stride, Pad::same, &gin, &lg.w, &lg.b);
        g = std::move(gin);
        break;
      }
    }
  }
  grads.input = std::move(g);
  return grads;
}

template <typename T>
void SgdOptimizer<T>::step(Network<T>& net, const Gradients<T>& grads,
                           const OptimizerConfig& config, int epoch) {
  config.validate();
  const auto lr = static_cast<T>(config.lr_at(epoch));
  const auto mu = static_cast<T>(config.momentum);
  const auto wd = static_cast<T>(config.weight_decay);

  if (velocity_.empty()) {
    velocity_.resize(net.layers().size());
    for (size_t i = 0; i < net.layers().size(); ++i) {
      const LayerParams<T>& p = net.layers()[i];
      velocity_[i].w = Tensor4<T>(p.w.b, p.w.c, p.w.h, p.w.w);
      velocity_[i].b.assign(p.b.size(), T{0});
      velocity_[i].gamma.assign(p.gamma.size(), T{0});
      velocity_[i].beta.assign(p.beta.size(), T{0});
    }
  }

  auto check_finite = [](const T* g, size_t n, size_t layer, const char* what) {
    for (size_t j = 0; j < n; ++j)
      if (!std::isfinite(static_cast<double>(g[j])))
        throw NumericError("sgd: non-finite gradient in layer " + std::to_string(layer) +
                           " (" + what + ")");
  };

  for (size_t i = 0; i < net.layers().size(); ++i) {
    LayerParams<T>& p = net.layers()[i];
    const LayerGrads<T>& g = grads.layers[i];
    LayerGrads<T>& v = velocity_[i];
    if (!p.w.v.empty()) {
      check_finite(g.w.v.data(), g.w.v.size(), i, "weights");
      for (size_t j = 0; j < p.w.v.size(); ++j) {
        v.w.v[j] = mu * v.w.v[j] + g.w.v[j] + wd * p.w.v[j];
        p.w.v[j] -= lr * v.w.v[j];
      }
    }
    if (!p.b.empty()) {
      check_finite(g.b.data(), g.b.size(), i, "bias");
      for (size_t j = 0; j < p.b.size(); ++j) {
        v.b[j] = mu * v.b[j] + g.b[j];
        p.b[j] -= lr * v.b[j];
      }
    }
    if (!p.gamma.empty()) {
      check_finite(g.gamma.data(), g.gamma.size(), i, "gamma");
      check_finite(g.beta.data(), g.beta.size(), i, "beta");
      for (size_t j = 0; j < p.gamma.size(); ++j) {
        v.gamma[j] = mu * v.gamma[j] + g.gamma[j];
        p.gamma[j] -= lr * v.gamma[j];
        v.beta[j] = mu * v.beta[j] + g.beta[j];
        p.beta[j] -= lr * v.beta[j];
      }
    }
  }
}

}  // namespace asc::nn
