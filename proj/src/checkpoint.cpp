#include "asc/nn/checkpoint.hpp"

#include <cstring>

namespace asc::nn {

namespace {

constexpr char kMagic[8] = {'A', 'S', 'C', 'M', 'C', 'K', 'P', '1'};
constexpr uint32_t kVersion = 1;

struct Writer {
  std::string out;

  void bytes(const void* p, size_t n) { out.append(static_cast<const char*>(p), n); }
  void u8(uint8_t v) { out.push_back(static_cast<char>(v)); }
  void u32(uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
  }
  void i32(int32_t v) { u32(static_cast<uint32_t>(v)); }
  void u64(uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
  }
  void f64(double v) {
    uint64_t bits;
    std::memcpy(&bits, &v, 8);
    u64(bits);
  }
  void str(const std::string& s) {
    u32(static_cast<uint32_t>(s.size()));
    out.append(s);
  }
  void floats(const float* p, size_t n) { bytes(p, n * sizeof(float)); }
};

struct Reader {
  const std::string& in;
  size_t off = 0;

  explicit Reader(const std::string& s) : in(s) {}

  void need(size_t n) const {
    if (off + n > in.size()) throw DataError("checkpoint: truncated file");
  }
  void bytes(void* p, size_t n) {
    need(n);
    std::memcpy(p, in.data() + off, n);
    off += n;
  }
  uint8_t u8() {
    need(1);
    return static_cast<uint8_t>(in[off++]);
  }
  uint32_t u32() {
    need(4);
    uint32_t v = 0;
    for (int i = 0; i < 4; ++i)
      v |= static_cast<uint32_t>(static_cast<unsigned char>(in[off + i])) << (8 * i);
    off += 4;
    return v;
  }
  int32_t i32() { return static_cast<int32_t>(u32()); }
  uint64_t u64() {
    need(8);
    uint64_t v = 0;
    for (int i = 0; i < 8; ++i)
      v |= static_cast<uint64_t>(static_cast<unsigned char>(in[off + i])) << (8 * i);
    off += 8;
    return v;
  }
  double f64() {
    const uint64_t bits = u64();
    double v;
    std::memcpy(&v, &bits, 8);
    return v;
  }
  std::string str() {
    const uint32_t n = u32();
    need(n);
    std::string s(in.data() + off, n);
    off += n;
    return s;
  }
  void floats(float* p, size_t n) { bytes(p, n * sizeof(float)); }
};

void write_float_vec(Writer& w, const std::vector<float>& v) {
  w.u32(static_cast<uint32_t>(v.size()));
  w.floats(v.data(), v.size());
}

std::vector<float> read_float_vec(Reader& r) {
  const uint32_t n = r.u32();
  std::vector<float> v(n);
  r.floats(v.data(), n);
  return v;
}

}  // namespace

void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
  const NetworkSpec& spec = ckpt.network.spec();
  Writer w;
  w.bytes(kMagic, sizeof(kMagic));
  w.u32(kVersion);

  w.str(spec.name);
  w.i32(spec.n_classes);
  w.i32(spec.in_c);
  w.i32(spec.in_h);
  w.i32(spec.in_w);
  w.u32(static_cast<uint32_t>(spec.layers.size()));
  for (const LayerSpec& l : spec.layers) {
    w.u8(static_cast<uint8_t>(l.kind));
    w.i32(l.in_c);
    w.i32(l.out_c);
    w.i32(l.stride);
  }
  w.u64(spec.fingerprint());

  const FeatureConfig& fc = ckpt.feature;
  w.u32(fc.sample_rate);
  w.f64(fc.window_s);
  w.f64(fc.hop_s);
  w.i32(fc.fft_size);
  w.i32(fc.n_mels);
  w.f64(fc.fmin);
  w.f64(fc.fmax);
  w.f64(fc.log_floor);
  w.i32(fc.patch_frames);
  w.u64(fc.fingerprint());

  w.u8(static_cast<uint8_t>(ckpt.channel_mode));

  const NormStats& ns = ckpt.network.norm_stats();
  w.i32(ns.channels);
  w.i32(ns.n_mels);
  w.floats(ns.mean.data(), ns.mean.size());
  w.floats(ns.std.data(), ns.std.size());

  w.u32(static_cast<uint32_t>(ckpt.network.layers().size()));
  for (const LayerParams<float>& p : ckpt.network.layers()) {
    w.u8(p.w.v.empty() ? 0 : 1);
    if (!p.w.v.empty()) {
      w.i32(p.w.b);
      w.i32(p.w.c);
      w.i32(p.w.h);
      w.i32(p.w.w);
      w.floats(p.w.v.data(), p.w.v.size());
    }
    write_float_vec(w, p.b);
    write_float_vec(w, p.gamma);
    write_float_vec(w, p.beta);
    write_float_vec(w, p.run_mean);
    write_float_vec(w, p.run_var);
  }

  write_file_atomic(path, w.out);
}

Checkpoint load_checkpoint(const std::string& path) {
  const std::string bytes = read_file(path);
  Reader r(bytes);

  char magic[8];
  r.bytes(magic, 8);
  if (std::memcmp(magic, kMagic, 8) != 0)
    throw DataError(path + ": not a checkpoint file (bad magic)");
  const uint32_t version = r.u32();
  if (version != kVersion)
    throw DataError(path + ": unsupported checkpoint version " + std::to_string(version));

  Checkpoint ckpt;
  NetworkSpec spec;
  spec.name = r.str();
  spec.n_classes = r.i32();
  spec.in_c = r.i32();
  spec.in_h = r.i32();
  spec.in_w = r.i32();
  const uint32_t n_layers = r.u32();
  for (uint32_t i = 0; i < n_layers; ++i) {
    LayerSpec l;
    const uint8_t kind = r.u8();
    if (kind > static_cast<uint8_t>(LayerKind::softmax))
      throw DataError(path + ": unknown layer kind " + std::to_string(kind));
    l.kind = static_cast<LayerKind>(kind);
    l.in_c = r.i32();
    l.out_c = r.i32();
    l.stride = r.i32();
    spec.layers.push_back(l);
  }
  const uint64_t stored_spec_fp = r.u64();
  if (spec.fingerprint() != stored_spec_fp)
    throw DataError(path + ": network spec fingerprint mismatch (file corrupt?)");
  spec.shape_check();

  FeatureConfig fc;
  fc.sample_rate = r.u32();
  fc.window_s = r.f64();
  fc.hop_s = r.f64();
  fc.fft_size = r.i32();
  fc.n_mels = r.i32();
  fc.fmin = r.f64();
  fc.fmax = r.f64();
  fc.log_floor = r.f64();
  fc.patch_frames = r.i32();
  const uint64_t stored_feat_fp = r.u64();
  if (fc.fingerprint() != stored_feat_fp)
    throw DataError(path + ": feature config fingerprint mismatch (file corrupt?)");
  ckpt.feature = fc;

  const uint8_t mode = r.u8();
  if (mode > static_cast<uint8_t>(ChannelMode::mean))
    throw DataError(path + ": unknown channel mode " + std::to_string(mode));
  ckpt.channel_mode = static_cast<ChannelMode>(mode);

  ckpt.network.spec_ = spec;
  NormStats& ns = ckpt.network.norm_stats();
  ns.channels = r.i32();
  ns.n_mels = r.i32();
  ns.mean.resize(static_cast<size_t>(ns.channels) * ns.n_mels);
  ns.std.resize(ns.mean.size());
  r.floats(ns.mean.data(), ns.mean.size());
  r.floats(ns.std.data(), ns.std.size());

  const uint32_t n_param_layers = r.u32();
  if (n_param_layers != spec.layers.size())
    throw DataError(path + ": parameter layer count does not match the spec");
  ckpt.network.layers_.resize(n_param_layers);
  for (uint32_t i = 0; i < n_param_layers; ++i) {
    LayerParams<float>& p = ckpt.network.layers_[i];
    if (r.u8() != 0) {
      const int b = r.i32(), c = r.i32(), h = r.i32(), w = r.i32();
      if (b < 1 || c < 1 || h < 1 || w < 1)
        throw DataError(path + ": bad tensor shape in layer " + std::to_string(i));
      p.w = Tensor4<float>(b, c, h, w);
      r.floats(p.w.v.data(), p.w.v.size());
    }
    p.b = read_float_vec(r);
    p.gamma = read_float_vec(r);
    p.beta = read_float_vec(r);
    p.run_mean = read_float_vec(r);
    p.run_var = read_float_vec(r);
  }

  if (r.off != bytes.size())
    throw DataError(path + ": trailing bytes after the last tensor (expected " +
                    std::to_string(r.off) + ", file has " + std::to_string(bytes.size()) + ")");
  return ckpt;
}

}  // namespace asc::nn
