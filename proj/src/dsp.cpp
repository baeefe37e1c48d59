#include "asc/dsp.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>

namespace asc {

void FeatureConfig::validate() const {
  if (sample_rate == 0) throw DataError("feature config: sample_rate must be positive");
  if (window_s <= 0.0 || hop_s <= 0.0)
    throw DataError("feature config: window and hop must be positive");
  if (fft_size < 1 || (fft_size & (fft_size - 1)) != 0)
    throw DataError("feature config: fft_size must be a power of two");
  if (fft_size < window_length())
    throw DataError("feature config: fft_size " + std::to_string(fft_size) +
                    " is smaller than the window length " + std::to_string(window_length()));
  if (n_mels < 1) throw DataError("feature config: n_mels must be >= 1");
  if (fmin < 0.0 || fmin >= fmax || fmax > sample_rate / 2.0)
    throw DataError("feature config: need 0 <= fmin < fmax <= sample_rate/2");
  if (log_floor <= 0.0) throw DataError("feature config: log_floor must be positive");
  if (patch_frames < 1) throw DataError("feature config: patch_frames must be >= 1");
}

uint64_t FeatureConfig::fingerprint() const {
  std::ostringstream s;
  s.precision(17);
  s << "feat1|sr=" << sample_rate << "|win=" << window_s << "|hop=" << hop_s
    << "|fft=" << fft_size << "|mels=" << n_mels << "|fmin=" << fmin << "|fmax=" << fmax
    << "|floor=" << log_floor << "|patch=" << patch_frames;
  return fnv1a64(s.str());
}

ChannelSet derive_channels(const AudioClip& clip) {
  if (clip.channel_count() < 1 || clip.channel_count() > 2)
    throw DataError("derive_channels: clip must have 1 or 2 channels");
  const size_t n = clip.length();
  ChannelSet ch;
  ch.left.resize(n);
  ch.right.resize(n);
  ch.mean.resize(n);
  const auto& l = clip.samples[0];
  const auto& r = clip.samples[clip.channel_count() == 2 ? 1 : 0];
  for (size_t t = 0; t < n; ++t) {
    ch.left[t] = l[t];
    ch.right[t] = r[t];
    ch.mean[t] = (ch.left[t] + ch.right[t]) / 2.0;
  }
  return ch;
}

std::vector<double> hann_window(int n) {
  if (n < 1) throw DataError("hann_window: n must be >= 1");
  std::vector<double> w(static_cast<size_t>(n));
  for (int k = 0; k < n; ++k)
    w[k] = 0.5 * (1.0 - std::cos(2.0 * std::numbers::pi * k / n));
  return w;
}

int frame_count(size_t signal_len, int window_len, int hop_len) {
  if (signal_len < static_cast<size_t>(window_len)) return 0;
  return static_cast<int>((signal_len - static_cast<size_t>(window_len)) / hop_len) + 1;
}

Mat frame_signal(const std::vector<double>& signal, int window_len, int hop_len) {
  if (window_len < 1 || hop_len < 1)
    throw DataError("frame_signal: window and hop lengths must be >= 1");
  if (signal.size() < static_cast<size_t>(window_len))
    throw DataError("frame_signal: signal too short: need at least " +
                    std::to_string(window_len) + " samples, got " +
                    std::to_string(signal.size()));
  const int frames = frame_count(signal.size(), window_len, hop_len);
  Mat out(frames, window_len);
  for (int f = 0; f < frames; ++f) {
    const size_t start = static_cast<size_t>(f) * hop_len;
    std::memcpy(out.row(f), signal.data() + start, sizeof(double) * window_len);
  }
  return out;
}

// --- FFT --------------------------------------------------------------------

Dft::Dft(int n) : n_(n) {
  if (n < 1 || (n & (n - 1)) != 0) throw DataError("Dft: size must be a power of two");
  log2n_ = 0;
  while ((1 << log2n_) < n) ++log2n_;

  bitrev_.resize(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) {
    int r = 0;
    for (int b = 0; b < log2n_; ++b) r |= ((i >> b) & 1) << (log2n_ - 1 - b);
    bitrev_[i] = r;
  }
  // Twiddles for the largest stage; smaller stages stride through them.
  twiddle_.resize(static_cast<size_t>(n / 2));
  for (int k = 0; k < n / 2; ++k) {
    const double ang = -2.0 * std::numbers::pi * k / n;
    twiddle_[k] = {std::cos(ang), std::sin(ang)};
  }
}

void Dft::transform(std::vector<std::complex<double>>& a) const {
  const int n = n_;
  for (int i = 0; i < n; ++i) {
    const int j = bitrev_[i];
    if (i < j) std::swap(a[i], a[j]);
  }
  for (int len = 2; len <= n; len <<= 1) {
    const int half = len / 2;
    const int stride = n / len;
    for (int base = 0; base < n; base += len) {
      for (int k = 0; k < half; ++k) {
        const std::complex<double> w = twiddle_[static_cast<size_t>(k) * stride];
        const std::complex<double> u = a[base + k];
        const std::complex<double> t = w * a[base + k + half];
        a[base + k] = u + t;
        a[base + k + half] = u - t;
      }
    }
  }
}

void Dft::power(const double* frame, int frame_len, const double* window, double* out) const {
  std::vector<std::complex<double>> buf(static_cast<size_t>(n_), {0.0, 0.0});
  for (int t = 0; t < frame_len; ++t) buf[t] = {frame[t] * window[t], 0.0};
  transform(buf);
  for (int k = 0; k <= n_ / 2; ++k) out[k] = std::norm(buf[k]);
}

namespace {

Mat power_spectrum_impl(const Mat& frames, const std::vector<double>& window, int fft_size,
                        bool use_parallel) {
  if (static_cast<int>(window.size()) != frames.cols)
    throw DataError("power_spectrum: window length does not match frame length");
  if (fft_size < frames.cols)
    throw DataError("power_spectrum: fft_size smaller than frame length");
  const Dft dft(fft_size);
  Mat out(frames.rows, fft_size / 2 + 1);
#pragma omp parallel for schedule(static) if (use_parallel)
  for (int f = 0; f < frames.rows; ++f)
    dft.power(frames.row(f), frames.cols, window.data(), out.row(f));
  return out;
}

}  // namespace

Mat power_spectrum(const Mat& frames, const std::vector<double>& window, int fft_size) {
  return power_spectrum_impl(frames, window, fft_size, true);
}

namespace serial {
Mat power_spectrum(const Mat& frames, const std::vector<double>& window, int fft_size) {
  return power_spectrum_impl(frames, window, fft_size, false);
}
}  // namespace serial

// --- Mel filterbank ----------------------------------------------------------

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }

double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

MelFilterbank mel_filterbank(const FeatureConfig& config) {
  config.validate();
  const int n_bins = config.fft_size / 2 + 1;
  const int n_mels = config.n_mels;

  MelFilterbank fb;
  fb.n_mels = n_mels;
  fb.n_bins = n_bins;
  fb.weights.assign(static_cast<size_t>(n_mels) * n_bins, 0.0);
  fb.band_edges_hz.resize(static_cast<size_t>(n_mels) + 2);

  const double mel_lo = hz_to_mel(config.fmin);
  const double mel_hi = hz_to_mel(config.fmax);
  for (int i = 0; i < n_mels + 2; ++i)
    fb.band_edges_hz[i] = mel_to_hz(mel_lo + (mel_hi - mel_lo) * i / (n_mels + 1));

  const double bin_hz = static_cast<double>(config.sample_rate) / config.fft_size;
  for (int m = 0; m < n_mels; ++m) {
    const double lo = fb.band_edges_hz[m];
    const double mid = fb.band_edges_hz[m + 1];
    const double hi = fb.band_edges_hz[m + 2];
    double* row = fb.weights.data() + static_cast<size_t>(m) * n_bins;
    double peak = 0.0;
    for (int k = 0; k < n_bins; ++k) {
      const double f = k * bin_hz;
      double w = 0.0;
      if (f > lo && f < mid) {
        w = (f - lo) / (mid - lo);
      } else if (f == mid) {
        w = 1.0;
      } else if (f > mid && f < hi) {
        w = (hi - f) / (hi - mid);
      }
      row[k] = w;
      peak = std::max(peak, w);
    }
    if (peak <= 0.0)
      throw DataError("mel_filterbank: filter " + std::to_string(m) +
                      " has no FFT bin inside its band; reduce n_mels or raise fft_size");
    // Triangles are sampled at bin centers, so the apex rarely lands on a
    // bin; rescale to keep the unit-peak contract exact.
    for (int k = 0; k < n_bins; ++k) row[k] /= peak;
  }
  return fb;
}

namespace {

Mat log_mel_impl(const Mat& power, const MelFilterbank& fb, double log_floor, bool use_parallel) {
  if (power.cols != fb.n_bins)
    throw DataError("log_mel: power spectrum width does not match the filterbank");
  const int frames = power.rows;
  Mat out(fb.n_mels, frames);
#pragma omp parallel for schedule(static) if (use_parallel)
  for (int t = 0; t < frames; ++t) {
    const double* p = power.row(t);
    for (int m = 0; m < fb.n_mels; ++m) {
      const double* w = fb.row(m);
      double acc = 0.0;
      for (int k = 0; k < fb.n_bins; ++k) acc += w[k] * p[k];
      out.at(m, t) = std::log(std::max(acc, log_floor));
    }
  }
  return out;
}

}  // namespace

Mat log_mel(const Mat& power, const MelFilterbank& fb, double log_floor) {
  return log_mel_impl(power, fb, log_floor, true);
}

namespace serial {
Mat log_mel(const Mat& power, const MelFilterbank& fb, double log_floor) {
  return log_mel_impl(power, fb, log_floor, false);
}
}  // namespace serial

// --- Full extraction ----------------------------------------------------------

LogMelTensor extract_features(const AudioClip& clip, const FeatureConfig& config,
                              const MelFilterbank& fb) {
  config.validate();
  if (clip.sample_rate != config.sample_rate)
    throw DataError("extract_features: clip rate " + std::to_string(clip.sample_rate) +
                    " Hz does not match the configured " +
                    std::to_string(config.sample_rate) + " Hz (no resampling)");

  const ChannelSet ch = derive_channels(clip);
  const std::vector<double> window = hann_window(config.window_length());

  const std::vector<double>* chans[3] = {&ch.left, &ch.right, &ch.mean};
  LogMelTensor out;
  for (int c = 0; c < 3; ++c) {
    const Mat frames = frame_signal(*chans[c], config.window_length(), config.hop_length());
    const Mat power = power_spectrum(frames, window, config.fft_size);
    const Mat lm = log_mel(power, fb, config.log_floor);
    if (c == 0) out = LogMelTensor(3, lm.rows, lm.cols);
    for (int m = 0; m < lm.rows; ++m)
      for (int t = 0; t < lm.cols; ++t) out.at(c, m, t) = static_cast<float>(lm.at(m, t));
  }
  return out;
}

std::vector<LogMelTensor> extract_patches(const LogMelTensor& full, int patch_frames) {
  if (patch_frames < 1) throw DataError("extract_patches: patch_frames must be >= 1");
  if (full.frames < patch_frames)
    throw DataError("extract_patches: clip too short: " + std::to_string(full.frames) +
                    " frames, need at least " + std::to_string(patch_frames));
  const int n_patches = full.frames / patch_frames;
  std::vector<LogMelTensor> patches;
  patches.reserve(static_cast<size_t>(n_patches));
  for (int p = 0; p < n_patches; ++p) {
    LogMelTensor patch(full.channels, full.n_mels, patch_frames);
    for (int c = 0; c < full.channels; ++c)
      for (int m = 0; m < full.n_mels; ++m)
        for (int t = 0; t < patch_frames; ++t)
          patch.at(c, m, t) = full.at(c, m, p * patch_frames + t);
    patches.push_back(std::move(patch));
  }
  return patches;
}

NormStats compute_norm_stats(const std::vector<LogMelTensor>& patches) {
  if (patches.empty()) throw DataError("compute_norm_stats: no patches");
  const int channels = patches[0].channels;
  const int n_mels = patches[0].n_mels;

  NormStats stats;
  stats.channels = channels;
  stats.n_mels = n_mels;
  stats.mean.assign(static_cast<size_t>(channels) * n_mels, 0.0f);
  stats.std.assign(static_cast<size_t>(channels) * n_mels, 0.0f);

  // Two-pass, pooled over all frames of all patches.
  for (int c = 0; c < channels; ++c) {
    for (int m = 0; m < n_mels; ++m) {
      double sum = 0.0;
      size_t count = 0;
      for (const auto& p : patches) {
        if (p.channels != channels || p.n_mels != n_mels)
          throw DataError("compute_norm_stats: patch shapes differ");
        for (int t = 0; t < p.frames; ++t) sum += p.at(c, m, t);
        count += static_cast<size_t>(p.frames);
      }
      const double mean = sum / static_cast<double>(count);
      double sq = 0.0;
      for (const auto& p : patches)
        for (int t = 0; t < p.frames; ++t) {
          const double d = p.at(c, m, t) - mean;
          sq += d * d;
        }
      const double sd = std::sqrt(sq / static_cast<double>(count));
      const size_t idx = static_cast<size_t>(c) * n_mels + m;
      stats.mean[idx] = static_cast<float>(mean);
      stats.std[idx] = std::max(static_cast<float>(sd), 1e-6f);
    }
  }
  return stats;
}

LogMelTensor normalize(const LogMelTensor& patch, const NormStats& stats) {
  if (patch.channels != stats.channels || patch.n_mels != stats.n_mels)
    throw DataError("normalize: patch shape does not match the statistics");
  LogMelTensor out(patch.channels, patch.n_mels, patch.frames);
  for (int c = 0; c < patch.channels; ++c)
    for (int m = 0; m < patch.n_mels; ++m) {
      const float mu = stats.mean_at(c, m);
      const float sd = stats.std_at(c, m);
      for (int t = 0; t < patch.frames; ++t) out.at(c, m, t) = (patch.at(c, m, t) - mu) / sd;
    }
  return out;
}

int channel_count(ChannelMode mode) { return mode == ChannelMode::multi ? 3 : 1; }

ChannelMode channel_mode_from_string(const std::string& s) {
  if (s == "multi") return ChannelMode::multi;
  if (s == "left") return ChannelMode::left;
  if (s == "right") return ChannelMode::right;
  if (s == "mean") return ChannelMode::mean;
  throw DataError("unknown channel mode: \"" + s + "\" (multi, left, right, mean)");
}

std::string to_string(ChannelMode mode) {
  switch (mode) {
    case ChannelMode::multi: return "multi";
    case ChannelMode::left: return "left";
    case ChannelMode::right: return "right";
    case ChannelMode::mean: return "mean";
  }
  return "multi";
}

LogMelTensor select_channels(const LogMelTensor& patch, ChannelMode mode) {
  if (patch.channels != 3) throw DataError("select_channels: patch must have 3 channels");
  if (mode == ChannelMode::multi) return patch;
  const int c = mode == ChannelMode::left ? 0 : mode == ChannelMode::right ? 1 : 2;
  LogMelTensor out(1, patch.n_mels, patch.frames);
  for (int m = 0; m < patch.n_mels; ++m)
    for (int t = 0; t < patch.frames; ++t) out.at(0, m, t) = patch.at(c, m, t);
  return out;
}

// --- Feature cache -------------------------------------------------------------

namespace {
constexpr char kCacheMagic[8] = {'A', 'S', 'C', 'M', 'E', 'L', 'C', '1'};
}

std::string cache_file_path(const std::string& cache_dir, const std::string& clip_path) {
  std::ostringstream name;
  name << std::hex << fnv1a64(clip_path) << ".melcache";
  return (std::filesystem::path(cache_dir) / name.str()).string();
}

void cache_write(const std::string& cache_dir, const std::string& clip_path,
                 uint64_t config_fingerprint, const LogMelTensor& tensor) {
  std::string out;
  out.append(kCacheMagic, sizeof(kCacheMagic));
  auto put_u64 = [&out](uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
  };
  auto put_u32 = [&out](uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
  };
  put_u64(config_fingerprint);
  // The clip path disambiguates hash collisions on the cache file name.
  put_u32(static_cast<uint32_t>(clip_path.size()));
  out.append(clip_path);
  put_u32(static_cast<uint32_t>(tensor.channels));
  put_u32(static_cast<uint32_t>(tensor.n_mels));
  put_u32(static_cast<uint32_t>(tensor.frames));
  const size_t bytes = tensor.v.size() * sizeof(float);
  const size_t head = out.size();
  out.resize(head + bytes);
  std::memcpy(out.data() + head, tensor.v.data(), bytes);
  write_file_atomic(cache_file_path(cache_dir, clip_path), out);
}

std::optional<LogMelTensor> cache_try_read(const std::string& cache_dir,
                                           const std::string& clip_path,
                                           uint64_t config_fingerprint) {
  const std::string path = cache_file_path(cache_dir, clip_path);
  std::ifstream in(path, std::ios::binary);
  if (!in) return std::nullopt;
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

  size_t off = 0;
  auto need = [&](size_t n) { return off + n <= bytes.size(); };
  if (!need(sizeof(kCacheMagic)) ||
      std::memcmp(bytes.data(), kCacheMagic, sizeof(kCacheMagic)) != 0)
    return std::nullopt;
  off = sizeof(kCacheMagic);

  auto get_u64 = [&]() {
    uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(static_cast<unsigned char>(bytes[off + i])) << (8 * i);
    off += 8;
    return v;
  };
  auto get_u32 = [&]() {
    uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(static_cast<unsigned char>(bytes[off + i])) << (8 * i);
    off += 4;
    return v;
  };

  if (!need(8 + 4)) return std::nullopt;
  if (get_u64() != config_fingerprint) return std::nullopt;
  const uint32_t path_len = get_u32();
  if (!need(path_len)) return std::nullopt;
  if (bytes.compare(off, path_len, clip_path) != 0) return std::nullopt;
  off += path_len;

  if (!need(12)) return std::nullopt;
  const uint32_t channels = get_u32();
  const uint32_t n_mels = get_u32();
  const uint32_t frames = get_u32();
  LogMelTensor t(static_cast<int>(channels), static_cast<int>(n_mels),
                 static_cast<int>(frames));
  const size_t payload = t.v.size() * sizeof(float);
  if (bytes.size() - off != payload) return std::nullopt;
  std::memcpy(t.v.data(), bytes.data() + off, payload);
  return t;
}

}  // namespace asc
