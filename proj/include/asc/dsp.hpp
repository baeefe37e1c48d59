#pragma once

#include <complex>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "asc/audio.hpp"
#include "asc/common.hpp"

namespace asc {

// Small row-major matrix of doubles for the DSP front end.
struct Mat {
  int rows = 0, cols = 0;
  std::vector<double> v;

  Mat() = default;
  Mat(int r, int c) : rows(r), cols(c), v(static_cast<size_t>(r) * c, 0.0) {}
  double& at(int r, int c) { return v[static_cast<size_t>(r) * cols + c]; }
  double at(int r, int c) const { return v[static_cast<size_t>(r) * cols + c]; }
  double* row(int r) { return v.data() + static_cast<size_t>(r) * cols; }
  const double* row(int r) const { return v.data() + static_cast<size_t>(r) * cols; }
};

struct FeatureConfig {
  uint32_t sample_rate = 44100;
  double window_s = 0.025;
  double hop_s = 0.025;
  int fft_size = 2048;
  int n_mels = 128;
  double fmin = 0.0;
  double fmax = 22050.0;  // defaults to sample_rate / 2
  double log_floor = 1e-10;
  int patch_frames = 128;

  int window_length() const { return static_cast<int>(window_s * sample_rate); }
  int hop_length() const { return static_cast<int>(hop_s * sample_rate); }
  void validate() const;
  // Hash of all config fields; cache files and checkpoints carry it.
  uint64_t fingerprint() const;
};

// The three derived channels: left, right, and their mean.
struct ChannelSet {
  std::vector<double> left, right, mean;
};

ChannelSet derive_channels(const AudioClip& clip);

// Periodic Hann: w[k] = 0.5 * (1 - cos(2*pi*k / n)), the first n points of
// the (n+1)-point symmetric window.
std::vector<double> hann_window(int n);

// Frame f covers samples [f*hop, f*hop + window_len); trailing samples that
// do not fill a frame are discarded. Throws DataError when the signal is
// shorter than one window.
Mat frame_signal(const std::vector<double>& signal, int window_len, int hop_len);

int frame_count(size_t signal_len, int window_len, int hop_len);

// Radix-2 DFT plan for one transform size; immutable once built, safe to
// share read-only across threads.
class Dft {
 public:
  explicit Dft(int n);  // n must be a power of two
  int size() const { return n_; }

  // |X[k]|^2 for k in [0, n/2]: window, zero-pad, transform, square.
  void power(const double* frame, int frame_len, const double* window, double* out) const;

 private:
  void transform(std::vector<std::complex<double>>& a) const;
  int n_;
  int log2n_;
  std::vector<int> bitrev_;
  std::vector<std::complex<double>> twiddle_;
};

// Power spectra of all frames: [frames][fft_size/2 + 1]. OpenMP-parallel
// over frames; each row's arithmetic is identical to the serial variant.
Mat power_spectrum(const Mat& frames, const std::vector<double>& window, int fft_size);

namespace serial {
Mat power_spectrum(const Mat& frames, const std::vector<double>& window, int fft_size);
}

// HTK mel scale.
double hz_to_mel(double hz);
double mel_to_hz(double mel);

// Triangular mel filterbank. Rows are sampled at FFT bin centers and
// rescaled to unit maximum, so every row peaks at exactly 1.
struct MelFilterbank {
  int n_mels = 0;
  int n_bins = 0;               // fft_size/2 + 1
  std::vector<double> weights;  // [n_mels][n_bins]
  std::vector<double> band_edges_hz;  // n_mels + 2 edge frequencies

  double at(int m, int k) const { return weights[static_cast<size_t>(m) * n_bins + k]; }
  const double* row(int m) const { return weights.data() + static_cast<size_t>(m) * n_bins; }
};

MelFilterbank mel_filterbank(const FeatureConfig& config);

// out[m][t] = ln(max(sum_k fb[m][k] * power[t][k], log_floor)).
Mat log_mel(const Mat& power, const MelFilterbank& fb, double log_floor);

namespace serial {
Mat log_mel(const Mat& power, const MelFilterbank& fb, double log_floor);
}

// Rank-3 log-mel tensor [channels][n_mels][frames], float32. The channel
// axis order is fixed: 0 = left, 1 = right, 2 = mean.
struct LogMelTensor {
  int channels = 0, n_mels = 0, frames = 0;
  std::vector<float> v;

  LogMelTensor() = default;
  LogMelTensor(int c, int m, int t)
      : channels(c), n_mels(m), frames(t),
        v(static_cast<size_t>(c) * m * t, 0.0f) {}
  float& at(int c, int m, int t) {
    return v[(static_cast<size_t>(c) * n_mels + m) * frames + t];
  }
  float at(int c, int m, int t) const {
    return v[(static_cast<size_t>(c) * n_mels + m) * frames + t];
  }
  size_t size() const { return v.size(); }
};

// Full-clip extraction: derive channels, frame, power spectrum, mel
// projection, log compression. Rejects clips whose rate differs from the
// config (no resampling).
LogMelTensor extract_features(const AudioClip& clip, const FeatureConfig& config,
                              const MelFilterbank& fb);

// Non-overlapping patches of `patch_frames` frames; trailing frames are
// dropped. Throws DataError when the clip has fewer frames than one patch.
std::vector<LogMelTensor> extract_patches(const LogMelTensor& full, int patch_frames);

// Per-(channel, mel) normalization statistics, float32 like the tensors
// they apply to. std entries are floored at 1e-6.
struct NormStats {
  int channels = 0, n_mels = 0;
  std::vector<float> mean, std;

  float mean_at(int c, int m) const { return mean[static_cast<size_t>(c) * n_mels + m]; }
  float std_at(int c, int m) const { return std[static_cast<size_t>(c) * n_mels + m]; }
};

NormStats compute_norm_stats(const std::vector<LogMelTensor>& patches);

LogMelTensor normalize(const LogMelTensor& patch, const NormStats& stats);

// Which feature channels feed the network: all three, or a single one.
enum class ChannelMode { multi, left, right, mean };

int channel_count(ChannelMode mode);
ChannelMode channel_mode_from_string(const std::string& s);
std::string to_string(ChannelMode mode);

// Slice a 3-channel patch down to the configured network input channels.
LogMelTensor select_channels(const LogMelTensor& patch, ChannelMode mode);

// --- Feature cache ---------------------------------------------------------
//
// One file per clip: magic, config fingerprint, shape header (channels,
// n_mels, frames), row-major float32 payload. A hit requires fingerprint
// equality; anything else is a miss.

std::string cache_file_path(const std::string& cache_dir, const std::string& clip_path);
void cache_write(const std::string& cache_dir, const std::string& clip_path,
                 uint64_t config_fingerprint, const LogMelTensor& tensor);
std::optional<LogMelTensor> cache_try_read(const std::string& cache_dir,
                                           const std::string& clip_path,
                                           uint64_t config_fingerprint);

}  // namespace asc
