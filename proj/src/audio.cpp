#include "asc/audio.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numbers>
#include <sstream>

namespace asc {

void AudioClip::validate() const {
  if (samples.empty() || samples.size() > 2)
    throw DataError("AudioClip: channel count must be 1 or 2");
  if (sample_rate == 0) throw DataError("AudioClip: sample_rate must be positive");
  const size_t len = samples[0].size();
  for (const auto& ch : samples) {
    if (ch.size() != len) throw DataError("AudioClip: channels differ in length");
    for (float s : ch) {
      if (!std::isfinite(s) || s < -1.0f || s > 1.0f)
        throw DataError("AudioClip: sample out of [-1, 1]");
    }
  }
}

int scene_id(std::string_view name) {
  for (int i = 0; i < kNumClasses; ++i) {
    if (kSceneNames[i] == name) return i;
  }
  throw DataError("unknown scene class: \"" + std::string(name) + "\"");
}

std::string_view scene_name(int class_id) {
  if (class_id < 0 || class_id >= kNumClasses)
    throw DataError("scene class id out of range: " + std::to_string(class_id));
  return kSceneNames[static_cast<size_t>(class_id)];
}

// --- WAV decoding ---------------------------------------------------------

namespace {

uint16_t rd_u16(const unsigned char* p) { return static_cast<uint16_t>(p[0] | p[1] << 8); }

uint32_t rd_u32(const unsigned char* p) {
  return static_cast<uint32_t>(p[0]) | static_cast<uint32_t>(p[1]) << 8 |
         static_cast<uint32_t>(p[2]) << 16 | static_cast<uint32_t>(p[3]) << 24;
}

struct FmtChunk {
  uint16_t format = 0;
  uint16_t channels = 0;
  uint32_t sample_rate = 0;
  uint16_t block_align = 0;
  uint16_t bits = 0;
};

constexpr uint16_t kFormatPcm = 1;
constexpr uint16_t kFormatIeeeFloat = 3;

}  // namespace

AudioClip read_wav(const std::string& path) {
  const std::string bytes = read_file(path);
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
  const size_t n = bytes.size();

  if (n < 12 || std::memcmp(p, "RIFF", 4) != 0)
    throw DataError(path + ": RIFF header missing 'RIFF' tag");
  if (std::memcmp(p + 8, "WAVE", 4) != 0)
    throw DataError(path + ": RIFF header missing 'WAVE' form type");

  FmtChunk fmt;
  bool have_fmt = false;
  const unsigned char* data = nullptr;
  size_t data_size = 0;

  size_t off = 12;
  while (off + 8 <= n) {
    char id[5] = {0};
    std::memcpy(id, p + off, 4);
    const uint32_t size = rd_u32(p + off + 4);
    const size_t body = off + 8;

    if (std::memcmp(id, "fmt ", 4) == 0) {
      if (size < 16 || body + 16 > n) throw DataError(path + ": malformed 'fmt ' chunk");
      fmt.format = rd_u16(p + body);
      fmt.channels = rd_u16(p + body + 2);
      fmt.sample_rate = rd_u32(p + body + 4);
      fmt.block_align = rd_u16(p + body + 12);
      fmt.bits = rd_u16(p + body + 14);
      have_fmt = true;
    } else if (std::memcmp(id, "data", 4) == 0) {
      if (body + size > n) {
        std::ostringstream msg;
        msg << path << ": truncated 'data' chunk: expected " << size << " bytes, got "
            << (n - body);
        throw DataError(msg.str());
      }
      data = p + body;
      data_size = size;
    }
    // Unknown chunks are skipped. Chunk bodies are word-aligned.
    off = body + size + (size & 1);
  }

  if (!have_fmt) throw DataError(path + ": missing 'fmt ' chunk");
  if (data == nullptr) throw DataError(path + ": missing 'data' chunk");

  if (fmt.format != kFormatPcm && fmt.format != kFormatIeeeFloat)
    throw DataError(path + ": unsupported format code " + std::to_string(fmt.format) +
                    " (PCM and IEEE float only)");
  if (fmt.format == kFormatPcm && fmt.bits != 16 && fmt.bits != 24)
    throw DataError(path + ": unsupported PCM bit depth " + std::to_string(fmt.bits));
  if (fmt.format == kFormatIeeeFloat && fmt.bits != 32)
    throw DataError(path + ": unsupported float bit depth " + std::to_string(fmt.bits));
  if (fmt.channels != 1 && fmt.channels != 2)
    throw DataError(path + ": unsupported channel count " + std::to_string(fmt.channels));
  if (fmt.sample_rate == 0) throw DataError(path + ": zero sample rate in 'fmt ' chunk");

  const size_t bytes_per_sample = fmt.bits / 8;
  const size_t frame_bytes = bytes_per_sample * fmt.channels;
  if (fmt.block_align != 0 && fmt.block_align != frame_bytes)
    throw DataError(path + ": 'fmt ' block alignment disagrees with bit depth");
  if (data_size % frame_bytes != 0) {
    std::ostringstream msg;
    msg << path << ": truncated 'data' chunk: expected a multiple of " << frame_bytes
        << " bytes, got " << data_size;
    throw DataError(msg.str());
  }
  const size_t frames = data_size / frame_bytes;

  AudioClip clip;
  clip.sample_rate = fmt.sample_rate;
  clip.samples.assign(fmt.channels, std::vector<float>(frames));

  for (size_t t = 0; t < frames; ++t) {
    for (int c = 0; c < fmt.channels; ++c) {
      const unsigned char* s = data + t * frame_bytes + c * bytes_per_sample;
      float v = 0.0f;
      if (fmt.format == kFormatPcm && fmt.bits == 16) {
        const auto q = static_cast<int16_t>(rd_u16(s));
        v = static_cast<float>(q) / 32768.0f;
      } else if (fmt.format == kFormatPcm && fmt.bits == 24) {
        // sign-extend 3-byte little-endian
        int32_t q = s[0] | s[1] << 8 | s[2] << 16;
        if (q & 0x800000) q |= ~0xFFFFFF;
        v = static_cast<float>(q) / 8388608.0f;
      } else {
        float f;
        std::memcpy(&f, s, 4);
        if (!std::isfinite(f))
          throw DataError(path + ": 'data' chunk contains a non-finite float sample");
        v = std::clamp(f, -1.0f, 1.0f);
      }
      clip.samples[c][t] = v;
    }
  }

  if (fmt.channels == 1) clip.samples.push_back(clip.samples[0]);
  return clip;
}

// --- WAV encoding ---------------------------------------------------------

namespace {

void wr_u16(std::string& s, uint16_t v) {
  s.push_back(static_cast<char>(v & 0xFF));
  s.push_back(static_cast<char>(v >> 8));
}

void wr_u32(std::string& s, uint32_t v) {
  for (int i = 0; i < 4; ++i) s.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

}  // namespace

void write_wav(const AudioClip& clip, const std::string& path, int bit_depth) {
  clip.validate();
  if (bit_depth != 16 && bit_depth != 24)
    throw DataError("write_wav: bit depth must be 16 or 24, got " + std::to_string(bit_depth));

  const int channels = clip.channel_count();
  const size_t frames = clip.length();
  const size_t bytes_per_sample = static_cast<size_t>(bit_depth) / 8;
  const size_t data_size = frames * channels * bytes_per_sample;

  std::string out;
  out.reserve(44 + data_size);
  out.append("RIFF");
  wr_u32(out, static_cast<uint32_t>(36 + data_size));
  out.append("WAVE");
  out.append("fmt ");
  wr_u32(out, 16);
  wr_u16(out, kFormatPcm);
  wr_u16(out, static_cast<uint16_t>(channels));
  wr_u32(out, clip.sample_rate);
  wr_u32(out, static_cast<uint32_t>(clip.sample_rate * channels * bytes_per_sample));
  wr_u16(out, static_cast<uint16_t>(channels * bytes_per_sample));
  wr_u16(out, static_cast<uint16_t>(bit_depth));
  out.append("data");
  wr_u32(out, static_cast<uint32_t>(data_size));

  const double scale = bit_depth == 16 ? 32768.0 : 8388608.0;
  const long qmin = -static_cast<long>(scale);
  const long qmax = static_cast<long>(scale) - 1;
  for (size_t t = 0; t < frames; ++t) {
    for (int c = 0; c < channels; ++c) {
      long q = std::lround(static_cast<double>(clip.samples[c][t]) * scale);
      q = std::clamp(q, qmin, qmax);
      const auto u = static_cast<uint32_t>(q);
      out.push_back(static_cast<char>(u & 0xFF));
      out.push_back(static_cast<char>((u >> 8) & 0xFF));
      if (bit_depth == 24) out.push_back(static_cast<char>((u >> 16) & 0xFF));
    }
  }

  write_file_atomic(path, out);
}

// --- Synthetic scenes -------------------------------------------------------

namespace {

// Per-class signature constants. Tone fundamentals and cue tones are spread
// far enough apart to land in distinct mel bands at 64+ mel resolution.
double tone_hz(int c) { return 2000.0 + 350.0 * c; }
double band_hz(int c) { return 9000.0 + 500.0 * c; }
double am_hz(int c) { return 1.5 + 0.7 * c; }
double cue_hz(int c) { return 350.0 + 160.0 * c; }
int channel_delay_samples(int c) { return 4 + c; }

}  // namespace

AudioClip synthesize_scene(int scene_class, uint64_t seed, double duration_s,
                           uint32_t sample_rate) {
  scene_name(scene_class);  // validates the id
  if (duration_s <= 0.0) throw DataError("synthesize_scene: duration must be positive");
  if (sample_rate == 0) throw DataError("synthesize_scene: sample rate must be positive");

  const auto n = static_cast<size_t>(std::llround(duration_s * sample_rate));
  const double dt = 1.0 / sample_rate;
  constexpr double two_pi = 2.0 * std::numbers::pi;

  Rng rng = Rng(seed).fork(0x5cE4Eull, static_cast<uint64_t>(scene_class));

  // Clip-level jitter keeps examples within a class from being identical.
  const double detune = 1.0 + 0.03 * (rng.uniform() - 0.5);
  const double f0 = tone_hz(scene_class) * detune;
  const double f1 = 1.5 * f0;
  const double a0 = 0.32 * (1.0 + 0.4 * (rng.uniform() - 0.5));
  const double a1 = 0.16 * (1.0 + 0.4 * (rng.uniform() - 0.5));
  const double ph0 = rng.uniform(0.0, two_pi);
  const double ph1 = rng.uniform(0.0, two_pi);

  // Band-limited noise as a bed of random-phase sinusoids.
  constexpr int kBandTones = 16;
  std::array<double, kBandTones> bf{}, bp{};
  for (int i = 0; i < kBandTones; ++i) {
    bf[i] = band_hz(scene_class) + rng.uniform(-400.0, 400.0);
    bp[i] = rng.uniform(0.0, two_pi);
  }
  const double band_amp = 0.022;

  const double am_rate = am_hz(scene_class);
  const double am_phase = rng.uniform(0.0, two_pi);

  const double cue_f = cue_hz(scene_class);
  const double cue_phase = rng.uniform(0.0, two_pi);
  const double cue_amp = 0.10;

  const int delay = channel_delay_samples(scene_class);
  const double right_gain = 0.92;

  // Base signal: tones + band noise, amplitude modulated.
  std::vector<double> base(n);
  for (size_t t = 0; t < n; ++t) {
    const double x = static_cast<double>(t) * dt;
    double s = a0 * std::sin(two_pi * f0 * x + ph0) + a1 * std::sin(two_pi * f1 * x + ph1);
    for (int i = 0; i < kBandTones; ++i) s += band_amp * std::sin(two_pi * bf[i] * x + bp[i]);
    const double am = (1.0 + 0.5 * std::sin(two_pi * am_rate * x + am_phase)) / 1.5;
    base[t] = s * am;
  }

  std::vector<double> common(n), priv_l(n), priv_r(n);
  for (size_t t = 0; t < n; ++t) common[t] = 0.020 * rng.normal();
  for (size_t t = 0; t < n; ++t) priv_l[t] = 0.012 * rng.normal();
  for (size_t t = 0; t < n; ++t) priv_r[t] = 0.012 * rng.normal();

  AudioClip clip;
  clip.sample_rate = sample_rate;
  clip.samples.assign(2, std::vector<float>(n));
  for (size_t t = 0; t < n; ++t) {
    const double x = static_cast<double>(t) * dt;
    const double cue = cue_amp * std::sin(two_pi * cue_f * x + cue_phase);
    const double delayed =
        t >= static_cast<size_t>(delay) ? base[t - static_cast<size_t>(delay)] : 0.0;
    const double l = base[t] + cue + common[t] + priv_l[t];
    const double r = right_gain * delayed - cue + common[t] + priv_r[t];
    clip.samples[0][t] = static_cast<float>(std::clamp(l, -1.0, 1.0));
    clip.samples[1][t] = static_cast<float>(std::clamp(r, -1.0, 1.0));
  }
  return clip;
}

}  // namespace asc
