#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "asc/common.hpp"

namespace asc {

// Multi-channel PCM signal. Channel 0 is the left channel.
struct AudioClip {
  std::vector<std::vector<float>> samples;  // [channel][t], values in [-1, 1]
  uint32_t sample_rate = 0;

  int channel_count() const { return static_cast<int>(samples.size()); }
  size_t length() const { return samples.empty() ? 0 : samples[0].size(); }
  void validate() const;  // throws DataError on an invariant violation
};

// The 15 scene classes, DCASE 2017 task-1 label tokens in alphabetical
// order; a class id is the index into this table.
inline constexpr std::array<std::string_view, 15> kSceneNames = {
    "beach",        "bus",   "cafe/restaurant", "car",     "city_center",
    "forest_path",  "grocery_store", "home",    "library", "metro_station",
    "office",       "park",  "residential_area", "train",  "tram"};

inline constexpr int kNumClasses = 15;

int scene_id(std::string_view name);          // throws DataError on unknown name
std::string_view scene_name(int class_id);    // throws DataError on bad id

// --- WAV I/O ------------------------------------------------------------
//
// RIFF/WAVE, little-endian. Decodes PCM 16/24-bit and IEEE float 32-bit,
// 1 or 2 channels; unknown chunks are skipped. Mono files are duplicated
// into two identical channels so the downstream three-channel feature
// pipeline is total.

AudioClip read_wav(const std::string& path);

// Encodes PCM at the requested bit depth; round-trip error per sample is
// at most one quantization step.
void write_wav(const AudioClip& clip, const std::string& path, int bit_depth = 16);

// --- Synthetic scene corpus ----------------------------------------------
//
// Desk-scale stand-in for a real scene recording set. Each class has a
// distinct spectral signature:
//   * a two-tone bank at a class fundamental (the dominant band),
//   * class-specific band-limited noise higher up,
//   * a class-specific amplitude-modulation rate.
// The stereo image carries information the mean channel loses: the right
// channel is a slightly attenuated, delayed copy of the base signal, and a
// class-keyed low-frequency cue tone is mixed in antiphase (left +, right -)
// so it cancels exactly in (L+R)/2.
//
// Deterministic pure function of (scene_class, seed, duration_s, sample_rate).
AudioClip synthesize_scene(int scene_class, uint64_t seed, double duration_s,
                           uint32_t sample_rate);

}  // namespace asc
