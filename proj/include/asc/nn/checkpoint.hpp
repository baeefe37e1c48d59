#pragma once

#include <string>

#include "asc/dsp.hpp"
#include "asc/nn/network.hpp"

namespace asc::nn {

// Everything needed to score new audio with a trained model: the network
// spec and parameters (with batchnorm running stats), the feature config
// that produced its inputs, the channel mode, and the training-fold
// normalization statistics. Binary little-endian: magic, format version,
// spec + fingerprint, feature config + fingerprint, norm stats, then one
// shape-headed row-major float32 tensor per parameter. Loading verifies
// both fingerprints and the exact byte length.
struct Checkpoint {
  Network<float> network;
  FeatureConfig feature;
  ChannelMode channel_mode = ChannelMode::multi;
};

void save_checkpoint(const Checkpoint& ckpt, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace asc::nn
