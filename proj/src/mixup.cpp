#include "asc/mixup.hpp"

#include <cmath>
#include <numeric>

namespace asc {

void LabeledExample::validate() const {
  double sum = 0.0;
  for (float p : label) {
    if (p < 0.0f) throw DataError("label has a negative entry");
    sum += p;
  }
  if (std::abs(sum - 1.0) > 1e-6) throw DataError("label does not sum to 1");
}

std::vector<float> one_hot_label(int class_id, int n_classes) {
  if (class_id < 0 || class_id >= n_classes) throw DataError("one_hot_label: bad class id");
  std::vector<float> l(static_cast<size_t>(n_classes), 0.0f);
  l[static_cast<size_t>(class_id)] = 1.0f;
  return l;
}

void MixupPolicy::validate() const {
  if (mode == MixupMode::fixed && (alpha < 0.0 || alpha > 1.0))
    throw DataError("mixup: fixed mode needs alpha in [0, 1]");
  if (mode == MixupMode::beta && beta_param <= 0.0)
    throw DataError("mixup: beta mode needs beta_param > 0");
}

MixupMode mixup_mode_from_string(const std::string& s) {
  if (s == "off") return MixupMode::off;
  if (s == "fixed") return MixupMode::fixed;
  if (s == "beta") return MixupMode::beta;
  throw DataError("unknown mixup mode: \"" + s + "\" (off, fixed, beta)");
}

std::string to_string(MixupMode mode) {
  switch (mode) {
    case MixupMode::off: return "off";
    case MixupMode::fixed: return "fixed";
    case MixupMode::beta: return "beta";
  }
  return "off";
}

LabeledExample mixup_pair(const LabeledExample& a, const LabeledExample& b, double alpha) {
  if (a.features.size() != b.features.size() || a.label.size() != b.label.size() ||
      a.features.channels != b.features.channels || a.features.n_mels != b.features.n_mels ||
      a.features.frames != b.features.frames)
    throw DataError("mixup_pair: example shapes differ");
  if (alpha < 0.0 || alpha > 1.0) throw DataError("mixup_pair: alpha must be in [0, 1]");

  if (alpha == 1.0) return a;
  if (alpha == 0.0) return b;

  const auto w = static_cast<float>(alpha);
  const float wc = 1.0f - w;
  LabeledExample out;
  out.features = LogMelTensor(a.features.channels, a.features.n_mels, a.features.frames);
  for (size_t i = 0; i < a.features.v.size(); ++i)
    out.features.v[i] = w * a.features.v[i] + wc * b.features.v[i];
  out.label.resize(a.label.size());
  for (size_t i = 0; i < a.label.size(); ++i) out.label[i] = w * a.label[i] + wc * b.label[i];
  return out;
}

double sample_alpha(const MixupPolicy& policy, Rng& rng) {
  policy.validate();
  switch (policy.mode) {
    case MixupMode::off: return 1.0;
    case MixupMode::fixed: return policy.alpha;
    case MixupMode::beta: return rng.beta(policy.beta_param, policy.beta_param);
  }
  return 1.0;
}

std::vector<LabeledExample> mixup_batch(const std::vector<LabeledExample>& batch,
                                        const MixupPolicy& policy, Rng& rng) {
  if (batch.empty()) throw DataError("mixup_batch: empty batch");
  policy.validate();
  if (policy.mode == MixupMode::off) return batch;

  const double alpha = sample_alpha(policy, rng);
  std::vector<size_t> partner(batch.size());
  std::iota(partner.begin(), partner.end(), size_t{0});
  rng.shuffle(partner);

  std::vector<LabeledExample> out;
  out.reserve(batch.size());
  for (size_t i = 0; i < batch.size(); ++i)
    out.push_back(mixup_pair(batch[i], batch[partner[i]], alpha));
  return out;
}

}  // namespace asc
