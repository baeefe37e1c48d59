#pragma once

#include <string>
#include <vector>

#include "asc/common.hpp"
#include "asc/dsp.hpp"

namespace asc {

// A network input patch with a soft label on the 15-class simplex.
struct LabeledExample {
  LogMelTensor features;
  std::vector<float> label;  // non-negative, sums to 1

  void validate() const;
};

std::vector<float> one_hot_label(int class_id, int n_classes = kNumClasses);

enum class MixupMode { off, fixed, beta };

struct MixupPolicy {
  MixupMode mode = MixupMode::off;
  double alpha = 0.5;       // fixed mode: the mixing ratio, in [0, 1]
  double beta_param = 1.0;  // beta mode: Beta(beta_param, beta_param)

  void validate() const;
};

MixupMode mixup_mode_from_string(const std::string& s);
std::string to_string(MixupMode mode);

// x = alpha*a + (1-alpha)*b on features and labels. The endpoints are exact:
// alpha=1 returns a, alpha=0 returns b, bit for bit.
LabeledExample mixup_pair(const LabeledExample& a, const LabeledExample& b, double alpha);

// off -> 1 (mixing degenerates to the identity); fixed -> policy.alpha;
// beta -> one draw from Beta(beta_param, beta_param).
double sample_alpha(const MixupPolicy& policy, Rng& rng);

// One alpha per batch; partners are a uniformly random permutation of the
// batch. mode=off returns the input unchanged.
std::vector<LabeledExample> mixup_batch(const std::vector<LabeledExample>& batch,
                                        const MixupPolicy& policy, Rng& rng);

}  // namespace asc
