#pragma once

#include <string>
#include <utility>
#include <vector>

#include "asc/manifest.hpp"
#include "asc/nn/checkpoint.hpp"

namespace asc {

// Patch-to-clip aggregation strategies. `max` (the default) takes the
// per-class maximum over patches and then the argmax; `max_patch` is the
// other reading of that phrase: the single highest patch probability wins.
enum class Aggregation { max, mean, median, majority, max_patch };

Aggregation aggregation_from_string(const std::string& s);
std::string to_string(Aggregation strategy);

struct ClipAggregate {
  int label = 0;
  std::vector<double> score;  // per-class aggregate backing the decision
};

// All argmax/vote ties break to the lowest class id.
ClipAggregate aggregate_clip(const std::vector<std::vector<double>>& patch_probs,
                             Aggregation strategy);

struct MetricsReport {
  double overall_accuracy = 0.0;
  std::vector<double> per_class_accuracy;       // 0 for classes with no clips
  std::vector<std::vector<int>> confusion;      // [true][predicted]
  int total_clips = 0;

  std::string to_table() const;  // human-readable rendering
};

// Confusion counts and accuracies from (true, predicted) pairs.
MetricsReport metrics_from_pairs(const std::vector<std::pair<int, int>>& pairs,
                                 int n_classes = kNumClasses);

struct ClipPrediction {
  std::string clip_path;
  int true_class = 0;
  int predicted_class = 0;
  Aggregation strategy = Aggregation::max;
  std::vector<double> score;
  std::vector<std::vector<double>> patch_probabilities;
};

struct ScoreResult {
  MetricsReport metrics;
  std::vector<ClipPrediction> predictions;
};

// Score every clip of a manifest with a trained model: eval-mode forward on
// each patch, aggregation per strategy, metrics over clips. Deterministic;
// clips are processed in manifest order.
ScoreResult score_manifest(nn::Checkpoint& checkpoint, const Manifest& manifest,
                           Aggregation strategy, const std::string& cache_dir = "");

// Per-patch probabilities for one clip (eval-mode forward).
std::vector<std::vector<double>> predict_clip_patches(nn::Checkpoint& checkpoint,
                                                      const AudioClip& clip);

}  // namespace asc
