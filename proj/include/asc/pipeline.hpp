#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "asc/evaluation.hpp"
#include "asc/manifest.hpp"
#include "asc/mixup.hpp"
#include "asc/nn/checkpoint.hpp"
#include "asc/nn/network.hpp"

namespace asc {

// Training configuration, read from a flat key=value file (# comments).
// Every knob has a default; unknown keys are errors.
struct TrainConfig {
  FeatureConfig feature;
  std::string network = "vgg_style";
  ChannelMode channel_mode = ChannelMode::multi;
  nn::OptimizerConfig optimizer;
  MixupPolicy mixup;
  int batch_size = 32;
  int epochs = 40;
  uint64_t seed = 1;
  int folds = 4;
  Aggregation aggregation = Aggregation::max;
  std::string cache_dir;
  int eval_every = 1;  // epochs between validation passes; 0 = final epoch only

  void validate() const;
};

TrainConfig parse_train_config(const std::string& path);
TrainConfig parse_train_config_text(const std::string& text, const std::string& origin);
std::string train_config_to_text(const TrainConfig& config);

// Caches full-clip feature tensors, in memory and optionally on disk, so
// k-fold training reads each clip once.
class FeatureStore {
 public:
  FeatureStore(FeatureConfig config, std::string cache_dir);

  const LogMelTensor& get(const std::string& clip_path);
  const FeatureConfig& config() const { return config_; }

 private:
  FeatureConfig config_;
  MelFilterbank fb_;
  std::string cache_dir_;
  uint64_t fingerprint_;
  std::map<std::string, LogMelTensor> memory_;
};

struct FoldRecord {
  int fold = 0;
  std::vector<double> train_loss;  // one entry per epoch
  std::vector<double> train_acc;
  std::vector<double> val_acc;     // one entry per validation pass
  double final_val_acc = 0.0;
};

struct RunRecord {
  std::string network;
  std::string channel_mode;
  std::string mixup_mode;
  double mixup_alpha = 0.0;       // 0 for mode=off, matching the sweep convention
  double mixup_beta_param = 0.0;
  uint64_t seed = 0;
  TrainConfig config;
  std::vector<FoldRecord> folds;
  std::optional<double> cv_mean;  // absent when training on all folds
  bool train_on_all_folds = false;
  std::optional<double> eval_accuracy;
  double wall_s = 0.0;

  std::string to_json_line() const;
};

RunRecord run_record_from_json_line(const std::string& line);
std::vector<RunRecord> load_run_records(const std::vector<std::string>& paths);

struct FoldTrainResult {
  FoldRecord record;
  nn::Network<float> model;
};

// Train one fold: features and normalization statistics come from the
// training folds only, then per-epoch shuffle -> batch -> mixup -> forward
// -> backward -> SGD, with clip-level validation per `eval_every`.
FoldTrainResult train_fold(const Manifest& manifest, const FoldPlan& plan, int fold_index,
                           const TrainConfig& config, FeatureStore* store = nullptr);

struct CrossValidationOptions {
  std::string out_dir;             // checkpoints + run record land here when set
  std::string fold_plan_path;      // external plan; empty = generate from config
  bool train_on_all_folds = false;
  std::string eval_manifest_path;  // held-out set to score after training
};

RunRecord run_cross_validation(const Manifest& manifest, const TrainConfig& config,
                               const CrossValidationOptions& options = {});

// Comparison table keyed by (network, channel_mode, alpha), sorted by
// network, channel mode, then alpha; one row per record.
struct ComparisonRow {
  std::string network;
  std::string channel_mode;
  std::string mixup_mode;
  double alpha = 0.0;
  uint64_t seed = 0;
  std::optional<double> cv_mean;
  std::optional<double> eval_accuracy;
};

struct ComparisonTable {
  std::vector<ComparisonRow> rows;

  std::string to_table() const;
  std::string to_json() const;
};

ComparisonTable compare_runs(const std::vector<RunRecord>& records);

// Desk-scale corpus: 15 classes x clips_per_class stereo WAVs plus a
// manifest, locations grouped so fold generation has leakage structure.
struct SynthCorpusOptions {
  std::string out_dir;
  int clips_per_class = 8;
  double duration_s = 30.0;
  uint32_t sample_rate = 44100;
  uint64_t seed = 1;
  int location_group_size = 4;
  int bit_depth = 16;
};

Manifest synth_corpus(const SynthCorpusOptions& options);

}  // namespace asc
