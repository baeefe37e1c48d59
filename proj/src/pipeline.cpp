#include "asc/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <iomanip>
#include <numeric>
#include <sstream>

#include <json.hpp>

namespace asc {

using nlohmann::json;

// --- TrainConfig ---------------------------------------------------------------

void TrainConfig::validate() const {
  feature.validate();
  optimizer.validate();
  mixup.validate();
  if (batch_size < 1) throw DataError("config: batch_size must be >= 1");
  if (mixup.mode != MixupMode::off && batch_size < 2)
    throw DataError("config: batch_size must be >= 2 when mixup is enabled");
  if (epochs < 1) throw DataError("config: epochs must be >= 1");
  if (folds < 1) throw DataError("config: folds must be >= 1");
  if (eval_every < 0) throw DataError("config: eval_every must be >= 0");
}

namespace {

std::string strip_ws(const std::string& s) {
  const size_t a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  const size_t b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

double parse_double(const std::string& v, const std::string& key) {
  try {
    size_t pos;
    const double d = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return d;
  } catch (...) {
    throw DataError("config: bad numeric value for " + key + ": \"" + v + "\"");
  }
}

long parse_long(const std::string& v, const std::string& key) {
  try {
    size_t pos;
    const long n = std::stol(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return n;
  } catch (...) {
    throw DataError("config: bad integer value for " + key + ": \"" + v + "\"");
  }
}

}  // namespace

TrainConfig parse_train_config_text(const std::string& text, const std::string& origin) {
  TrainConfig c;
  bool fmax_set = false;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string s = strip_ws(line);
    if (s.empty() || s[0] == '#') continue;
    const size_t eq = s.find('=');
    if (eq == std::string::npos)
      throw DataError(origin + ":" + std::to_string(line_no) + ": expected key = value");
    const std::string key = strip_ws(s.substr(0, eq));
    const std::string value = strip_ws(s.substr(eq + 1));

    if (key == "config_version") {
      if (parse_long(value, key) != 1)
        throw DataError(origin + ": unsupported config_version " + value);
    } else if (key == "sample_rate") {
      c.feature.sample_rate = static_cast<uint32_t>(parse_long(value, key));
    } else if (key == "window_s") {
      c.feature.window_s = parse_double(value, key);
    } else if (key == "hop_s") {
      c.feature.hop_s = parse_double(value, key);
    } else if (key == "fft_size") {
      c.feature.fft_size = static_cast<int>(parse_long(value, key));
    } else if (key == "n_mels") {
      c.feature.n_mels = static_cast<int>(parse_long(value, key));
    } else if (key == "fmin") {
      c.feature.fmin = parse_double(value, key);
    } else if (key == "fmax") {
      c.feature.fmax = parse_double(value, key);
      fmax_set = true;
    } else if (key == "log_floor") {
      c.feature.log_floor = parse_double(value, key);
    } else if (key == "patch_frames") {
      c.feature.patch_frames = static_cast<int>(parse_long(value, key));
    } else if (key == "network") {
      c.network = value;
    } else if (key == "channel_mode") {
      c.channel_mode = channel_mode_from_string(value);
    } else if (key == "learning_rate") {
      c.optimizer.learning_rate = parse_double(value, key);
    } else if (key == "momentum") {
      c.optimizer.momentum = parse_double(value, key);
    } else if (key == "weight_decay") {
      c.optimizer.weight_decay = parse_double(value, key);
    } else if (key == "lr_schedule") {
      if (value == "constant") c.optimizer.schedule = nn::LrSchedule::constant;
      else if (value == "step") c.optimizer.schedule = nn::LrSchedule::step;
      else throw DataError(origin + ": unknown lr_schedule \"" + value + "\"");
    } else if (key == "lr_step_factor") {
      c.optimizer.step_factor = parse_double(value, key);
    } else if (key == "lr_step_every") {
      c.optimizer.step_every = static_cast<int>(parse_long(value, key));
    } else if (key == "mixup_mode") {
      c.mixup.mode = mixup_mode_from_string(value);
    } else if (key == "mixup_alpha") {
      c.mixup.alpha = parse_double(value, key);
    } else if (key == "mixup_beta_param") {
      c.mixup.beta_param = parse_double(value, key);
    } else if (key == "batch_size") {
      c.batch_size = static_cast<int>(parse_long(value, key));
    } else if (key == "epochs") {
      c.epochs = static_cast<int>(parse_long(value, key));
    } else if (key == "seed") {
      c.seed = static_cast<uint64_t>(parse_long(value, key));
    } else if (key == "folds") {
      c.folds = static_cast<int>(parse_long(value, key));
    } else if (key == "aggregation") {
      c.aggregation = aggregation_from_string(value);
    } else if (key == "cache_dir") {
      c.cache_dir = value;
    } else if (key == "eval_every") {
      c.eval_every = static_cast<int>(parse_long(value, key));
    } else {
      throw DataError(origin + ":" + std::to_string(line_no) + ": unknown key \"" + key + "\"");
    }
  }
  if (!fmax_set) c.feature.fmax = c.feature.sample_rate / 2.0;
  c.validate();
  return c;
}

TrainConfig parse_train_config(const std::string& path) {
  return parse_train_config_text(read_file(path), path);
}

std::string train_config_to_text(const TrainConfig& c) {
  std::ostringstream out;
  out.precision(17);
  out << "config_version = 1\n";
  out << "sample_rate = " << c.feature.sample_rate << "\n";
  out << "window_s = " << c.feature.window_s << "\n";
  out << "hop_s = " << c.feature.hop_s << "\n";
  out << "fft_size = " << c.feature.fft_size << "\n";
  out << "n_mels = " << c.feature.n_mels << "\n";
  out << "fmin = " << c.feature.fmin << "\n";
  out << "fmax = " << c.feature.fmax << "\n";
  out << "log_floor = " << c.feature.log_floor << "\n";
  out << "patch_frames = " << c.feature.patch_frames << "\n";
  out << "network = " << c.network << "\n";
  out << "channel_mode = " << to_string(c.channel_mode) << "\n";
  out << "learning_rate = " << c.optimizer.learning_rate << "\n";
  out << "momentum = " << c.optimizer.momentum << "\n";
  out << "weight_decay = " << c.optimizer.weight_decay << "\n";
  out << "lr_schedule = "
      << (c.optimizer.schedule == nn::LrSchedule::constant ? "constant" : "step") << "\n";
  out << "lr_step_factor = " << c.optimizer.step_factor << "\n";
  out << "lr_step_every = " << c.optimizer.step_every << "\n";
  out << "mixup_mode = " << to_string(c.mixup.mode) << "\n";
  out << "mixup_alpha = " << c.mixup.alpha << "\n";
  out << "mixup_beta_param = " << c.mixup.beta_param << "\n";
  out << "batch_size = " << c.batch_size << "\n";
  out << "epochs = " << c.epochs << "\n";
  out << "seed = " << c.seed << "\n";
  out << "folds = " << c.folds << "\n";
  out << "aggregation = " << to_string(c.aggregation) << "\n";
  out << "cache_dir = " << c.cache_dir << "\n";
  out << "eval_every = " << c.eval_every << "\n";
  return out.str();
}

namespace {

json config_to_json(const TrainConfig& c) {
  json j;
  j["sample_rate"] = c.feature.sample_rate;
  j["window_s"] = c.feature.window_s;
  j["hop_s"] = c.feature.hop_s;
  j["fft_size"] = c.feature.fft_size;
  j["n_mels"] = c.feature.n_mels;
  j["fmin"] = c.feature.fmin;
  j["fmax"] = c.feature.fmax;
  j["log_floor"] = c.feature.log_floor;
  j["patch_frames"] = c.feature.patch_frames;
  j["network"] = c.network;
  j["channel_mode"] = to_string(c.channel_mode);
  j["learning_rate"] = c.optimizer.learning_rate;
  j["momentum"] = c.optimizer.momentum;
  j["weight_decay"] = c.optimizer.weight_decay;
  j["lr_schedule"] = c.optimizer.schedule == nn::LrSchedule::constant ? "constant" : "step";
  j["lr_step_factor"] = c.optimizer.step_factor;
  j["lr_step_every"] = c.optimizer.step_every;
  j["mixup_mode"] = to_string(c.mixup.mode);
  j["mixup_alpha"] = c.mixup.alpha;
  j["mixup_beta_param"] = c.mixup.beta_param;
  j["batch_size"] = c.batch_size;
  j["epochs"] = c.epochs;
  j["seed"] = c.seed;
  j["folds"] = c.folds;
  j["aggregation"] = to_string(c.aggregation);
  j["cache_dir"] = c.cache_dir;
  j["eval_every"] = c.eval_every;
  return j;
}

TrainConfig config_from_json(const json& j) {
  TrainConfig c;
  c.feature.sample_rate = j.at("sample_rate").get<uint32_t>();
  c.feature.window_s = j.at("window_s").get<double>();
  c.feature.hop_s = j.at("hop_s").get<double>();
  c.feature.fft_size = j.at("fft_size").get<int>();
  c.feature.n_mels = j.at("n_mels").get<int>();
  c.feature.fmin = j.at("fmin").get<double>();
  c.feature.fmax = j.at("fmax").get<double>();
  c.feature.log_floor = j.at("log_floor").get<double>();
  c.feature.patch_frames = j.at("patch_frames").get<int>();
  c.network = j.at("network").get<std::string>();
  c.channel_mode = channel_mode_from_string(j.at("channel_mode").get<std::string>());
  c.optimizer.learning_rate = j.at("learning_rate").get<double>();
  c.optimizer.momentum = j.at("momentum").get<double>();
  c.optimizer.weight_decay = j.at("weight_decay").get<double>();
  c.optimizer.schedule = j.at("lr_schedule").get<std::string>() == "constant"
                             ? nn::LrSchedule::constant
                             : nn::LrSchedule::step;
  c.optimizer.step_factor = j.at("lr_step_factor").get<double>();
  c.optimizer.step_every = j.at("lr_step_every").get<int>();
  c.mixup.mode = mixup_mode_from_string(j.at("mixup_mode").get<std::string>());
  c.mixup.alpha = j.at("mixup_alpha").get<double>();
  c.mixup.beta_param = j.at("mixup_beta_param").get<double>();
  c.batch_size = j.at("batch_size").get<int>();
  c.epochs = j.at("epochs").get<int>();
  c.seed = j.at("seed").get<uint64_t>();
  c.folds = j.at("folds").get<int>();
  c.aggregation = aggregation_from_string(j.at("aggregation").get<std::string>());
  c.cache_dir = j.value("cache_dir", std::string());
  c.eval_every = j.at("eval_every").get<int>();
  return c;
}

}  // namespace

// --- FeatureStore -----------------------------------------------------------------

FeatureStore::FeatureStore(FeatureConfig config, std::string cache_dir)
    : config_(config), fb_(mel_filterbank(config)), cache_dir_(std::move(cache_dir)),
      fingerprint_(config.fingerprint()) {}

const LogMelTensor& FeatureStore::get(const std::string& clip_path) {
  if (auto it = memory_.find(clip_path); it != memory_.end()) return it->second;
  if (!cache_dir_.empty()) {
    if (auto hit = cache_try_read(cache_dir_, clip_path, fingerprint_))
      return memory_.emplace(clip_path, std::move(*hit)).first->second;
  }
  const AudioClip clip = read_wav(clip_path);
  LogMelTensor full = extract_features(clip, config_, fb_);
  if (!cache_dir_.empty()) cache_write(cache_dir_, clip_path, fingerprint_, full);
  return memory_.emplace(clip_path, std::move(full)).first->second;
}

// --- Training ----------------------------------------------------------------------

namespace {

struct ValClip {
  int class_id = 0;
  std::vector<LogMelTensor> patches;  // normalized, channel-selected
};

double evaluate_clips(nn::Network<float>& net, const std::vector<ValClip>& clips,
                      Aggregation strategy) {
  if (clips.empty()) return 0.0;
  int correct = 0;
  for (const ValClip& clip : clips) {
    const auto& spec = net.spec();
    nn::Tensor4<float> batch(static_cast<int>(clip.patches.size()), spec.in_c, spec.in_h,
                             spec.in_w);
    for (size_t p = 0; p < clip.patches.size(); ++p)
      std::copy(clip.patches[p].v.begin(), clip.patches[p].v.end(),
                batch.v.begin() + static_cast<size_t>(p) * clip.patches[p].v.size());
    const nn::Tensor4<float> probs = net.forward(batch, nn::Mode::eval, nullptr);
    std::vector<std::vector<double>> pp(clip.patches.size());
    for (size_t p = 0; p < clip.patches.size(); ++p) {
      pp[p].resize(static_cast<size_t>(probs.c));
      for (int c = 0; c < probs.c; ++c)
        pp[p][c] = static_cast<double>(probs.at(static_cast<int>(p), c, 0, 0));
    }
    if (aggregate_clip(pp, strategy).label == clip.class_id) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(clips.size());
}

int label_argmax(const std::vector<float>& label) {
  int best = 0;
  for (int i = 1; i < static_cast<int>(label.size()); ++i)
    if (label[i] > label[best]) best = i;
  return best;
}

FoldTrainResult train_on_indices(const Manifest& manifest, const std::vector<int>& train_idx,
                                 const std::vector<int>& val_idx, int fold_id,
                                 const TrainConfig& config, FeatureStore& store) {
  if (train_idx.empty()) throw DataError("train_fold: no training clips");

  // Features for the training folds; normalization statistics come from
  // these patches only.
  std::vector<LogMelTensor> train_patches;
  std::vector<int> train_patch_class;
  for (int idx : train_idx) {
    const ManifestEntry& e = manifest.entries[static_cast<size_t>(idx)];
    const LogMelTensor& full = store.get(e.path);
    for (LogMelTensor& p : extract_patches(full, config.feature.patch_frames)) {
      train_patches.push_back(std::move(p));
      train_patch_class.push_back(e.class_id);
    }
  }
  const NormStats stats = compute_norm_stats(train_patches);

  std::vector<LabeledExample> examples;
  examples.reserve(train_patches.size());
  for (size_t i = 0; i < train_patches.size(); ++i) {
    LabeledExample ex;
    ex.features = select_channels(normalize(train_patches[i], stats), config.channel_mode);
    ex.label = one_hot_label(train_patch_class[i]);
    examples.push_back(std::move(ex));
  }
  train_patches.clear();
  train_patches.shrink_to_fit();

  std::vector<ValClip> val_clips;
  for (int idx : val_idx) {
    const ManifestEntry& e = manifest.entries[static_cast<size_t>(idx)];
    ValClip vc;
    vc.class_id = e.class_id;
    for (const LogMelTensor& p : extract_patches(store.get(e.path), config.feature.patch_frames))
      vc.patches.push_back(select_channels(normalize(p, stats), config.channel_mode));
    val_clips.push_back(std::move(vc));
  }

  const int in_c = channel_count(config.channel_mode);
  const nn::NetworkSpec spec = nn::make_preset(config.network, in_c, config.feature.n_mels,
                                               config.feature.patch_frames, kNumClasses);
  nn::Network<float> net =
      nn::Network<float>::init(spec, Rng(config.seed).fork(0x171ull, static_cast<uint64_t>(fold_id)).seed());
  net.norm_stats() = stats;
  nn::SgdOptimizer<float> optimizer;

  FoldTrainResult result;
  result.record.fold = fold_id;

  const size_t n = examples.size();
  std::vector<size_t> order(n);
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), size_t{0});
    Rng shuffle_rng = Rng(config.seed).fork(0x5f1eull, static_cast<uint64_t>(fold_id),
                                            static_cast<uint64_t>(epoch));
    shuffle_rng.shuffle(order);
    Rng mixup_rng = Rng(config.seed).fork(0xa1faull, static_cast<uint64_t>(fold_id),
                                          static_cast<uint64_t>(epoch));

    double loss_sum = 0.0;
    long correct = 0;
    long seen = 0;
    int batch_index = 0;
    for (size_t pos = 0; pos < n; pos += static_cast<size_t>(config.batch_size), ++batch_index) {
      const size_t bs = std::min(static_cast<size_t>(config.batch_size), n - pos);
      if (bs < 2 && n >= 2) break;  // drop the undersized trailing batch

      std::vector<LabeledExample> batch;
      batch.reserve(bs);
      for (size_t i = 0; i < bs; ++i) batch.push_back(examples[order[pos + i]]);
      if (config.mixup.mode != MixupMode::off)
        batch = mixup_batch(batch, config.mixup, mixup_rng);

      nn::Tensor4<float> x(static_cast<int>(bs), in_c, spec.in_h, spec.in_w);
      std::vector<std::vector<float>> targets(bs);
      for (size_t i = 0; i < bs; ++i) {
        std::copy(batch[i].features.v.begin(), batch[i].features.v.end(),
                  x.v.begin() + static_cast<size_t>(i) * batch[i].features.v.size());
        targets[i] = batch[i].label;
      }

      nn::ForwardCache<float> cache;
      const nn::Tensor4<float> probs = net.forward(x, nn::Mode::train, &cache);
      nn::Tensor4<float> grad_logits;
      const float loss = nn::softmax_cross_entropy(cache.logits, targets, &grad_logits);
      if (!std::isfinite(loss))
        throw NumericError("train: non-finite loss at epoch " + std::to_string(epoch) +
                           ", batch " + std::to_string(batch_index));
      const nn::Gradients<float> grads = net.backward(cache, grad_logits);
      optimizer.step(net, grads, config.optimizer, epoch);

      loss_sum += static_cast<double>(loss) * static_cast<double>(bs);
      seen += static_cast<long>(bs);
      for (size_t i = 0; i < bs; ++i) {
        int pred = 0;
        for (int c = 1; c < probs.c; ++c)
          if (probs.at(static_cast<int>(i), c, 0, 0) > probs.at(static_cast<int>(i), pred, 0, 0))
            pred = c;
        if (pred == label_argmax(targets[i])) ++correct;
      }
    }
    result.record.train_loss.push_back(loss_sum / static_cast<double>(seen));
    result.record.train_acc.push_back(static_cast<double>(correct) / static_cast<double>(seen));

    const bool last_epoch = epoch == config.epochs - 1;
    const bool scheduled = config.eval_every > 0 && (epoch + 1) % config.eval_every == 0;
    if (!val_clips.empty() && (scheduled || last_epoch))
      result.record.val_acc.push_back(evaluate_clips(net, val_clips, config.aggregation));
  }

  if (!result.record.val_acc.empty()) result.record.final_val_acc = result.record.val_acc.back();
  result.model = std::move(net);
  return result;
}

}  // namespace

FoldTrainResult train_fold(const Manifest& manifest, const FoldPlan& plan, int fold_index,
                           const TrainConfig& config, FeatureStore* store) {
  if (fold_index < 0 || fold_index >= plan.k)
    throw DataError("train_fold: fold index " + std::to_string(fold_index) + " out of range");
  std::vector<int> train_idx;
  for (int f = 0; f < plan.k; ++f)
    if (f != fold_index)
      train_idx.insert(train_idx.end(), plan.folds[f].begin(), plan.folds[f].end());
  std::sort(train_idx.begin(), train_idx.end());
  std::vector<int> val_idx = plan.folds[static_cast<size_t>(fold_index)];
  std::sort(val_idx.begin(), val_idx.end());

  // The degenerate k=1 plan trains and validates on the same clips; it is
  // allowed for smoke tests and flagged by fold count in the record.
  if (plan.k == 1) train_idx = val_idx;

  if (store != nullptr) return train_on_indices(manifest, train_idx, val_idx, fold_index, config, *store);
  FeatureStore local(config.feature, config.cache_dir);
  return train_on_indices(manifest, train_idx, val_idx, fold_index, config, local);
}

RunRecord run_cross_validation(const Manifest& manifest, const TrainConfig& config,
                               const CrossValidationOptions& options) {
  config.validate();
  if (manifest.entries.empty()) throw DataError("run_cross_validation: empty manifest");
  const auto t0 = std::chrono::steady_clock::now();

  RunRecord record;
  record.network = config.network;
  record.channel_mode = to_string(config.channel_mode);
  record.mixup_mode = to_string(config.mixup.mode);
  record.mixup_alpha = config.mixup.mode == MixupMode::fixed ? config.mixup.alpha : 0.0;
  record.mixup_beta_param = config.mixup.mode == MixupMode::beta ? config.mixup.beta_param : 0.0;
  record.seed = config.seed;
  record.config = config;
  record.train_on_all_folds = options.train_on_all_folds;

  FeatureStore store(config.feature, config.cache_dir);
  namespace fs = std::filesystem;
  if (!options.out_dir.empty()) fs::create_directories(options.out_dir);

  std::vector<nn::Network<float>> models;
  if (options.train_on_all_folds) {
    std::vector<int> all(manifest.size());
    std::iota(all.begin(), all.end(), 0);
    // no held-back validation fold in this mode
    FoldTrainResult r = train_on_indices(manifest, all, {}, 0, config, store);
    record.folds.push_back(r.record);
    models.push_back(std::move(r.model));
    if (!options.out_dir.empty()) {
      nn::Checkpoint ckpt{std::move(models.back()), config.feature, config.channel_mode};
      save_checkpoint(ckpt, (fs::path(options.out_dir) / "model_all.ckpt").string());
      models.back() = std::move(ckpt.network);
    }
  } else {
    FoldPlan plan;
    if (!options.fold_plan_path.empty()) {
      std::string warning;
      plan = load_fold_plan(options.fold_plan_path, manifest, &warning);
      if (!warning.empty())
        fprintf(stderr, "warning: fold plan: %s (external splits honored)\n", warning.c_str());
    } else {
      plan = make_folds(manifest, config.folds, config.seed);
    }

    double sum = 0.0;
    for (int f = 0; f < plan.k; ++f) {
      FoldTrainResult r = train_fold(manifest, plan, f, config, &store);
      sum += r.record.final_val_acc;
      record.folds.push_back(r.record);
      models.push_back(std::move(r.model));
      if (!options.out_dir.empty()) {
        nn::Checkpoint ckpt{std::move(models.back()), config.feature, config.channel_mode};
        save_checkpoint(ckpt,
                        (fs::path(options.out_dir) / ("fold_" + std::to_string(f) + ".ckpt")).string());
        models.back() = std::move(ckpt.network);
      }
    }
    record.cv_mean = sum / static_cast<double>(plan.k);
  }

  if (!options.eval_manifest_path.empty()) {
    const Manifest eval_manifest = load_manifest(options.eval_manifest_path);
    double sum = 0.0;
    for (nn::Network<float>& model : models) {
      nn::Checkpoint ckpt{std::move(model), config.feature, config.channel_mode};
      sum += score_manifest(ckpt, eval_manifest, config.aggregation, config.cache_dir)
                 .metrics.overall_accuracy;
      model = std::move(ckpt.network);
    }
    record.eval_accuracy = sum / static_cast<double>(models.size());
  }

  record.wall_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  if (!options.out_dir.empty())
    write_file_atomic((fs::path(options.out_dir) / "run_record.jsonl").string(),
                      record.to_json_line() + "\n");
  return record;
}

// --- RunRecord serialization ---------------------------------------------------------

std::string RunRecord::to_json_line() const {
  json j;
  j["schema"] = 1;
  j["network"] = network;
  j["channel_mode"] = channel_mode;
  j["mixup_mode"] = mixup_mode;
  j["mixup_alpha"] = mixup_alpha;
  j["mixup_beta_param"] = mixup_beta_param;
  j["seed"] = seed;
  j["config"] = config_to_json(config);
  j["train_on_all_folds"] = train_on_all_folds;
  json folds_j = json::array();
  for (const FoldRecord& f : folds) {
    json fj;
    fj["fold"] = f.fold;
    fj["train_loss"] = f.train_loss;
    fj["train_acc"] = f.train_acc;
    fj["val_acc"] = f.val_acc;
    fj["final_val_acc"] = f.final_val_acc;
    folds_j.push_back(fj);
  }
  j["folds"] = folds_j;
  if (cv_mean) j["cv_mean"] = *cv_mean;
  if (eval_accuracy) j["eval_accuracy"] = *eval_accuracy;
  j["wall_s"] = wall_s;
  return j.dump();
}

RunRecord run_record_from_json_line(const std::string& line) {
  json j;
  try {
    j = json::parse(line);
  } catch (const json::exception& e) {
    throw DataError(std::string("run record: bad JSON: ") + e.what());
  }
  RunRecord r;
  r.network = j.at("network").get<std::string>();
  r.channel_mode = j.at("channel_mode").get<std::string>();
  r.mixup_mode = j.at("mixup_mode").get<std::string>();
  r.mixup_alpha = j.at("mixup_alpha").get<double>();
  r.mixup_beta_param = j.value("mixup_beta_param", 0.0);
  r.seed = j.at("seed").get<uint64_t>();
  r.config = config_from_json(j.at("config"));
  r.train_on_all_folds = j.value("train_on_all_folds", false);
  for (const json& fj : j.at("folds")) {
    FoldRecord f;
    f.fold = fj.at("fold").get<int>();
    f.train_loss = fj.at("train_loss").get<std::vector<double>>();
    f.train_acc = fj.at("train_acc").get<std::vector<double>>();
    f.val_acc = fj.at("val_acc").get<std::vector<double>>();
    f.final_val_acc = fj.at("final_val_acc").get<double>();
    r.folds.push_back(std::move(f));
  }
  if (j.contains("cv_mean")) r.cv_mean = j.at("cv_mean").get<double>();
  if (j.contains("eval_accuracy")) r.eval_accuracy = j.at("eval_accuracy").get<double>();
  r.wall_s = j.value("wall_s", 0.0);
  return r;
}

std::vector<RunRecord> load_run_records(const std::vector<std::string>& paths) {
  std::vector<RunRecord> records;
  for (const std::string& path : paths) {
    const std::string text = read_file(path);
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
      const std::string s = strip_ws(line);
      if (s.empty()) continue;
      records.push_back(run_record_from_json_line(s));
    }
  }
  return records;
}

// --- Comparison ---------------------------------------------------------------------

ComparisonTable compare_runs(const std::vector<RunRecord>& records) {
  if (records.size() < 2) throw DataError("compare_runs: need at least 2 records");
  ComparisonTable table;
  for (const RunRecord& r : records) {
    ComparisonRow row;
    row.network = r.network;
    row.channel_mode = r.channel_mode;
    row.mixup_mode = r.mixup_mode;
    row.alpha = r.mixup_alpha;
    row.seed = r.seed;
    row.cv_mean = r.cv_mean;
    row.eval_accuracy = r.eval_accuracy;
    table.rows.push_back(std::move(row));
  }
  std::stable_sort(table.rows.begin(), table.rows.end(),
                   [](const ComparisonRow& a, const ComparisonRow& b) {
                     if (a.network != b.network) return a.network < b.network;
                     if (a.channel_mode != b.channel_mode) return a.channel_mode < b.channel_mode;
                     return a.alpha < b.alpha;
                   });
  return table;
}

std::string ComparisonTable::to_table() const {
  std::ostringstream out;
  out << std::left << std::setw(18) << "network" << std::setw(10) << "channels" << std::setw(8)
      << "alpha" << std::setw(12) << "cv_acc" << std::setw(12) << "eval_acc" << "\n";
  for (const ComparisonRow& r : rows) {
    out << std::left << std::setw(18) << r.network << std::setw(10) << r.channel_mode;
    std::ostringstream a;
    a << std::fixed << std::setprecision(2) << r.alpha;
    out << std::setw(8) << a.str();
    auto cell = [](const std::optional<double>& v) {
      if (!v) return std::string("-");
      std::ostringstream s;
      s << std::fixed << std::setprecision(4) << *v;
      return s.str();
    };
    out << std::setw(12) << cell(r.cv_mean) << std::setw(12) << cell(r.eval_accuracy) << "\n";
  }
  return out.str();
}

std::string ComparisonTable::to_json() const {
  json rows_j = json::array();
  for (const ComparisonRow& r : rows) {
    json j;
    j["network"] = r.network;
    j["channel_mode"] = r.channel_mode;
    j["mixup_mode"] = r.mixup_mode;
    j["alpha"] = r.alpha;
    j["seed"] = r.seed;
    if (r.cv_mean) j["cv_mean"] = *r.cv_mean;
    if (r.eval_accuracy) j["eval_accuracy"] = *r.eval_accuracy;
    rows_j.push_back(j);
  }
  return json{{"comparison", rows_j}}.dump(2);
}

// --- Synthetic corpus ---------------------------------------------------------------

Manifest synth_corpus(const SynthCorpusOptions& options) {
  if (options.out_dir.empty()) throw DataError("synth_corpus: out_dir required");
  if (options.clips_per_class < 1) throw DataError("synth_corpus: clips_per_class must be >= 1");
  if (options.location_group_size < 1)
    throw DataError("synth_corpus: location_group_size must be >= 1");

  namespace fs = std::filesystem;
  const fs::path audio_dir = fs::path(options.out_dir) / "audio";
  fs::create_directories(audio_dir);

  Manifest manifest;
  const Rng base(options.seed);
  for (int c = 0; c < kNumClasses; ++c) {
    std::string token(scene_name(c));
    std::replace(token.begin(), token.end(), '/', '-');
    for (int j = 0; j < options.clips_per_class; ++j) {
      const uint64_t clip_seed =
          base.fork(0xC11Full, static_cast<uint64_t>(c), static_cast<uint64_t>(j)).seed();
      AudioClip clip =
          synthesize_scene(c, clip_seed, options.duration_s, options.sample_rate);

      // Location-level gain: clips recorded at one location share it.
      const int group = j / options.location_group_size;
      Rng loc_rng = base.fork(0x10Cull, static_cast<uint64_t>(c), static_cast<uint64_t>(group));
      const auto gain = static_cast<float>(0.85 + 0.15 * loc_rng.uniform());
      for (auto& channel : clip.samples)
        for (float& s : channel) s *= gain;

      std::ostringstream name;
      name << token << "_" << std::setw(3) << std::setfill('0') << j << ".wav";
      const std::string path = (audio_dir / name.str()).string();
      write_wav(clip, path, options.bit_depth);

      ManifestEntry entry;
      entry.path = path;
      entry.class_id = c;
      entry.location = token + ".loc" + std::to_string(group);
      manifest.entries.push_back(std::move(entry));
    }
  }
  save_manifest(manifest, (fs::path(options.out_dir) / "manifest.tsv").string());
  return manifest;
}

}  // namespace asc
