#include "asc/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <sstream>

#include "asc/dsp.hpp"

namespace asc {

Aggregation aggregation_from_string(const std::string& s) {
  if (s == "max") return Aggregation::max;
  if (s == "mean") return Aggregation::mean;
  if (s == "median") return Aggregation::median;
  if (s == "majority") return Aggregation::majority;
  if (s == "max_patch") return Aggregation::max_patch;
  throw DataError("unknown aggregation strategy: \"" + s +
                  "\" (max, mean, median, majority, max_patch)");
}

std::string to_string(Aggregation strategy) {
  switch (strategy) {
    case Aggregation::max: return "max";
    case Aggregation::mean: return "mean";
    case Aggregation::median: return "median";
    case Aggregation::majority: return "majority";
    case Aggregation::max_patch: return "max_patch";
  }
  return "max";
}

namespace {

int argmax_lowest(const std::vector<double>& v) {
  int best = 0;
  for (int i = 1; i < static_cast<int>(v.size()); ++i)
    if (v[i] > v[best]) best = i;
  return best;
}

}  // namespace

ClipAggregate aggregate_clip(const std::vector<std::vector<double>>& patch_probs,
                             Aggregation strategy) {
  if (patch_probs.empty()) throw DataError("aggregate_clip: no patches");
  const int nc = static_cast<int>(patch_probs[0].size());
  for (const auto& p : patch_probs)
    if (static_cast<int>(p.size()) != nc)
      throw DataError("aggregate_clip: patch probability lengths differ");

  ClipAggregate out;
  out.score.assign(static_cast<size_t>(nc), 0.0);

  switch (strategy) {
    case Aggregation::max: {
      for (int c = 0; c < nc; ++c) {
        double m = patch_probs[0][c];
        for (const auto& p : patch_probs) m = std::max(m, p[c]);
        out.score[c] = m;
      }
      out.label = argmax_lowest(out.score);
      break;
    }
    case Aggregation::mean: {
      for (const auto& p : patch_probs)
        for (int c = 0; c < nc; ++c) out.score[c] += p[c];
      for (int c = 0; c < nc; ++c) out.score[c] /= static_cast<double>(patch_probs.size());
      out.label = argmax_lowest(out.score);
      break;
    }
    case Aggregation::median: {
      std::vector<double> col(patch_probs.size());
      for (int c = 0; c < nc; ++c) {
        for (size_t p = 0; p < patch_probs.size(); ++p) col[p] = patch_probs[p][c];
        std::sort(col.begin(), col.end());
        const size_t n = col.size();
        out.score[c] = n % 2 == 1 ? col[n / 2] : 0.5 * (col[n / 2 - 1] + col[n / 2]);
      }
      out.label = argmax_lowest(out.score);
      break;
    }
    case Aggregation::majority: {
      for (const auto& p : patch_probs) out.score[argmax_lowest(p)] += 1.0;
      out.label = argmax_lowest(out.score);
      for (int c = 0; c < nc; ++c) out.score[c] /= static_cast<double>(patch_probs.size());
      break;
    }
    case Aggregation::max_patch: {
      size_t best_patch = 0;
      int best_class = 0;
      double best = patch_probs[0][0];
      for (size_t p = 0; p < patch_probs.size(); ++p)
        for (int c = 0; c < nc; ++c)
          if (patch_probs[p][c] > best) {
            best = patch_probs[p][c];
            best_patch = p;
            best_class = c;
          }
      out.label = best_class;
      out.score = patch_probs[best_patch];
      break;
    }
  }
  return out;
}

MetricsReport metrics_from_pairs(const std::vector<std::pair<int, int>>& pairs, int n_classes) {
  MetricsReport r;
  r.confusion.assign(static_cast<size_t>(n_classes), std::vector<int>(n_classes, 0));
  r.per_class_accuracy.assign(static_cast<size_t>(n_classes), 0.0);
  r.total_clips = static_cast<int>(pairs.size());

  int correct = 0;
  for (const auto& [truth, pred] : pairs) {
    if (truth < 0 || truth >= n_classes || pred < 0 || pred >= n_classes)
      throw DataError("metrics: class id out of range");
    r.confusion[truth][pred]++;
    if (truth == pred) ++correct;
  }
  r.overall_accuracy = pairs.empty() ? 0.0 : static_cast<double>(correct) / pairs.size();
  for (int c = 0; c < n_classes; ++c) {
    int row = 0;
    for (int j = 0; j < n_classes; ++j) row += r.confusion[c][j];
    r.per_class_accuracy[c] = row > 0 ? static_cast<double>(r.confusion[c][c]) / row : 0.0;
  }
  return r;
}

std::string MetricsReport::to_table() const {
  std::ostringstream out;
  out << std::fixed << std::setprecision(4);
  out << "overall accuracy: " << overall_accuracy << "  (" << total_clips << " clips)\n";
  out << "per-class accuracy:\n";
  for (size_t c = 0; c < per_class_accuracy.size(); ++c) {
    int row = 0;
    for (int n : confusion[c]) row += n;
    out << "  " << std::left << std::setw(18) << scene_name(static_cast<int>(c)) << std::right
        << std::setprecision(4) << per_class_accuracy[c] << "  (" << row << " clips)\n";
  }
  return out.str();
}

std::vector<std::vector<double>> predict_clip_patches(nn::Checkpoint& checkpoint,
                                                      const AudioClip& clip) {
  const MelFilterbank fb = mel_filterbank(checkpoint.feature);
  const LogMelTensor full = extract_features(clip, checkpoint.feature, fb);
  const std::vector<LogMelTensor> patches = extract_patches(full, checkpoint.feature.patch_frames);

  const int in_c = channel_count(checkpoint.channel_mode);
  const nn::NetworkSpec& spec = checkpoint.network.spec();
  if (spec.in_c != in_c)
    throw DataError("predict: checkpoint channel mode disagrees with the network spec");

  nn::Tensor4<float> batch(static_cast<int>(patches.size()), in_c, spec.in_h, spec.in_w);
  for (size_t p = 0; p < patches.size(); ++p) {
    const LogMelTensor norm = normalize(patches[p], checkpoint.network.norm_stats());
    const LogMelTensor sel = select_channels(norm, checkpoint.channel_mode);
    if (sel.n_mels != spec.in_h || sel.frames != spec.in_w)
      throw DataError("predict: feature shape does not match the network input");
    std::copy(sel.v.begin(), sel.v.end(),
              batch.v.begin() + static_cast<size_t>(p) * sel.v.size());
  }

  const nn::Tensor4<float> probs = checkpoint.network.forward(batch, nn::Mode::eval, nullptr);
  std::vector<std::vector<double>> out(patches.size());
  for (size_t p = 0; p < patches.size(); ++p) {
    out[p].resize(static_cast<size_t>(probs.c));
    for (int c = 0; c < probs.c; ++c)
      out[p][c] = static_cast<double>(probs.at(static_cast<int>(p), c, 0, 0));
  }
  return out;
}

ScoreResult score_manifest(nn::Checkpoint& checkpoint, const Manifest& manifest,
                           Aggregation strategy, const std::string& cache_dir) {
  const MelFilterbank fb = mel_filterbank(checkpoint.feature);
  const uint64_t feat_fp = checkpoint.feature.fingerprint();

  ScoreResult result;
  std::vector<std::pair<int, int>> pairs;
  pairs.reserve(manifest.size());

  for (const ManifestEntry& entry : manifest.entries) {
    LogMelTensor full;
    bool cached = false;
    if (!cache_dir.empty()) {
      if (auto hit = cache_try_read(cache_dir, entry.path, feat_fp)) {
        full = std::move(*hit);
        cached = true;
      }
    }
    if (!cached) {
      const AudioClip clip = read_wav(entry.path);
      full = extract_features(clip, checkpoint.feature, fb);
      if (!cache_dir.empty()) cache_write(cache_dir, entry.path, feat_fp, full);
    }

    const std::vector<LogMelTensor> patches =
        extract_patches(full, checkpoint.feature.patch_frames);
    const int in_c = channel_count(checkpoint.channel_mode);
    const nn::NetworkSpec& spec = checkpoint.network.spec();

    nn::Tensor4<float> batch(static_cast<int>(patches.size()), in_c, spec.in_h, spec.in_w);
    for (size_t p = 0; p < patches.size(); ++p) {
      const LogMelTensor norm = normalize(patches[p], checkpoint.network.norm_stats());
      const LogMelTensor sel = select_channels(norm, checkpoint.channel_mode);
      std::copy(sel.v.begin(), sel.v.end(),
                batch.v.begin() + static_cast<size_t>(p) * sel.v.size());
    }
    const nn::Tensor4<float> probs = checkpoint.network.forward(batch, nn::Mode::eval, nullptr);

    ClipPrediction pred;
    pred.clip_path = entry.path;
    pred.true_class = entry.class_id;
    pred.strategy = strategy;
    pred.patch_probabilities.resize(patches.size());
    for (size_t p = 0; p < patches.size(); ++p) {
      pred.patch_probabilities[p].resize(static_cast<size_t>(probs.c));
      for (int c = 0; c < probs.c; ++c)
        pred.patch_probabilities[p][c] = static_cast<double>(probs.at(static_cast<int>(p), c, 0, 0));
    }
    const ClipAggregate agg = aggregate_clip(pred.patch_probabilities, strategy);
    pred.predicted_class = agg.label;
    pred.score = agg.score;

    pairs.emplace_back(entry.class_id, agg.label);
    result.predictions.push_back(std::move(pred));
  }

  result.metrics = metrics_from_pairs(pairs, checkpoint.network.spec().n_classes);
  return result;
}

}  // namespace asc
