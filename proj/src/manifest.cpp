#include "asc/manifest.hpp"

#include <algorithm>
#include <map>
#include <set>
#include <sstream>

#include "asc/audio.hpp"

namespace asc {

namespace {

std::string strip(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  size_t b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

std::vector<std::string> split(const std::string& line, char delim) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == delim) {
      out.push_back(strip(cur));
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  out.push_back(strip(cur));
  return out;
}

}  // namespace

Manifest load_manifest(const std::string& path) {
  const std::string text = read_file(path);
  std::istringstream in(text);

  Manifest manifest;
  std::set<std::string> seen;
  char delim = 0;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string s = strip(line);
    if (s.empty() || s[0] == '#') continue;
    if (delim == 0) delim = s.find('\t') != std::string::npos ? '\t' : ',';
    const std::vector<std::string> fields = split(s, delim);
    if (fields.size() != 3)
      throw DataError(path + ":" + std::to_string(line_no) + ": expected 3 fields, got " +
                      std::to_string(fields.size()));
    ManifestEntry e;
    e.path = fields[0];
    try {
      e.class_id = scene_id(fields[1]);
    } catch (const DataError&) {
      throw DataError(path + ":" + std::to_string(line_no) + ": unknown scene class \"" +
                      fields[1] + "\"");
    }
    e.location = fields[2];
    if (e.path.empty())
      throw DataError(path + ":" + std::to_string(line_no) + ": empty clip path");
    if (e.location.empty())
      throw DataError(path + ":" + std::to_string(line_no) + ": empty location id");
    if (!seen.insert(e.path).second)
      throw DataError(path + ":" + std::to_string(line_no) + ": duplicate clip path \"" +
                      e.path + "\"");
    manifest.entries.push_back(std::move(e));
  }
  return manifest;
}

void save_manifest(const Manifest& manifest, const std::string& path) {
  std::ostringstream out;
  for (const ManifestEntry& e : manifest.entries)
    out << e.path << '\t' << scene_name(e.class_id) << '\t' << e.location << '\n';
  write_file_atomic(path, out.str());
}

void FoldPlan::validate(const Manifest& manifest, bool check_locations) const {
  if (k < 1 || static_cast<int>(folds.size()) != k)
    throw DataError("fold plan: fold count mismatch");
  std::vector<int> owner(manifest.size(), -1);
  for (int f = 0; f < k; ++f)
    for (int idx : folds[f]) {
      if (idx < 0 || idx >= static_cast<int>(manifest.size()))
        throw DataError("fold plan: clip index out of range");
      if (owner[idx] != -1) throw DataError("fold plan: clip assigned to two folds");
      owner[idx] = f;
    }
  for (size_t i = 0; i < owner.size(); ++i)
    if (owner[i] == -1)
      throw DataError("fold plan: clip \"" + manifest.entries[i].path +
                      "\" has no fold assignment");
  if (check_locations) {
    std::map<std::string, int> loc_fold;
    for (int f = 0; f < k; ++f)
      for (int idx : folds[f]) {
        const std::string& loc = manifest.entries[idx].location;
        auto [it, inserted] = loc_fold.emplace(loc, f);
        if (!inserted && it->second != f)
          throw DataError("fold plan: location \"" + loc + "\" appears in folds " +
                          std::to_string(it->second) + " and " + std::to_string(f));
      }
  }
}

FoldPlan make_folds(const Manifest& manifest, int k, uint64_t seed) {
  if (k < 1) throw DataError("make_folds: k must be >= 1");

  // A location's class is the class of its clips (the majority class when a
  // manifest mixes classes within a location).
  std::map<std::string, std::map<int, int>> loc_class_counts;
  std::map<std::string, std::vector<int>> loc_clips;
  for (size_t i = 0; i < manifest.size(); ++i) {
    const ManifestEntry& e = manifest.entries[i];
    loc_class_counts[e.location][e.class_id]++;
    loc_clips[e.location].push_back(static_cast<int>(i));
  }
  if (static_cast<int>(loc_clips.size()) < k)
    throw DataError("make_folds: only " + std::to_string(loc_clips.size()) +
                    " distinct locations for k=" + std::to_string(k));

  std::map<int, std::vector<std::string>> by_class;
  for (const auto& [loc, counts] : loc_class_counts) {
    int best_class = 0, best = -1;
    for (const auto& [cls, n] : counts)
      if (n > best) {
        best = n;
        best_class = cls;
      }
    by_class[best_class].push_back(loc);
  }

  Rng rng = Rng(seed).fork(0xF01D5ull);
  FoldPlan plan;
  plan.k = k;
  plan.folds.assign(static_cast<size_t>(k), {});
  int next_fold = 0;
  for (auto& [cls, locs] : by_class) {
    std::sort(locs.begin(), locs.end());
    rng.shuffle(locs);
    for (const std::string& loc : locs) {
      for (int idx : loc_clips[loc]) plan.folds[static_cast<size_t>(next_fold)].push_back(idx);
      next_fold = (next_fold + 1) % k;
    }
  }
  for (auto& fold : plan.folds) std::sort(fold.begin(), fold.end());
  plan.validate(manifest, true);
  return plan;
}

FoldPlan load_fold_plan(const std::string& path, const Manifest& manifest,
                        std::string* warning) {
  const std::string text = read_file(path);
  std::istringstream in(text);

  std::map<std::string, int> index_of;
  for (size_t i = 0; i < manifest.size(); ++i)
    index_of[manifest.entries[i].path] = static_cast<int>(i);

  std::map<int, std::vector<int>> folds;
  char delim = 0;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string s = line;
    s.erase(0, s.find_first_not_of(" \t\r\n"));
    if (s.empty() || s[0] == '#') continue;
    if (delim == 0) delim = s.find('\t') != std::string::npos ? '\t' : ',';
    const size_t pos = s.find(delim);
    if (pos == std::string::npos)
      throw DataError(path + ":" + std::to_string(line_no) + ": expected 2 fields");
    std::string clip = s.substr(0, pos);
    std::string fold_str = s.substr(pos + 1);
    clip.erase(clip.find_last_not_of(" \t\r\n") + 1);
    fold_str.erase(0, fold_str.find_first_not_of(" \t\r\n"));
    fold_str.erase(fold_str.find_last_not_of(" \t\r\n") + 1);

    const auto it = index_of.find(clip);
    if (it == index_of.end())
      throw DataError(path + ":" + std::to_string(line_no) + ": clip \"" + clip +
                      "\" is not in the manifest");
    int fold;
    try {
      fold = std::stoi(fold_str);
    } catch (...) {
      throw DataError(path + ":" + std::to_string(line_no) + ": bad fold index \"" +
                      fold_str + "\"");
    }
    if (fold < 0) throw DataError(path + ":" + std::to_string(line_no) + ": negative fold");
    folds[fold].push_back(it->second);
  }
  if (folds.empty()) throw DataError(path + ": empty fold plan");

  FoldPlan plan;
  plan.k = folds.rbegin()->first + 1;
  plan.folds.assign(static_cast<size_t>(plan.k), {});
  for (auto& [f, clips] : folds) {
    std::sort(clips.begin(), clips.end());
    plan.folds[static_cast<size_t>(f)] = std::move(clips);
  }
  plan.validate(manifest, false);

  if (warning != nullptr) {
    warning->clear();
    std::map<std::string, int> loc_fold;
    for (int f = 0; f < plan.k; ++f)
      for (int idx : plan.folds[f]) {
        const std::string& loc = manifest.entries[idx].location;
        auto [it, inserted] = loc_fold.emplace(loc, f);
        if (!inserted && it->second != f) {
          *warning = "location \"" + loc + "\" appears in folds " +
                     std::to_string(it->second) + " and " + std::to_string(f);
          return plan;
        }
      }
  }
  return plan;
}

void save_fold_plan(const FoldPlan& plan, const Manifest& manifest, const std::string& path) {
  std::ostringstream out;
  for (int f = 0; f < plan.k; ++f)
    for (int idx : plan.folds[f]) out << manifest.entries[idx].path << '\t' << f << '\n';
  write_file_atomic(path, out.str());
}

}  // namespace asc
