#pragma once

#include <string>
#include <vector>

#include "asc/common.hpp"

namespace asc {

struct ManifestEntry {
  std::string path;
  int class_id = 0;
  std::string location;  // recording location, the leakage-control key
};

struct Manifest {
  std::vector<ManifestEntry> entries;

  size_t size() const { return entries.size(); }
};

// One record per line: clip_path, class_name, location_id. Tab- or
// comma-separated; the delimiter is detected from the first record and
// applied to the whole file.
Manifest load_manifest(const std::string& path);

void save_manifest(const Manifest& manifest, const std::string& path);

// k lists of clip indices partitioning the manifest.
struct FoldPlan {
  int k = 0;
  std::vector<std::vector<int>> folds;

  // Disjointness/coverage always enforced; the location check is the
  // leakage guarantee for generated plans.
  void validate(const Manifest& manifest, bool check_locations) const;
};

// Shuffle locations within each class deterministically and deal them
// round-robin, so no location straddles folds and per-class fold counts
// stay as balanced as round-robin permits.
FoldPlan make_folds(const Manifest& manifest, int k, uint64_t seed);

// External plans are authoritative: the partition invariant is enforced,
// and a location-leakage violation is reported through `warning` rather
// than rejected.
FoldPlan load_fold_plan(const std::string& path, const Manifest& manifest,
                        std::string* warning = nullptr);

void save_fold_plan(const FoldPlan& plan, const Manifest& manifest, const std::string& path);

}  // namespace asc
