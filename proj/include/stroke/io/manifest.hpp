#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "stroke/core/types.hpp"

namespace stroke::io {

// Dataset index: {dataset_name, seed, label_schema:[{id,name}],
// cases:[{case_id, image, mask?, fold?, split?}]}. Relative paths resolve
// against the manifest's directory.
struct DatasetManifest {
  std::string dataset_name;
  std::uint64_t seed = 0;
  LabelSchema label_schema;
  std::vector<CaseRecord> cases;
  std::filesystem::path base_dir;

  std::filesystem::path resolve(const std::filesystem::path& p) const {
    return p.is_absolute() ? p : base_dir / p;
  }
  const CaseRecord* find(const std::string& case_id) const;
  void validate(bool check_files = true) const;
};

DatasetManifest load_manifest(const std::filesystem::path& path, bool check_files = true);
void save_manifest(const DatasetManifest& manifest, const std::filesystem::path& path);

// Deterministic k-fold assignment: case ids sorted lexicographically,
// shuffled by one SplitMix64 Fisher-Yates pass seeded with `seed`, then dealt
// round-robin. Fold sizes differ by at most one and the result depends only
// on the id set and the seed, not on input order.
DatasetManifest assign_folds(const DatasetManifest& manifest, int k, std::uint64_t seed);

}  // namespace stroke::io
