#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <unordered_map>
#include <vector>

#include "pgmel/config.hpp"
#include "pgmel/encoders.hpp"

namespace pgmel {

/// Load/save failure; the message names the offending file or record.
struct DataError : std::runtime_error {
  explicit DataError(const std::string& what) : std::runtime_error(what) {}
};

struct DatasetManifest {
  std::string name;
  int feature_dim = 0;
  std::string entity_file;   // relative to the manifest directory
  std::string mention_file;  // feature sidecars swap the extension for .feat
  std::array<double, 3> split = {0.7, 0.1, 0.2};  // train, validation, test
  uint64_t seed = 0;
  Json extra;  // provenance (e.g. the synthetic generator spec)
};

struct Dataset {
  DatasetManifest manifest;
  std::vector<FeatureRecord> entities;
  std::vector<FeatureRecord> mentions;
  std::unordered_map<std::string, size_t> entity_index;
  std::map<std::string, std::string> entity_names;  // id -> name, sorted
  std::vector<size_t> train_idx, validation_idx, test_idx;

  const FeatureRecord& entity(const std::string& id) const;
  const std::vector<size_t>& split_indices(const std::string& name) const;
};

struct SplitSizes {
  int64_t train = 0;
  int64_t validation = 0;
  int64_t test = 0;
};

/// Rounds train and validation counts to nearest; test takes the remainder.
SplitSizes split_sizes(int64_t n, const std::array<double, 3>& fractions);

/// Deterministic split membership: depends only on the seed and the set of
/// mention ids, not on file order.
void assign_splits(Dataset& ds);

Dataset load_dataset(const std::string& manifest_path);

/// Writes manifest + record files + feature sidecars into dir. Byte-stable:
/// identical datasets produce identical files.
void save_dataset(const Dataset& ds, const std::string& dir);

// Feature sidecar format: magic "PGMLFEAT", u32 version, u64 row count,
// u32 dim, then row-major float32 little-endian.
void write_feature_file(const std::string& path, const std::vector<Vec>& rows);
std::vector<Vec> read_feature_file(const std::string& path, int expect_dim);

}  // namespace pgmel
