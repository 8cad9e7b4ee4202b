#pragma once

#include <string>

#include "pgmel/data.hpp"

namespace pgmel {

/// Synthetic dataset recipe. Entities live in clusters: cluster members share
/// a feature centroid (small per-entity offsets) and carry names that are
/// small edit perturbations of a shared base name, so edit-distance candidate
/// sets surface the confusable peers. Mentions are their gold entity's
/// features plus Gaussian noise, with an edit-perturbed surface form.
struct SyntheticSpec {
  std::string preset = "separable";  // "separable" or "confusable"
  int num_entities = 500;
  int num_clusters = 500;
  int mentions_per_entity = 4;
  double sigma = 0.35;  // feature noise, also the scale for cluster offsets
  int name_len = 10;
  int name_edits = 1;  // edits applied to the gold name per mention surface
  int token_count = 6;
  int feature_dim = 64;
  uint64_t seed = 0;

  void validate() const;
  Json to_json() const;
  static SyntheticSpec from_json(const Json& j);

  /// One entity per cluster; within-noise ranking suffices.
  static SyntheticSpec separable();
  /// Five entities per cluster; peers are only separable through the
  /// within-cluster offsets, which alternate between modalities per cluster.
  static SyntheticSpec confusable();
};

Dataset generate_synthetic(const SyntheticSpec& spec);

/// Cluster index encoded in synthetic entity ids ("c007_e02" -> 7).
int synthetic_cluster_of(const std::string& entity_id);

}  // namespace pgmel
