#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "pgmel/candidates.hpp"
#include "pgmel/data.hpp"
#include "pgmel/scoring.hpp"

namespace pgmel {

struct LinkResult {
  std::string mention_id;
  std::vector<ScoredCandidate> ranking;  // descending phi, ties by ascending id
  std::string gold_id;
  std::optional<int> gold_rank;  // 1-based; nullopt when gold is not a candidate
};

/// Scores and ranks a prepared candidate set with the discriminator.
/// Asserts on every call that ranking by phi equals ranking by psi.
LinkResult link_against(const FeatureRecord& mention, const CandidateSet& candidates,
                        const Dataset& ds, ModelParams& disc, const EncoderConfig& cfg);

/// Full inference for one mention: edit-distance candidates (no gold
/// injection), scoring, ranking.
LinkResult link(const FeatureRecord& mention, const Dataset& ds, ModelParams& disc,
                const EncoderConfig& cfg, int max_candidates);

/// Fraction of mentions whose gold rank is <= k, per requested k.
std::map<int, double> top_k_accuracy(std::span<const LinkResult> results,
                                     std::span<const int> ks);

void write_link_results_csv(const std::string& path, std::span<const LinkResult> results);
void write_topk_csv(const std::string& path, const std::map<int, double>& accuracy,
                    const std::string& split_name);

}  // namespace pgmel
