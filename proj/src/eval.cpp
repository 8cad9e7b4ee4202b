#include "pgmel/eval.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>

namespace pgmel {

namespace {

bool rank_by_phi(const ScoredCandidate& a, const ScoredCandidate& b) {
  if (a.phi != b.phi) return a.phi > b.phi;
  return a.entity_id < b.entity_id;
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.10g", v);
  return buf;
}

}  // namespace

LinkResult link_against(const FeatureRecord& mention, const CandidateSet& candidates,
                        const Dataset& ds, ModelParams& disc, const EncoderConfig& cfg) {
  LinkResult res;
  res.mention_id = mention.id;
  res.gold_id = mention.gold_id;
  if (candidates.entries.empty()) return res;

  std::vector<const FeatureRecord*> records;
  records.reserve(candidates.entries.size());
  for (const auto& e : candidates.entries) records.push_back(&ds.entity(e.entity_id));

  res.ranking = score_candidates(mention, records, disc, cfg);
  std::sort(res.ranking.begin(), res.ranking.end(), rank_by_phi);

  // sigmoid is monotone, so psi must be nonincreasing along the phi ranking;
  // equal phi with distinct psi is possible (sigmoid rounds away low bits)
  for (size_t i = 1; i < res.ranking.size(); ++i) {
    const ScoredCandidate& hi = res.ranking[i - 1];
    const ScoredCandidate& lo = res.ranking[i];
    if (hi.phi != lo.phi && hi.psi <= lo.psi) {
      throw NumericFault("phi/psi ranking disagreement at " + mention.id);
    }
  }

  for (size_t i = 0; i < res.ranking.size(); ++i) {
    if (res.ranking[i].entity_id == res.gold_id) {
      res.gold_rank = static_cast<int>(i) + 1;
      break;
    }
  }
  return res;
}

LinkResult link(const FeatureRecord& mention, const Dataset& ds, ModelParams& disc,
                const EncoderConfig& cfg, int max_candidates) {
  CandidateSet set =
      generate_candidates(mention.surface_name, ds.entity_names, max_candidates);
  return link_against(mention, set, ds, disc, cfg);
}

std::map<int, double> top_k_accuracy(std::span<const LinkResult> results,
                                     std::span<const int> ks) {
  if (results.empty()) throw ContractViolation("top_k_accuracy: no results");
  std::map<int, double> acc;
  for (int k : ks) {
    int hits = 0;
    for (const LinkResult& r : results) {
      if (r.gold_rank.has_value() && *r.gold_rank <= k) ++hits;
    }
    acc[k] = static_cast<double>(hits) / static_cast<double>(results.size());
  }
  return acc;
}

void write_link_results_csv(const std::string& path, std::span<const LinkResult> results) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path);
  out << "mention_id,gold_rank,top1_id,top1_phi\n";
  for (const LinkResult& r : results) {
    out << r.mention_id << ",";
    if (r.gold_rank.has_value()) {
      out << *r.gold_rank;
    } else {
      out << "absent";
    }
    if (!r.ranking.empty()) {
      out << "," << r.ranking[0].entity_id << "," << fmt(r.ranking[0].phi);
    } else {
      out << ",,";
    }
    out << "\n";
  }
}

void write_topk_csv(const std::string& path, const std::map<int, double>& accuracy,
                    const std::string& split_name) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path);
  out << "split,k,accuracy\n";
  for (const auto& [k, v] : accuracy) {
    out << split_name << "," << k << "," << fmt(v) << "\n";
  }
}

}  // namespace pgmel
