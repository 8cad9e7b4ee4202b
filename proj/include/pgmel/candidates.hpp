#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace pgmel {

/// Per-mention shortlist of entities picked by surface-form edit distance.
/// Entries stay sorted ascending by (distance, entity_id).
struct CandidateSet {
  struct Entry {
    std::string entity_id;
    int distance = 0;
  };
  std::string mention_id;
  std::vector<Entry> entries;
  bool gold_injected = false;

  bool contains(const std::string& entity_id) const;
};

/// Levenshtein distance with unit costs over Unicode scalar values,
/// case-folded first (ASCII fold).
int edit_distance(const std::string& a, const std::string& b);

/// The C entities closest to the mention surface; ties broken by ascending
/// entity id. Deterministic in the entity iteration order.
CandidateSet generate_candidates(const std::string& mention_surface,
                                 const std::map<std::string, std::string>& entity_names,
                                 int max_candidates);

/// Training-only: guarantees the gold entity is present by evicting the
/// worst-ranked entry. Never used on the evaluation path.
CandidateSet ensure_gold(CandidateSet set, const std::string& gold_id,
                         const std::string& gold_name, const std::string& mention_surface);

}  // namespace pgmel
