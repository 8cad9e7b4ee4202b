#include "pgmel/candidates.hpp"

#include <algorithm>

#include "pgmel/tensor.hpp"

namespace pgmel {

namespace {

// UTF-8 decode to scalar values; malformed bytes decode as themselves so the
// distance stays total and deterministic on arbitrary input.
std::vector<uint32_t> decode_utf8(const std::string& s) {
  std::vector<uint32_t> out;
  out.reserve(s.size());
  size_t i = 0;
  while (i < s.size()) {
    unsigned char c = static_cast<unsigned char>(s[i]);
    int extra = 0;
    uint32_t cp = c;
    if (c >= 0xf0) {
      extra = 3;
      cp = c & 0x07;
    } else if (c >= 0xe0) {
      extra = 2;
      cp = c & 0x0f;
    } else if (c >= 0xc0) {
      extra = 1;
      cp = c & 0x1f;
    }
    if (extra > 0 && i + extra < s.size()) {
      bool ok = true;
      uint32_t acc = cp;
      for (int k = 1; k <= extra; ++k) {
        unsigned char cc = static_cast<unsigned char>(s[i + k]);
        if ((cc & 0xc0) != 0x80) {
          ok = false;
          break;
        }
        acc = (acc << 6) | (cc & 0x3f);
      }
      if (ok) {
        out.push_back(acc);
        i += extra + 1;
        continue;
      }
    }
    out.push_back(c);
    ++i;
  }
  return out;
}

uint32_t fold(uint32_t cp) {
  if (cp >= 'A' && cp <= 'Z') return cp + 32;
  return cp;
}

std::vector<uint32_t> folded(const std::string& s) {
  std::vector<uint32_t> cps = decode_utf8(s);
  for (auto& c : cps) c = fold(c);
  return cps;
}

int levenshtein(const std::vector<uint32_t>& a, const std::vector<uint32_t>& b) {
  const size_t n = b.size();
  std::vector<int> prev(n + 1), cur(n + 1);
  for (size_t j = 0; j <= n; ++j) prev[j] = static_cast<int>(j);
  for (size_t i = 1; i <= a.size(); ++i) {
    cur[0] = static_cast<int>(i);
    for (size_t j = 1; j <= n; ++j) {
      int sub = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
    }
    std::swap(prev, cur);
  }
  return prev[n];
}

}  // namespace

bool CandidateSet::contains(const std::string& entity_id) const {
  return std::any_of(entries.begin(), entries.end(),
                     [&](const Entry& e) { return e.entity_id == entity_id; });
}

int edit_distance(const std::string& a, const std::string& b) {
  return levenshtein(folded(a), folded(b));
}

CandidateSet generate_candidates(const std::string& mention_surface,
                                 const std::map<std::string, std::string>& entity_names,
                                 int max_candidates) {
  if (max_candidates < 1) throw ContractViolation("generate_candidates: C must be >= 1");
  if (entity_names.empty()) {
    throw ContractViolation("generate_candidates: empty entity collection");
  }
  std::vector<uint32_t> surface = folded(mention_surface);
  CandidateSet set;
  set.entries.reserve(entity_names.size());
  for (const auto& [id, name] : entity_names) {
    set.entries.push_back({id, levenshtein(surface, folded(name))});
  }
  auto by_rank = [](const CandidateSet::Entry& x, const CandidateSet::Entry& y) {
    return std::tie(x.distance, x.entity_id) < std::tie(y.distance, y.entity_id);
  };
  size_t keep = std::min(set.entries.size(), static_cast<size_t>(max_candidates));
  std::partial_sort(set.entries.begin(), set.entries.begin() + keep, set.entries.end(),
                    by_rank);
  set.entries.resize(keep);
  return set;
}

CandidateSet ensure_gold(CandidateSet set, const std::string& gold_id,
                         const std::string& gold_name, const std::string& mention_surface) {
  if (set.contains(gold_id)) return set;
  set.entries.pop_back();
  CandidateSet::Entry gold{gold_id, edit_distance(mention_surface, gold_name)};
  auto by_rank = [](const CandidateSet::Entry& x, const CandidateSet::Entry& y) {
    return std::tie(x.distance, x.entity_id) < std::tie(y.distance, y.entity_id);
  };
  set.entries.insert(
      std::upper_bound(set.entries.begin(), set.entries.end(), gold, by_rank), gold);
  set.gold_injected = true;
  return set;
}

}  // namespace pgmel
