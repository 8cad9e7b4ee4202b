#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <map>

#include "pgmel/candidates.hpp"
#include "pgmel/rng.hpp"
#include "pgmel/tensor.hpp"

using namespace pgmel;

namespace {

// exhaustive recursion, the textbook definition; only usable on short strings
int recursive_distance(const std::string& a, const std::string& b) {
  if (a.empty()) return static_cast<int>(b.size());
  if (b.empty()) return static_cast<int>(a.size());
  int del = recursive_distance(a.substr(1), b) + 1;
  int ins = recursive_distance(a, b.substr(1)) + 1;
  int sub = recursive_distance(a.substr(1), b.substr(1)) + (a[0] == b[0] ? 0 : 1);
  return std::min({del, ins, sub});
}

std::string random_word(Rng& rng, int max_len, int alphabet = 4) {
  int len = static_cast<int>(rng.uniform_int(max_len + 1));
  std::string s(len, 'a');
  for (char& c : s) c = static_cast<char>('a' + rng.uniform_int(alphabet));
  return s;
}

}  // namespace

TEST_CASE("edit distance basics") {
  CHECK(edit_distance("linker", "linker") == 0);
  CHECK(edit_distance("", "abc") == 3);
  CHECK(edit_distance("abc", "") == 3);
  CHECK(edit_distance("kitten", "sitting") == 3);
}

TEST_CASE("edit distance is case-folded") {
  CHECK(edit_distance("Kitten", "kitten") == 0);
  CHECK(edit_distance("ROBIN", "robin") == 0);
  CHECK(edit_distance("Ab", "ba") == 2);
}

TEST_CASE("edit distance counts unicode scalar values") {
  CHECK(edit_distance("caf\xc3\xa9", "cafe") == 1);   // e-acute vs e
  CHECK(edit_distance("caf\xc3\xa9", "caf") == 1);    // one scalar removed
}

TEST_CASE("matches the exhaustive recursion oracle on short strings") {
  Rng rng(41);
  for (int trial = 0; trial < 200; ++trial) {
    std::string a = random_word(rng, 6);
    std::string b = random_word(rng, 6);
    CHECK(edit_distance(a, b) == recursive_distance(a, b));
  }
}

TEST_CASE("edit distance is a metric on folded strings") {
  Rng rng(42);
  for (int trial = 0; trial < 200; ++trial) {
    std::string a = random_word(rng, 8);
    std::string b = random_word(rng, 8);
    std::string c = random_word(rng, 8);
    int ab = edit_distance(a, b);
    CHECK(ab == edit_distance(b, a));
    CHECK((ab == 0) == (a == b));  // lowercase alphabet, folding is identity
    CHECK(ab <= edit_distance(a, c) + edit_distance(c, b));
    CHECK(ab >= 0);
  }
}

TEST_CASE("generate_candidates picks the exact-name entity at C=1") {
  std::map<std::string, std::string> names = {
      {"e1", "robin"}, {"e2", "robbie"}, {"e3", "xylophone"}};
  CandidateSet set = generate_candidates("robin", names, 1);
  REQUIRE(set.entries.size() == 1);
  CHECK(set.entries[0].entity_id == "e1");
  CHECK(set.entries[0].distance == 0);
}

TEST_CASE("C at least the collection size returns everything sorted") {
  std::map<std::string, std::string> names = {
      {"b", "bbbb"}, {"a", "aaaa"}, {"c", "aaab"}};
  CandidateSet set = generate_candidates("aaaa", names, 10);
  REQUIRE(set.entries.size() == 3);
  CHECK(set.entries[0].entity_id == "a");
  CHECK(set.entries[1].entity_id == "c");
  CHECK(set.entries[2].entity_id == "b");
  for (size_t i = 1; i < set.entries.size(); ++i) {
    CHECK(set.entries[i - 1].distance <= set.entries[i].distance);
  }
}

TEST_CASE("ties break by ascending entity id") {
  std::map<std::string, std::string> names = {
      {"z9", "aab"}, {"a1", "aac"}, {"m5", "aad"}};
  CandidateSet set = generate_candidates("aaa", names, 2);
  REQUIRE(set.entries.size() == 2);
  CHECK(set.entries[0].entity_id == "a1");
  CHECK(set.entries[1].entity_id == "m5");
}

TEST_CASE("matches a brute-force full sort on a random 50-entity pool") {
  Rng rng(43);
  std::map<std::string, std::string> names;
  for (int i = 0; i < 50; ++i) {
    char id[8];
    std::snprintf(id, sizeof(id), "e%02d", i);
    names[id] = random_word(rng, 8, 6);
  }
  for (int trial = 0; trial < 10; ++trial) {
    std::string surface = random_word(rng, 8, 6);
    CandidateSet got = generate_candidates(surface, names, 5);

    std::vector<std::pair<std::pair<int, std::string>, std::string>> all;
    for (const auto& [id, name] : names) {
      all.push_back({{edit_distance(surface, name), id}, id});
    }
    std::sort(all.begin(), all.end());
    REQUIRE(got.entries.size() == 5);
    for (int i = 0; i < 5; ++i) {
      CHECK(got.entries[i].entity_id == all[i].second);
      CHECK(got.entries[i].distance == all[i].first.first);
    }
  }
}

TEST_CASE("ensure_gold") {
  std::map<std::string, std::string> names = {
      {"e1", "aaa"}, {"e2", "aab"}, {"e3", "abb"}, {"e4", "zzzzz"}};

  SUBCASE("gold already present leaves the set unchanged") {
    CandidateSet set = generate_candidates("aaa", names, 3);
    REQUIRE(set.contains("e2"));
    CandidateSet out = ensure_gold(set, "e2", "aab", "aaa");
    CHECK_FALSE(out.gold_injected);
    REQUIRE(out.entries.size() == set.entries.size());
    for (size_t i = 0; i < out.entries.size(); ++i) {
      CHECK(out.entries[i].entity_id == set.entries[i].entity_id);
    }
  }

  SUBCASE("absent gold evicts the worst entry and sets the flag") {
    CandidateSet set = generate_candidates("aaa", names, 3);
    REQUIRE_FALSE(set.contains("e4"));
    CandidateSet out = ensure_gold(set, "e4", "zzzzz", "aaa");
    CHECK(out.gold_injected);
    CHECK(out.entries.size() == 3);
    CHECK(out.contains("e4"));
    CHECK_FALSE(out.contains("e3"));  // previous worst is gone
    for (size_t i = 1; i < out.entries.size(); ++i) {
      CHECK(std::make_pair(out.entries[i - 1].distance, out.entries[i - 1].entity_id) <=
            std::make_pair(out.entries[i].distance, out.entries[i].entity_id));
    }
  }
}

TEST_CASE("output does not depend on entity iteration order") {
  Rng rng(44);
  std::map<std::string, std::string> forward, backward;
  std::vector<std::pair<std::string, std::string>> items;
  for (int i = 0; i < 20; ++i) {
    char id[8];
    std::snprintf(id, sizeof(id), "e%02d", i);
    items.push_back({id, random_word(rng, 7, 5)});
  }
  for (const auto& kv : items) forward.insert(kv);
  for (auto it = items.rbegin(); it != items.rend(); ++it) backward.insert(*it);

  CandidateSet a = generate_candidates("abc", forward, 6);
  CandidateSet b = generate_candidates("abc", backward, 6);
  REQUIRE(a.entries.size() == b.entries.size());
  for (size_t i = 0; i < a.entries.size(); ++i) {
    CHECK(a.entries[i].entity_id == b.entries[i].entity_id);
  }
}

TEST_CASE("gold recall is monotone nondecreasing in C") {
  Rng rng(45);
  std::map<std::string, std::string> names;
  for (int i = 0; i < 40; ++i) {
    char id[8];
    std::snprintf(id, sizeof(id), "e%02d", i);
    names[id] = random_word(rng, 8, 6);
  }
  std::vector<std::pair<std::string, std::string>> mentions;  // (surface, gold)
  for (int i = 0; i < 40; ++i) {
    char id[8];
    std::snprintf(id, sizeof(id), "e%02d", i);
    std::string surface = names[id];
    if (!surface.empty()) surface[0] = 'q';  // one edit away
    mentions.push_back({surface, id});
  }
  double prev = 0.0;
  for (int C : {1, 2, 4, 8, 16, 40}) {
    int hit = 0;
    for (const auto& [surface, gold] : mentions) {
      if (generate_candidates(surface, names, C).contains(gold)) ++hit;
    }
    double recall = static_cast<double>(hit) / mentions.size();
    CHECK(recall >= prev);
    prev = recall;
  }
  CHECK(prev == 1.0);  // C = collection size always contains gold
}

TEST_CASE("invalid arguments are contract violations") {
  std::map<std::string, std::string> names = {{"e1", "a"}};
  CHECK_THROWS_AS(generate_candidates("a", names, 0), ContractViolation);
  std::map<std::string, std::string> empty;
  CHECK_THROWS_AS(generate_candidates("a", empty, 1), ContractViolation);
}
