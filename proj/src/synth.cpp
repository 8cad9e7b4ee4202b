#include "pgmel/synth.hpp"

#include <algorithm>
#include <set>

#include "pgmel/rng.hpp"

namespace pgmel {

namespace {

// Within-cluster prototype offsets, relative to the mention noise sigma. One
// modality per cluster gets the informative scale, the other stays nearly
// degenerate, so per-example fusion weighting has real signal to exploit.
constexpr double kInformativeOffset = 1.1;
constexpr double kWeakOffset = 0.15;

std::string random_name(int len, Rng& rng) {
  std::string s(len, 'a');
  for (char& c : s) c = static_cast<char>('a' + rng.uniform_int(26));
  return s;
}

std::string substitute_edits(const std::string& base, int edits, Rng& rng) {
  std::string s = base;
  for (int i = 0; i < edits; ++i) {
    size_t pos = rng.uniform_int(s.size());
    s[pos] = static_cast<char>('a' + rng.uniform_int(26));
  }
  return s;
}

std::string perturb_surface(const std::string& name, int edits, Rng& rng) {
  std::string s = name;
  for (int i = 0; i < edits; ++i) {
    uint64_t op = rng.uniform_int(3);
    if (op == 0 || s.size() <= 2) {  // substitute
      size_t pos = rng.uniform_int(s.size());
      s[pos] = static_cast<char>('a' + rng.uniform_int(26));
    } else if (op == 1) {  // insert
      size_t pos = rng.uniform_int(s.size() + 1);
      s.insert(s.begin() + pos, static_cast<char>('a' + rng.uniform_int(26)));
    } else {  // delete
      size_t pos = rng.uniform_int(s.size());
      s.erase(s.begin() + pos);
    }
  }
  return s;
}

Vec gaussian_vec(int dim, double sd, Rng& rng) {
  Vec v(dim);
  for (int i = 0; i < dim; ++i) v[i] = rng.normal(0.0, sd);
  return v;
}

char digit_suffix(int v) { return static_cast<char>('a' + (v % 26)); }

}  // namespace

void SyntheticSpec::validate() const {
  if (preset != "separable" && preset != "confusable") {
    throw ContractViolation("unknown preset: " + preset);
  }
  if (num_entities < 1) throw ContractViolation("num_entities must be >= 1");
  if (num_clusters < 1 || num_clusters > num_entities) {
    throw ContractViolation("num_clusters must be in [1, num_entities]");
  }
  if (mentions_per_entity < 1) throw ContractViolation("mentions_per_entity must be >= 1");
  if (sigma < 0.0) throw ContractViolation("sigma must be >= 0");
  if (name_len < 4) throw ContractViolation("name_len must be >= 4");
  if (name_edits < 0) throw ContractViolation("name_edits must be >= 0");
  if (token_count < 1) throw ContractViolation("token_count must be >= 1");
  if (feature_dim < 2) throw ContractViolation("feature_dim must be >= 2");
}

Json SyntheticSpec::to_json() const {
  Json j;
  j["preset"] = preset;
  j["num_entities"] = num_entities;
  j["num_clusters"] = num_clusters;
  j["mentions_per_entity"] = mentions_per_entity;
  j["sigma"] = sigma;
  j["name_len"] = name_len;
  j["name_edits"] = name_edits;
  j["token_count"] = token_count;
  j["feature_dim"] = feature_dim;
  j["seed"] = seed;
  return j;
}

SyntheticSpec SyntheticSpec::from_json(const Json& j) {
  SyntheticSpec s;
  s.preset = j.value("preset", s.preset);
  s.num_entities = j.value("num_entities", s.num_entities);
  s.num_clusters = j.value("num_clusters", s.num_clusters);
  s.mentions_per_entity = j.value("mentions_per_entity", s.mentions_per_entity);
  s.sigma = j.value("sigma", s.sigma);
  s.name_len = j.value("name_len", s.name_len);
  s.name_edits = j.value("name_edits", s.name_edits);
  s.token_count = j.value("token_count", s.token_count);
  s.feature_dim = j.value("feature_dim", s.feature_dim);
  s.seed = j.value("seed", s.seed);
  return s;
}

SyntheticSpec SyntheticSpec::separable() {
  SyntheticSpec s;
  s.preset = "separable";
  s.num_entities = 500;
  s.num_clusters = 500;
  s.mentions_per_entity = 4;
  s.sigma = 0.35;
  s.feature_dim = 64;
  return s;
}

SyntheticSpec SyntheticSpec::confusable() {
  SyntheticSpec s;
  s.preset = "confusable";
  s.num_entities = 100;
  s.num_clusters = 20;
  s.mentions_per_entity = 6;
  s.sigma = 0.45;
  s.feature_dim = 32;
  return s;
}

Dataset generate_synthetic(const SyntheticSpec& spec) {
  spec.validate();
  Rng rng = Rng(spec.seed).stream(0x5e3d);
  const int dim = spec.feature_dim;

  Dataset ds;
  ds.manifest.name = "synthetic-" + spec.preset;
  ds.manifest.feature_dim = dim;
  ds.manifest.entity_file = "entities.jsonl";
  ds.manifest.mention_file = "mentions.jsonl";
  ds.manifest.split = {0.7, 0.1, 0.2};
  ds.manifest.seed = spec.seed;
  ds.manifest.extra = spec.to_json();

  const int per = spec.num_entities / spec.num_clusters;
  const int extra = spec.num_entities % spec.num_clusters;

  struct Proto {
    Vec text, vision;
  };
  std::vector<Proto> protos;
  protos.reserve(spec.num_entities);
  std::set<std::string> used_names;

  char idbuf[32];
  for (int c = 0; c < spec.num_clusters; ++c) {
    int members = per + (c < extra ? 1 : 0);
    std::string base = random_name(spec.name_len, rng);
    Vec text_centroid = gaussian_vec(dim, 1.0, rng);
    Vec vision_centroid = gaussian_vec(dim, 1.0, rng);
    // alternate which modality separates this cluster's members
    bool text_informative = (c % 2 == 0);
    double text_off = spec.sigma * (text_informative ? kInformativeOffset : kWeakOffset);
    double vision_off = spec.sigma * (text_informative ? kWeakOffset : kInformativeOffset);

    for (int e = 0; e < members; ++e) {
      std::snprintf(idbuf, sizeof(idbuf), "c%03d_e%02d", c, e);
      std::string name = members == 1 ? base : substitute_edits(base, 2, rng);
      for (int tries = 0; used_names.count(name) && tries < 8; ++tries) {
        name = substitute_edits(base, 2, rng);
      }
      if (used_names.count(name)) name.back() = digit_suffix(e);
      used_names.insert(name);

      FeatureRecord rec;
      rec.id = idbuf;
      rec.surface_name = name;
      Proto p;
      p.text = text_centroid + gaussian_vec(dim, text_off, rng);
      p.vision = vision_centroid + gaussian_vec(dim, vision_off, rng);
      rec.token_features = RowMat(1, dim);
      rec.token_features.row(0) = p.text.transpose();
      rec.vision_feature = p.vision;
      protos.push_back(std::move(p));
      ds.entity_index[rec.id] = ds.entities.size();
      ds.entity_names[rec.id] = rec.surface_name;
      ds.entities.push_back(std::move(rec));
    }
  }

  int mention_no = 0;
  for (size_t ei = 0; ei < ds.entities.size(); ++ei) {
    const FeatureRecord& gold = ds.entities[ei];
    const Proto& p = protos[ei];
    for (int k = 0; k < spec.mentions_per_entity; ++k) {
      std::snprintf(idbuf, sizeof(idbuf), "m%06d", mention_no++);
      FeatureRecord m;
      m.id = idbuf;
      m.gold_id = gold.id;
      m.surface_name = perturb_surface(gold.surface_name, spec.name_edits, rng);
      m.token_features = RowMat(spec.token_count, dim);
      for (int t = 0; t < spec.token_count; ++t) {
        m.token_features.row(t) = (p.text + gaussian_vec(dim, spec.sigma, rng)).transpose();
      }
      m.vision_feature = p.vision + gaussian_vec(dim, spec.sigma, rng);
      ds.mentions.push_back(std::move(m));
    }
  }

  assign_splits(ds);
  return ds;
}

int synthetic_cluster_of(const std::string& entity_id) {
  if (entity_id.size() < 5 || entity_id[0] != 'c') {
    throw DataError("not a synthetic entity id: " + entity_id);
  }
  return std::stoi(entity_id.substr(1, entity_id.find('_') - 1));
}

}  // namespace pgmel
