#include "pgmel/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>

#include "pgmel/rng.hpp"

namespace fs = std::filesystem;

namespace pgmel {

namespace {

constexpr char kFeatMagic[8] = {'P', 'G', 'M', 'L', 'F', 'E', 'A', 'T'};
constexpr uint32_t kFeatVersion = 1;

template <class T>
void write_pod(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

template <class T>
T read_pod(std::istream& in, const std::string& what) {
  T v;
  in.read(reinterpret_cast<char*>(&v), sizeof(v));
  if (!in) throw DataError("truncated feature file while reading " + what);
  return v;
}

std::string sidecar_path(const std::string& record_path) {
  fs::path p(record_path);
  p.replace_extension(".feat");
  return p.string();
}

}  // namespace

void write_feature_file(const std::string& path, const std::vector<Vec>& rows) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path);
  out.write(kFeatMagic, sizeof(kFeatMagic));
  write_pod<uint32_t>(out, kFeatVersion);
  write_pod<uint64_t>(out, rows.size());
  uint32_t dim = rows.empty() ? 0 : static_cast<uint32_t>(rows[0].size());
  write_pod<uint32_t>(out, dim);
  std::vector<float> buf(dim);
  for (const Vec& r : rows) {
    if (r.size() != dim) throw DataError("inconsistent row width in " + path);
    for (uint32_t i = 0; i < dim; ++i) buf[i] = static_cast<float>(r[i]);
    out.write(reinterpret_cast<const char*>(buf.data()), sizeof(float) * dim);
  }
  if (!out) throw DataError("write failed: " + path);
}

std::vector<Vec> read_feature_file(const std::string& path, int expect_dim) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read " + path);
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kFeatMagic, sizeof(magic)) != 0) {
    throw DataError("bad magic in " + path);
  }
  uint32_t version = read_pod<uint32_t>(in, "version");
  if (version != kFeatVersion) {
    throw DataError("unsupported feature file version " + std::to_string(version));
  }
  uint64_t count = read_pod<uint64_t>(in, "count");
  uint32_t dim = read_pod<uint32_t>(in, "dim");
  if (expect_dim >= 0 && dim != static_cast<uint32_t>(expect_dim)) {
    throw DataError("dimension mismatch in " + path + ": " + std::to_string(dim) +
                    " != " + std::to_string(expect_dim));
  }
  std::vector<Vec> rows;
  rows.reserve(count);
  std::vector<float> buf(dim);
  for (uint64_t r = 0; r < count; ++r) {
    in.read(reinterpret_cast<char*>(buf.data()), sizeof(float) * dim);
    if (!in) throw DataError("truncated feature file " + path + " at row " + std::to_string(r));
    Vec v(dim);
    for (uint32_t i = 0; i < dim; ++i) v[i] = static_cast<double>(buf[i]);
    rows.push_back(std::move(v));
  }
  return rows;
}

const FeatureRecord& Dataset::entity(const std::string& id) const {
  auto it = entity_index.find(id);
  if (it == entity_index.end()) throw DataError("unknown entity id: " + id);
  return entities[it->second];
}

const std::vector<size_t>& Dataset::split_indices(const std::string& name) const {
  if (name == "train") return train_idx;
  if (name == "validation") return validation_idx;
  if (name == "test") return test_idx;
  throw DataError("unknown split: " + name);
}

SplitSizes split_sizes(int64_t n, const std::array<double, 3>& fractions) {
  double sum = fractions[0] + fractions[1] + fractions[2];
  if (fractions[0] <= 0 || fractions[1] <= 0 || fractions[2] <= 0 ||
      std::abs(sum - 1.0) > 1e-9) {
    throw DataError("split fractions must be positive and sum to 1");
  }
  SplitSizes s;
  s.train = std::llround(static_cast<double>(n) * fractions[0]);
  s.validation = std::llround(static_cast<double>(n) * fractions[1]);
  s.test = n - s.train - s.validation;
  if (s.test < 0) throw DataError("split rounding exceeded dataset size");
  return s;
}

void assign_splits(Dataset& ds) {
  std::vector<std::string> ids;
  ids.reserve(ds.mentions.size());
  std::unordered_map<std::string, size_t> pos;
  for (size_t i = 0; i < ds.mentions.size(); ++i) {
    ids.push_back(ds.mentions[i].id);
    pos[ds.mentions[i].id] = i;
  }
  std::sort(ids.begin(), ids.end());
  Rng rng = Rng(ds.manifest.seed).stream(0x5f17);
  rng.shuffle(ids);

  SplitSizes sizes = split_sizes(static_cast<int64_t>(ids.size()), ds.manifest.split);
  ds.train_idx.clear();
  ds.validation_idx.clear();
  ds.test_idx.clear();
  for (size_t i = 0; i < ids.size(); ++i) {
    size_t idx = pos.at(ids[i]);
    if (static_cast<int64_t>(i) < sizes.train) {
      ds.train_idx.push_back(idx);
    } else if (static_cast<int64_t>(i) < sizes.train + sizes.validation) {
      ds.validation_idx.push_back(idx);
    } else {
      ds.test_idx.push_back(idx);
    }
  }
}

namespace {

Json parse_line(const std::string& line, const std::string& file, size_t lineno) {
  try {
    return Json::parse(line);
  } catch (const std::exception& e) {
    throw DataError(file + ":" + std::to_string(lineno) + ": " + e.what());
  }
}

}  // namespace

Dataset load_dataset(const std::string& manifest_path) {
  std::ifstream min(manifest_path);
  if (!min) throw DataError("cannot read manifest: " + manifest_path);
  Json mj = Json::parse(min, nullptr, /*allow_exceptions=*/true);

  Dataset ds;
  ds.manifest.name = mj.value("name", std::string());
  ds.manifest.feature_dim = mj.at("feature_dim").get<int>();
  ds.manifest.entity_file = mj.at("entity_file").get<std::string>();
  ds.manifest.mention_file = mj.at("mention_file").get<std::string>();
  if (mj.contains("split")) {
    ds.manifest.split = {mj["split"].value("train", 0.7),
                         mj["split"].value("validation", 0.1),
                         mj["split"].value("test", 0.2)};
  }
  ds.manifest.seed = mj.value("seed", uint64_t{0});
  if (mj.contains("synthetic")) ds.manifest.extra = mj["synthetic"];

  fs::path dir = fs::path(manifest_path).parent_path();
  std::string entity_path = (dir / ds.manifest.entity_file).string();
  std::string mention_path = (dir / ds.manifest.mention_file).string();
  const int F = ds.manifest.feature_dim;

  std::vector<Vec> entity_feats = read_feature_file(sidecar_path(entity_path), F);
  std::vector<Vec> mention_feats = read_feature_file(sidecar_path(mention_path), F);

  auto fetch_row = [](const std::vector<Vec>& rows, int64_t i, const std::string& rec) -> const Vec& {
    if (i < 0 || i >= static_cast<int64_t>(rows.size())) {
      throw DataError("record " + rec + " references feature row " + std::to_string(i) +
                      " outside the sidecar");
    }
    return rows[static_cast<size_t>(i)];
  };

  {
    std::ifstream in(entity_path);
    if (!in) throw DataError("cannot read " + entity_path);
    std::string line;
    size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (line.empty()) continue;
      Json j = parse_line(line, entity_path, lineno);
      FeatureRecord rec;
      rec.id = j.at("id").get<std::string>();
      rec.surface_name = j.at("name").get<std::string>();
      const Vec& text = fetch_row(entity_feats, j.at("text_row").get<int64_t>(), rec.id);
      rec.token_features = RowMat(1, F);
      rec.token_features.row(0) = text.transpose();
      int64_t vrow = j.value("vision_row", int64_t{-1});
      if (vrow >= 0) rec.vision_feature = fetch_row(entity_feats, vrow, rec.id);
      if (ds.entity_index.count(rec.id)) throw DataError("duplicate entity id: " + rec.id);
      ds.entity_index[rec.id] = ds.entities.size();
      ds.entity_names[rec.id] = rec.surface_name;
      ds.entities.push_back(std::move(rec));
    }
  }
  if (ds.entities.empty()) throw DataError("dataset has no entities");

  {
    std::ifstream in(mention_path);
    if (!in) throw DataError("cannot read " + mention_path);
    std::string line;
    size_t lineno = 0;
    std::unordered_map<std::string, bool> seen;
    while (std::getline(in, line)) {
      ++lineno;
      if (line.empty()) continue;
      Json j = parse_line(line, mention_path, lineno);
      FeatureRecord rec;
      rec.id = j.at("id").get<std::string>();
      rec.surface_name = j.at("surface").get<std::string>();
      rec.gold_id = j.at("gold").get<std::string>();
      if (!ds.entity_index.count(rec.gold_id)) {
        throw DataError("mention " + rec.id + " references unknown gold entity " +
                        rec.gold_id);
      }
      int64_t start = j.at("token_row").get<int64_t>();
      int64_t count = j.at("token_count").get<int64_t>();
      if (count < 1) throw DataError("mention " + rec.id + " has no token features");
      rec.token_features = RowMat(count, F);
      for (int64_t r = 0; r < count; ++r) {
        rec.token_features.row(r) = fetch_row(mention_feats, start + r, rec.id).transpose();
      }
      int64_t vrow = j.value("vision_row", int64_t{-1});
      if (vrow >= 0) rec.vision_feature = fetch_row(mention_feats, vrow, rec.id);
      if (seen.count(rec.id)) throw DataError("duplicate mention id: " + rec.id);
      seen[rec.id] = true;
      ds.mentions.push_back(std::move(rec));
    }
  }
  if (ds.mentions.empty()) throw DataError("dataset has no mentions");

  assign_splits(ds);
  return ds;
}

void save_dataset(const Dataset& ds, const std::string& dir) {
  fs::create_directories(dir);
  fs::path base(dir);

  std::vector<Vec> entity_rows;
  {
    std::ofstream out(base / ds.manifest.entity_file);
    if (!out) throw DataError("cannot write entity file");
    for (const FeatureRecord& e : ds.entities) {
      Json j;
      j["id"] = e.id;
      j["name"] = e.surface_name;
      j["text_row"] = entity_rows.size();
      entity_rows.push_back(e.token_features.row(0).transpose());
      if (e.vision_feature.has_value()) {
        j["vision_row"] = entity_rows.size();
        entity_rows.push_back(*e.vision_feature);
      } else {
        j["vision_row"] = -1;
      }
      out << j.dump() << "\n";
    }
  }
  write_feature_file(sidecar_path((base / ds.manifest.entity_file).string()), entity_rows);

  std::vector<Vec> mention_rows;
  {
    std::ofstream out(base / ds.manifest.mention_file);
    if (!out) throw DataError("cannot write mention file");
    for (const FeatureRecord& m : ds.mentions) {
      Json j;
      j["id"] = m.id;
      j["surface"] = m.surface_name;
      j["gold"] = m.gold_id;
      j["token_row"] = mention_rows.size();
      j["token_count"] = m.token_features.rows();
      for (Eigen::Index r = 0; r < m.token_features.rows(); ++r) {
        mention_rows.push_back(m.token_features.row(r).transpose());
      }
      if (m.vision_feature.has_value()) {
        j["vision_row"] = mention_rows.size();
        mention_rows.push_back(*m.vision_feature);
      } else {
        j["vision_row"] = -1;
      }
      out << j.dump() << "\n";
    }
  }
  write_feature_file(sidecar_path((base / ds.manifest.mention_file).string()), mention_rows);

  Json mj;
  mj["name"] = ds.manifest.name;
  mj["feature_dim"] = ds.manifest.feature_dim;
  mj["entity_file"] = ds.manifest.entity_file;
  mj["mention_file"] = ds.manifest.mention_file;
  mj["split"] = {{"train", ds.manifest.split[0]},
                 {"validation", ds.manifest.split[1]},
                 {"test", ds.manifest.split[2]}};
  mj["seed"] = ds.manifest.seed;
  if (!ds.manifest.extra.is_null()) mj["synthetic"] = ds.manifest.extra;
  std::ofstream out(base / "manifest.json");
  if (!out) throw DataError("cannot write manifest");
  out << mj.dump() << "\n";
}

}  // namespace pgmel
