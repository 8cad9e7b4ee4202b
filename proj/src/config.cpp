#include "pgmel/config.hpp"

#include <fstream>
#include <set>

#include "pgmel/tensor.hpp"

namespace pgmel {

std::string to_string(Modality m) { return m == Modality::text ? "text" : "vision"; }

std::string to_string(TrainMode m) {
  switch (m) {
    case TrainMode::pgmel: return "pgmel";
    case TrainMode::mel_rn: return "mel-rn";
    case TrainMode::pgmel_pretrain: return "pgmel-pretrain";
  }
  return "?";
}

std::string to_string(Ablation a) {
  switch (a) {
    case Ablation::full: return "full";
    case Ablation::text_only: return "text-only";
    case Ablation::entity_text_only: return "entity-text-only";
    case Ablation::no_gated_fusion: return "no-gated-fusion";
    case Ablation::cnn_k1: return "cnn-k1";
    case Ablation::cnn_k12: return "cnn-k12";
  }
  return "?";
}

Modality parse_modality(const std::string& s) {
  if (s == "text") return Modality::text;
  if (s == "vision") return Modality::vision;
  throw ContractViolation("unknown modality: " + s);
}

TrainMode parse_train_mode(const std::string& s) {
  if (s == "pgmel") return TrainMode::pgmel;
  if (s == "mel-rn") return TrainMode::mel_rn;
  if (s == "pgmel-pretrain") return TrainMode::pgmel_pretrain;
  throw ContractViolation("unknown train mode: " + s);
}

Ablation parse_ablation(const std::string& s) {
  if (s == "full") return Ablation::full;
  if (s == "text-only") return Ablation::text_only;
  if (s == "entity-text-only") return Ablation::entity_text_only;
  if (s == "no-gated-fusion") return Ablation::no_gated_fusion;
  if (s == "cnn-k1") return Ablation::cnn_k1;
  if (s == "cnn-k12") return Ablation::cnn_k12;
  throw ContractViolation("unknown ablation: " + s);
}

void EncoderConfig::validate() const {
  if (d1 < 1 || d2 < 1 || d3 < 1) throw ContractViolation("d1,d2,d3 must be >= 1");
  if (feature_dim_in < 1) throw ContractViolation("feature_dim_in must be >= 1");
  if (filter_widths.empty()) throw ContractViolation("filter_widths must be nonempty");
  std::set<int> seen;
  for (int k : filter_widths) {
    if (k < 1 || k > 3) throw ContractViolation("filter widths must be in {1,2,3}");
    if (!seen.insert(k).second) throw ContractViolation("duplicate filter width");
  }
}

void TrainConfig::validate() const {
  if (lr <= 0.0) throw ContractViolation("lr must be positive");
  if (margin <= 0.0) throw ContractViolation("margin must be positive");
  if (clip <= 0.0) throw ContractViolation("clip must be positive");
  if (batch_size < 1) throw ContractViolation("batch_size must be >= 1");
  if (negatives < 1) throw ContractViolation("negatives must be >= 1");
  if (candidate_size < 1) throw ContractViolation("candidate_size must be >= 1");
  if (negatives >= candidate_size) {
    throw ContractViolation("negatives must be < candidate_size");
  }
  if (epochs < 0) throw ContractViolation("epochs must be >= 0");
  if (warmup_epochs < 0) throw ContractViolation("warmup_epochs must be >= 0");
  if (train_fraction <= 0.0 || train_fraction > 1.0) {
    throw ContractViolation("train_fraction must be in (0,1]");
  }
  if (dropout < 0.0 || dropout >= 1.0) throw ContractViolation("dropout must be in [0,1)");
}

void RunConfig::apply_ablation() {
  switch (train.ablation) {
    case Ablation::full:
      break;
    case Ablation::text_only:
      encoder.use_mention_vision = false;
      encoder.use_entity_vision = false;
      break;
    case Ablation::entity_text_only:
      encoder.use_entity_vision = false;
      break;
    case Ablation::no_gated_fusion:
      encoder.use_gated_fusion = false;
      break;
    case Ablation::cnn_k1:
      encoder.filter_widths = {1};
      break;
    case Ablation::cnn_k12:
      encoder.filter_widths = {1, 2};
      break;
  }
}

Json RunConfig::to_json() const {
  Json j;
  j["encoder"] = {
      {"d1", encoder.d1},
      {"d2", encoder.d2},
      {"d3", encoder.d3},
      {"gated_modality", to_string(encoder.gated_modality)},
      {"filter_widths", encoder.filter_widths},
      {"use_gated_fusion", encoder.use_gated_fusion},
      {"feature_dim_in", encoder.feature_dim_in},
      {"use_mention_vision", encoder.use_mention_vision},
      {"use_entity_vision", encoder.use_entity_vision},
  };
  j["train"] = {
      {"lr", train.lr},
      {"batch_size", train.batch_size},
      {"margin", train.margin},
      {"negatives", train.negatives},
      {"epochs", train.epochs},
      {"seed", train.seed},
      {"clip", train.clip},
      {"mode", to_string(train.mode)},
      {"ablation", to_string(train.ablation)},
      {"candidate_size", train.candidate_size},
      {"warmup_epochs", train.warmup_epochs},
      {"train_fraction", train.train_fraction},
      {"dropout", train.dropout},
  };
  j["data_manifest"] = data_manifest;
  j["out_dir"] = out_dir;
  j["init_disc_from"] = init_disc_from;
  return j;
}

RunConfig RunConfig::from_json(const Json& j) {
  RunConfig cfg;
  if (j.contains("encoder")) {
    const Json& e = j.at("encoder");
    cfg.encoder.d1 = e.value("d1", cfg.encoder.d1);
    cfg.encoder.d2 = e.value("d2", cfg.encoder.d2);
    cfg.encoder.d3 = e.value("d3", cfg.encoder.d3);
    if (e.contains("gated_modality")) {
      cfg.encoder.gated_modality = parse_modality(e.at("gated_modality").get<std::string>());
    }
    if (e.contains("filter_widths")) {
      cfg.encoder.filter_widths = e.at("filter_widths").get<std::vector<int>>();
    }
    cfg.encoder.use_gated_fusion = e.value("use_gated_fusion", cfg.encoder.use_gated_fusion);
    cfg.encoder.feature_dim_in = e.value("feature_dim_in", cfg.encoder.feature_dim_in);
    cfg.encoder.use_mention_vision =
        e.value("use_mention_vision", cfg.encoder.use_mention_vision);
    cfg.encoder.use_entity_vision =
        e.value("use_entity_vision", cfg.encoder.use_entity_vision);
  }
  if (j.contains("train")) {
    const Json& t = j.at("train");
    cfg.train.lr = t.value("lr", cfg.train.lr);
    cfg.train.batch_size = t.value("batch_size", cfg.train.batch_size);
    cfg.train.margin = t.value("margin", cfg.train.margin);
    cfg.train.negatives = t.value("negatives", cfg.train.negatives);
    cfg.train.epochs = t.value("epochs", cfg.train.epochs);
    cfg.train.seed = t.value("seed", cfg.train.seed);
    cfg.train.clip = t.value("clip", cfg.train.clip);
    if (t.contains("mode")) cfg.train.mode = parse_train_mode(t.at("mode").get<std::string>());
    if (t.contains("ablation")) {
      cfg.train.ablation = parse_ablation(t.at("ablation").get<std::string>());
    }
    cfg.train.candidate_size = t.value("candidate_size", cfg.train.candidate_size);
    cfg.train.warmup_epochs = t.value("warmup_epochs", cfg.train.warmup_epochs);
    cfg.train.train_fraction = t.value("train_fraction", cfg.train.train_fraction);
    cfg.train.dropout = t.value("dropout", cfg.train.dropout);
  }
  cfg.data_manifest = j.value("data_manifest", std::string());
  cfg.out_dir = j.value("out_dir", std::string());
  cfg.init_disc_from = j.value("init_disc_from", std::string());
  return cfg;
}

void RunConfig::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write config: " + path);
  out << to_json().dump(2) << "\n";
}

RunConfig RunConfig::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read config: " + path);
  Json j = Json::parse(in);
  return from_json(j);
}

}  // namespace pgmel
