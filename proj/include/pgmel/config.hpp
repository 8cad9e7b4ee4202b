#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace pgmel {

using Json = nlohmann::ordered_json;

enum class Modality { text, vision };
enum class TrainMode { pgmel, mel_rn, pgmel_pretrain };
enum class Ablation { full, text_only, entity_text_only, no_gated_fusion, cnn_k1, cnn_k12 };

std::string to_string(Modality m);
std::string to_string(TrainMode m);
std::string to_string(Ablation a);
Modality parse_modality(const std::string& s);
TrainMode parse_train_mode(const std::string& s);
Ablation parse_ablation(const std::string& s);

/// Dimensions and wiring of the two multimodal encoders.
struct EncoderConfig {
  int d1 = 128;                          // per-filter conv output width
  int d2 = 256;                          // modality projection width
  int d3 = 256;                          // final embedding width
  Modality gated_modality = Modality::text;
  std::vector<int> filter_widths = {1, 2, 3};
  bool use_gated_fusion = true;
  int feature_dim_in = 768;
  bool use_mention_vision = true;
  bool use_entity_vision = true;

  // Mention text feature width after the n-gram convolutions.
  int text_feature_width() const { return static_cast<int>(filter_widths.size()) * d1; }
  // Entity-side projections always target the 3*d1 width.
  int entity_feature_width() const { return 3 * d1; }

  void validate() const;
};

struct TrainConfig {
  double lr = 1e-4;
  int batch_size = 128;
  double margin = 0.5;     // triplet loss interval
  int negatives = 5;       // sampled negatives per mention
  int epochs = 30;
  uint64_t seed = 0;
  double clip = 1.0;       // global gradient-norm threshold
  TrainMode mode = TrainMode::pgmel;
  Ablation ablation = Ablation::full;
  int candidate_size = 16;
  int warmup_epochs = 10;  // discriminator-only epochs in pretrain mode
  double train_fraction = 1.0;
  double dropout = 0.3;

  void validate() const;
};

/// Everything one run needs, persisted next to its outputs.
struct RunConfig {
  EncoderConfig encoder;
  TrainConfig train;
  std::string data_manifest;
  std::string out_dir;
  std::string init_disc_from;  // optional checkpoint that seeds the discriminator

  /// Maps train.ablation onto the encoder knobs. Idempotent.
  void apply_ablation();

  Json to_json() const;
  static RunConfig from_json(const Json& j);
  void save(const std::string& path) const;
  static RunConfig load(const std::string& path);
};

}  // namespace pgmel
