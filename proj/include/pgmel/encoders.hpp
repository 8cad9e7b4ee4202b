#pragma once

#include <optional>
#include <string>
#include <vector>

#include "pgmel/config.hpp"
#include "pgmel/rng.hpp"
#include "pgmel/tape.hpp"

namespace pgmel {

constexpr double kLeakySlope = 0.01;

/// One mention or entity with its precomputed features. Mentions carry a
/// token-feature sequence (L x F) and reference their gold entity; entities
/// carry a single pooled text vector stored as a 1 x F row.
struct FeatureRecord {
  std::string id;
  std::string surface_name;
  RowMat token_features;
  std::optional<Vec> vision_feature;
  std::string gold_id;  // mentions only
};

/// Weights of one gated multimodal fusion block (either side).
struct GmuParams {
  Parameter proj_text;    // text feature -> d2
  Parameter proj_vision;  // vision feature -> d2
  Parameter gate_w;       // 2*d2 -> d2
  Parameter gate_b;
  Parameter fuse_w;       // 2*d2 -> d3
  Parameter fuse_b;

  std::vector<Parameter*> all();
};

struct MentionEncoderParams {
  std::vector<int> widths;            // filter widths, ascending
  std::vector<Parameter> conv_w;      // per width: (k*F) x d1
  std::vector<Parameter> conv_b;      // per width: d1
  Parameter vis_w, vis_b;             // F -> 3*d1
  GmuParams gmu;

  std::vector<Parameter*> all();
};

struct EntityEncoderParams {
  Parameter text_w, text_b;  // F -> 3*d1
  Parameter vis_w, vis_b;    // F -> 3*d1
  GmuParams gmu;

  std::vector<Parameter*> all();
};

struct EncoderParams {
  MentionEncoderParams mention;
  EntityEncoderParams entity;

  std::vector<Parameter*> all();
  static EncoderParams init(const EncoderConfig& cfg, Rng& rng);
};

/// Training-time dropout configuration; default is evaluation mode.
struct DropoutCtx {
  bool training = false;
  double rate = 0.0;
  Rng* rng = nullptr;
};

/// Inverted-dropout mask: entries are 0 with probability rate, else 1/(1-rate).
Tensor dropout_mask(const std::vector<Eigen::Index>& shape, double rate, Rng& rng);

/// n-gram convolution features: for each filter width k, max-pools the
/// leaky-relu of the width-k convolution over the token sequence, then
/// concatenates per-width outputs. Sequences shorter than a filter are
/// right-padded with zero token vectors.
NodeId encode_mention_text(Tape& t, BoundParams& bind, const RowMat& tokens,
                           MentionEncoderParams& params, const EncoderConfig& cfg);

/// Plain linear projection of a pooled feature vector (vision or entity text).
NodeId project_feature(Tape& t, BoundParams& bind, const Vec& v, Parameter& w, Parameter& b);

NodeId encode_entity_text(Tape& t, BoundParams& bind, const Vec& pooled,
                          EntityEncoderParams& params);

/// Gated multimodal fusion: projects both modalities to d2, gates the
/// designated one with a learned sigmoid gate over their concatenation, and
/// maps the (gated) concatenation through tanh to the final embedding. With
/// use_gated_fusion off this is the plain concatenation fusion.
NodeId gmu_fuse(Tape& t, BoundParams& bind, NodeId text_feat, NodeId vision_feat,
                GmuParams& params, const EncoderConfig& cfg);

/// Full mention embedding (text CNN + vision projection + fusion), with
/// dropout on both projected features when ctx.training is set.
NodeId embed_mention(Tape& t, BoundParams& bind, const FeatureRecord& mention,
                     EncoderParams& params, const EncoderConfig& cfg,
                     const DropoutCtx& ctx = {});

NodeId embed_entity(Tape& t, BoundParams& bind, const FeatureRecord& entity,
                    EncoderParams& params, const EncoderConfig& cfg,
                    const DropoutCtx& ctx = {});

}  // namespace pgmel
