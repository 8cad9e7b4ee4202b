#pragma once

#include <span>
#include <string>
#include <vector>

#include "pgmel/encoders.hpp"

namespace pgmel {

/// Matching head: concat(mention, entity, cosine) -> tanh(x Q + B).
struct MatchParams {
  Parameter q;  // (2*d3 + 1) x 1
  Parameter b;  // scalar

  std::vector<Parameter*> all() { return {&q, &b}; }
  static MatchParams init(int d3, Rng& rng);
};

/// All learnable weights of one score function. The discriminator and the
/// generator each own an independent instance.
struct ModelParams {
  EncoderParams encoder;
  MatchParams match;

  std::vector<Parameter*> all();
  static ModelParams init(const EncoderConfig& cfg, Rng& rng);
};

struct ScoredCandidate {
  std::string entity_id;
  double psi;  // raw similarity, in (-1, 1)
  double phi;  // sigmoid(psi), in (0, 1)
};

/// Plain cosine similarity; zero-norm input yields 0 and sets *degenerate.
double cosine_similarity(const Vec& a, const Vec& b, bool* degenerate = nullptr);

struct MatchNodes {
  NodeId psi;
  NodeId phi;
};

/// Records the matching head over two embedding nodes.
MatchNodes match_pair(Tape& t, BoundParams& bind, NodeId m_emb, NodeId e_emb,
                      MatchParams& params);

/// Convenience for tests and evaluation: full score of one mention-entity
/// pair in a fresh tape (evaluation mode, no dropout).
ScoredCandidate match(const FeatureRecord& mention, const FeatureRecord& entity,
                      ModelParams& params, const EncoderConfig& cfg);

/// Scores one mention against every candidate. The mention is embedded once
/// and reused; output order matches input order.
std::vector<ScoredCandidate> score_candidates(const FeatureRecord& mention,
                                              std::span<const FeatureRecord* const> candidates,
                                              ModelParams& params, const EncoderConfig& cfg);

}  // namespace pgmel
