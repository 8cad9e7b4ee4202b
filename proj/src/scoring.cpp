#include "pgmel/scoring.hpp"

#include <cmath>

namespace pgmel {

namespace {

Tensor glorot_col(Eigen::Index rows, Rng& rng) {
  double limit = std::sqrt(6.0 / (static_cast<double>(rows) + 1.0));
  Tensor t = Tensor::zeros({rows, 1});
  for (Eigen::Index i = 0; i < t.size(); ++i) t[i] = rng.uniform(-limit, limit);
  return t;
}

void check_score_bounds(double psi, double phi) {
  if (!(std::abs(psi) <= 1.0) || !(phi > 0.0) || !(phi < 1.0)) {
    throw NumericFault("score out of range: psi=" + std::to_string(psi) +
                       " phi=" + std::to_string(phi));
  }
}

}  // namespace

MatchParams MatchParams::init(int d3, Rng& rng) {
  MatchParams m;
  m.q = Parameter("match.q", glorot_col(2 * static_cast<Eigen::Index>(d3) + 1, rng));
  // the cosine coordinate starts as the dominant positive signal; with both
  // encoders randomly initialized it is the only score input that pushes the
  // towers toward alignment, and a random sign there can stall training
  m.q.value[2 * d3] = 2.0;
  m.b = Parameter("match.b", Tensor::zeros({1}));
  return m;
}

std::vector<Parameter*> ModelParams::all() {
  std::vector<Parameter*> out = encoder.all();
  for (Parameter* p : match.all()) out.push_back(p);
  return out;
}

ModelParams ModelParams::init(const EncoderConfig& cfg, Rng& rng) {
  ModelParams m;
  m.encoder = EncoderParams::init(cfg, rng);
  m.match = MatchParams::init(cfg.d3, rng);
  return m;
}

double cosine_similarity(const Vec& a, const Vec& b, bool* degenerate) {
  if (a.size() != b.size()) throw ContractViolation("cosine_similarity: width mismatch");
  if (degenerate != nullptr) *degenerate = false;
  double na = a.norm(), nb = b.norm();
  if (na == 0.0 || nb == 0.0) {
    if (degenerate != nullptr) *degenerate = true;
    return 0.0;
  }
  return a.dot(b) / (na * nb);
}

MatchNodes match_pair(Tape& t, BoundParams& bind, NodeId m_emb, NodeId e_emb,
                      MatchParams& params) {
  NodeId cs = cos_sim(t, m_emb, e_emb);
  std::vector<NodeId> parts = {m_emb, e_emb, cs};
  NodeId x_c = concat(t, parts);
  NodeId psi = tanh(t, add(t, matmul(t, x_c, bind(params.q)), bind(params.b)));
  NodeId phi = sigmoid(t, psi);
  check_score_bounds(t.value(psi)[0], t.value(phi)[0]);
  return {psi, phi};
}

ScoredCandidate match(const FeatureRecord& mention, const FeatureRecord& entity,
                      ModelParams& params, const EncoderConfig& cfg) {
  const FeatureRecord* one[] = {&entity};
  return score_candidates(mention, one, params, cfg)[0];
}

std::vector<ScoredCandidate> score_candidates(const FeatureRecord& mention,
                                              std::span<const FeatureRecord* const> candidates,
                                              ModelParams& params, const EncoderConfig& cfg) {
  if (candidates.empty()) throw ContractViolation("score_candidates: no candidates");
  Tape t;
  BoundParams bind(t);
  NodeId m_emb = embed_mention(t, bind, mention, params.encoder, cfg);
  std::vector<ScoredCandidate> out;
  out.reserve(candidates.size());
  for (const FeatureRecord* e : candidates) {
    NodeId e_emb = embed_entity(t, bind, *e, params.encoder, cfg);
    MatchNodes m = match_pair(t, bind, m_emb, e_emb, params.match);
    out.push_back({e->id, t.value(m.psi)[0], t.value(m.phi)[0]});
  }
  return out;
}

}  // namespace pgmel
