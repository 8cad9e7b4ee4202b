#include "pgmel/adversarial.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <unordered_map>

#include "pgmel/candidates.hpp"
#include "pgmel/optim.hpp"

namespace pgmel {

namespace {

constexpr double kLogFloor = 1e-12;  // keeps -log(phi) finite if phi underflows

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.10g", v);
  return buf;
}

// Entity embeddings are mention-independent, so within one batch tape each
// entity is embedded (and draws its dropout mask) once.
class EntityEmbedCache {
 public:
  EntityEmbedCache(Tape& t, BoundParams& bind, ModelParams& params,
                   const EncoderConfig& cfg, const DropoutCtx& ctx)
      : t_(t), bind_(bind), params_(params), cfg_(cfg), ctx_(ctx) {}

  NodeId operator()(const FeatureRecord* e) {
    auto it = ids_.find(e);
    if (it != ids_.end()) return it->second;
    NodeId id = embed_entity(t_, bind_, *e, params_.encoder, cfg_, ctx_);
    ids_.emplace(e, id);
    return id;
  }

 private:
  Tape& t_;
  BoundParams& bind_;
  ModelParams& params_;
  const EncoderConfig& cfg_;
  DropoutCtx ctx_;
  std::unordered_map<const FeatureRecord*, NodeId> ids_;
};

Vec softmax_of(const std::vector<ScoredCandidate>& scored) {
  Vec psi(scored.size());
  for (size_t i = 0; i < scored.size(); ++i) psi[i] = scored[i].psi;
  double m = psi.maxCoeff();
  Vec e = (psi.array() - m).exp();
  return e / e.sum();
}

std::vector<Tensor> take_grads(std::vector<Parameter*> params) {
  std::vector<Tensor> grads;
  grads.reserve(params.size());
  for (Parameter* p : params) {
    grads.push_back(p->grad);
    p->zero_grad();
  }
  return grads;
}

// -log(phi_disc(e | m)) for the given entities, evaluation mode.
Vec rewards_from_disc(const FeatureRecord& mention,
                      std::span<const FeatureRecord* const> entities, ModelParams& disc,
                      const EncoderConfig& cfg) {
  std::vector<ScoredCandidate> scored = score_candidates(mention, entities, disc, cfg);
  Vec r(scored.size());
  for (size_t i = 0; i < scored.size(); ++i) {
    r[i] = -std::log(scored[i].phi + kLogFloor);
  }
  return r;
}

}  // namespace

std::string report_csv_header() {
  return "epoch,disc_loss,gen_reward,top1,top5,top10,top20,seconds";
}

std::string report_csv_row(const EpochReport& r) {
  std::string row = std::to_string(r.epoch) + "," + fmt(r.disc_loss) + ",";
  if (r.gen_reward.has_value()) row += fmt(*r.gen_reward);
  for (int k : {1, 5, 10, 20}) {
    auto it = r.val_top_k.find(k);
    row += ",";
    row += fmt(it == r.val_top_k.end() ? 0.0 : it->second);
  }
  char secs[32];
  std::snprintf(secs, sizeof(secs), "%.3f", r.wallclock_s);
  row += ",";
  row += secs;
  return row;
}

void write_reports_csv(const std::string& path, std::span<const EpochReport> reports) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path);
  out << report_csv_header() << "\n";
  for (const EpochReport& r : reports) out << report_csv_row(r) << "\n";
}

Vec sampling_distribution(const FeatureRecord& mention,
                          std::span<const FeatureRecord* const> pool, ModelParams& gen,
                          const EncoderConfig& cfg) {
  if (pool.empty()) throw ContractViolation("sampling_distribution: empty candidate pool");
  return softmax_of(score_candidates(mention, pool, gen, cfg));
}

std::vector<int> sample_indices(const Vec& probs, int n, Rng& rng) {
  std::vector<int> idx(n);
  for (int i = 0; i < n; ++i) idx[i] = rng.categorical(probs);
  return idx;
}

double discriminator_step(std::span<const TrainItem> items,
                          std::span<const std::vector<int>> negatives, ModelParams& disc,
                          const TrainConfig& tc, const EncoderConfig& cfg, Rng& rng) {
  if (items.size() != negatives.size()) {
    throw ContractViolation("discriminator_step: items/negatives size mismatch");
  }
  Tape t;
  BoundParams bind(t);
  DropoutCtx ctx{true, tc.dropout, &rng};
  EntityEmbedCache embed(t, bind, disc, cfg, ctx);

  std::vector<NodeId> weighted_losses;
  int64_t pair_count = 0;
  for (size_t i = 0; i < items.size(); ++i) {
    const TrainItem& item = items[i];
    if (negatives[i].empty()) continue;
    NodeId m_emb = embed_mention(t, bind, *item.mention, disc.encoder, cfg, ctx);
    NodeId phi_pos = match_pair(t, bind, m_emb, embed(item.gold), disc.match).phi;

    // negatives sampled with replacement: group repeats and weight the pair
    std::unordered_map<int, int> counts;
    for (int idx : negatives[i]) ++counts[idx];
    std::vector<std::pair<int, int>> ordered(counts.begin(), counts.end());
    std::sort(ordered.begin(), ordered.end());
    for (auto [idx, count] : ordered) {
      const FeatureRecord* neg = item.pool.at(idx);
      if (neg == item.gold) {
        throw ContractViolation("discriminator_step: gold offered as negative");
      }
      NodeId phi_neg = match_pair(t, bind, m_emb, embed(neg), disc.match).phi;
      NodeId hinge = relu(t, add_const(t, sub(t, phi_neg, phi_pos), tc.margin));
      weighted_losses.push_back(count == 1 ? hinge : scale(t, hinge, count));
      pair_count += count;
    }
  }
  if (pair_count == 0) return 0.0;

  NodeId total = sum(t, concat(t, weighted_losses));
  NodeId mean = scale(t, total, 1.0 / static_cast<double>(pair_count));
  t.backward(mean);
  double loss = t.value(mean).scalar_value();
  std::vector<Parameter*> params = disc.all();
  sgd_step(params, tc.lr, tc.clip);
  return loss;
}

NodeId reinforce_exact_surrogate(Tape& t, NodeId probs, const Vec& rewards) {
  NodeId r = t.leaf(Tensor::from_vec(rewards));
  return sum(t, mul(t, probs, r));
}

NodeId reinforce_sample_surrogate(Tape& t, NodeId probs, const Vec& weights) {
  NodeId w = t.leaf(Tensor::from_vec(weights));
  return sum(t, mul(t, log(t, probs), w));
}

double generator_step(std::span<const TrainItem> items, ModelParams& gen,
                      ModelParams& disc, const TrainConfig& tc, const EncoderConfig& cfg,
                      Rng& rng) {
  // phase 1: sample from the current policy and collect rewards, both in
  // evaluation mode
  struct Sampled {
    const TrainItem* item = nullptr;
    std::vector<int> unique_idx;
    Vec weights;  // (count / n) * reward per unique index
  };
  std::vector<Sampled> sampled;
  double reward_sum = 0.0;
  int64_t reward_count = 0;
  for (const TrainItem& item : items) {
    if (item.pool.empty()) continue;
    Vec probs = sampling_distribution(*item.mention, item.pool, gen, cfg);
    std::vector<int> draws = sample_indices(probs, tc.negatives, rng);
    std::unordered_map<int, int> counts;
    for (int d : draws) ++counts[d];
    Sampled s;
    s.item = &item;
    std::vector<std::pair<int, int>> ordered(counts.begin(), counts.end());
    std::sort(ordered.begin(), ordered.end());
    std::vector<const FeatureRecord*> uniq;
    for (auto [idx, count] : ordered) {
      s.unique_idx.push_back(idx);
      uniq.push_back(item.pool[idx]);
    }
    Vec r = rewards_from_disc(*item.mention, uniq, disc, cfg);
    s.weights = Vec(ordered.size());
    for (size_t u = 0; u < ordered.size(); ++u) {
      s.weights[u] = (static_cast<double>(ordered[u].second) /
                      static_cast<double>(tc.negatives)) *
                     r[u];
      reward_sum += ordered[u].second * r[u];
      reward_count += ordered[u].second;
    }
    sampled.push_back(std::move(s));
  }
  if (sampled.empty()) return 0.0;

  // phase 2: policy-gradient surrogate under the generator, training mode.
  // The discriminator only contributed constants, so no gradient reaches it.
  Tape t;
  BoundParams bind(t);
  DropoutCtx ctx{true, tc.dropout, &rng};
  EntityEmbedCache embed(t, bind, gen, cfg, ctx);

  std::vector<NodeId> per_mention;
  for (const Sampled& s : sampled) {
    const TrainItem& item = *s.item;
    NodeId m_emb = embed_mention(t, bind, *item.mention, gen.encoder, cfg, ctx);
    std::vector<NodeId> psi_nodes;
    psi_nodes.reserve(item.pool.size());
    for (const FeatureRecord* e : item.pool) {
      psi_nodes.push_back(match_pair(t, bind, m_emb, embed(e), gen.match).psi);
    }
    NodeId probs = softmax(t, concat(t, psi_nodes));
    Vec weights = Vec::Zero(static_cast<Eigen::Index>(item.pool.size()));
    for (size_t u = 0; u < s.unique_idx.size(); ++u) {
      weights[s.unique_idx[u]] = s.weights[u];
    }
    per_mention.push_back(reinforce_sample_surrogate(t, probs, weights));
  }
  NodeId surrogate = scale(t, sum(t, concat(t, per_mention)),
                           1.0 / static_cast<double>(per_mention.size()));
  t.backward(surrogate);
  std::vector<Parameter*> params = gen.all();
  sgd_step(params, tc.lr, tc.clip);
  return reward_sum / static_cast<double>(reward_count);
}

std::vector<Tensor> exact_generator_gradient(const TrainItem& item, ModelParams& gen,
                                             ModelParams& disc, const EncoderConfig& cfg) {
  if (item.pool.empty()) throw ContractViolation("exact_generator_gradient: empty pool");
  if (item.pool.size() > 64) {
    throw ContractViolation("exact_generator_gradient: pool too large to enumerate");
  }
  Vec rewards = rewards_from_disc(*item.mention, item.pool, disc, cfg);

  Tape t;
  BoundParams bind(t);
  EntityEmbedCache embed(t, bind, gen, cfg, DropoutCtx{});
  NodeId m_emb = embed_mention(t, bind, *item.mention, gen.encoder, cfg);
  std::vector<NodeId> psi_nodes;
  for (const FeatureRecord* e : item.pool) {
    psi_nodes.push_back(match_pair(t, bind, m_emb, embed(e), gen.match).psi);
  }
  NodeId probs = softmax(t, concat(t, psi_nodes));
  t.backward(reinforce_exact_surrogate(t, probs, rewards));
  return take_grads(gen.all());
}

std::vector<Tensor> monte_carlo_generator_gradient(const TrainItem& item, ModelParams& gen,
                                                   ModelParams& disc,
                                                   const EncoderConfig& cfg,
                                                   int64_t num_samples, Rng& rng) {
  if (item.pool.empty() || num_samples < 1) {
    throw ContractViolation("monte_carlo_generator_gradient: bad inputs");
  }
  Vec rewards = rewards_from_disc(*item.mention, item.pool, disc, cfg);

  Tape t;
  BoundParams bind(t);
  EntityEmbedCache embed(t, bind, gen, cfg, DropoutCtx{});
  NodeId m_emb = embed_mention(t, bind, *item.mention, gen.encoder, cfg);
  std::vector<NodeId> psi_nodes;
  for (const FeatureRecord* e : item.pool) {
    psi_nodes.push_back(match_pair(t, bind, m_emb, embed(e), gen.match).psi);
  }
  NodeId probs = softmax(t, concat(t, psi_nodes));

  // empirical draw frequencies; averaging per-sample gradients grouped by
  // candidate is identical to averaging them one by one
  const Vec& p = t.value(probs).data();
  std::vector<int64_t> counts(item.pool.size(), 0);
  for (int64_t s = 0; s < num_samples; ++s) ++counts[rng.categorical(p)];
  Vec weights(item.pool.size());
  for (size_t i = 0; i < item.pool.size(); ++i) {
    weights[i] =
        (static_cast<double>(counts[i]) / static_cast<double>(num_samples)) * rewards[i];
  }
  t.backward(reinforce_sample_surrogate(t, probs, weights));
  return take_grads(gen.all());
}

namespace {

struct ValItem {
  const FeatureRecord* mention;
  CandidateSet candidates;
};

std::vector<size_t> chunk_bounds(size_t n, size_t batch) {
  std::vector<size_t> bounds;
  for (size_t at = 0; at < n; at += batch) bounds.push_back(at);
  bounds.push_back(n);
  return bounds;
}

}  // namespace

TrainResult train(const Dataset& ds, const RunConfig& cfg_in, const EpochCallback& cb,
                  const TrainStart& start) {
  RunConfig cfg = cfg_in;
  cfg.apply_ablation();
  cfg.encoder.validate();
  cfg.train.validate();
  const TrainConfig& tc = cfg.train;
  const EncoderConfig& enc = cfg.encoder;
  if (enc.feature_dim_in != ds.manifest.feature_dim) {
    throw ContractViolation("encoder feature_dim_in " + std::to_string(enc.feature_dim_in) +
                            " != dataset feature_dim " +
                            std::to_string(ds.manifest.feature_dim));
  }

  Rng init_rng = Rng(tc.seed).stream(1);
  TrainResult result{ModelParams::init(enc, init_rng), ModelParams::init(enc, init_rng), {}};
  if (start.disc.has_value()) result.disc = *start.disc;
  if (start.gen.has_value()) result.gen = *start.gen;
  Rng rng = Rng(tc.seed).stream(2);
  if (start.rng_state.has_value()) rng.set_state(*start.rng_state);

  // candidate preparation is deterministic and reused across epochs
  std::vector<size_t> train_pool_idx = ds.train_idx;
  size_t keep = static_cast<size_t>(
      std::llround(tc.train_fraction * static_cast<double>(train_pool_idx.size())));
  keep = std::max<size_t>(std::min(keep, train_pool_idx.size()), 1);
  train_pool_idx.resize(keep);

  std::vector<TrainItem> items;
  items.reserve(train_pool_idx.size());
  for (size_t idx : train_pool_idx) {
    const FeatureRecord& m = ds.mentions[idx];
    CandidateSet cs = generate_candidates(m.surface_name, ds.entity_names, tc.candidate_size);
    cs = ensure_gold(cs, m.gold_id, ds.entity(m.gold_id).surface_name, m.surface_name);
    TrainItem item;
    item.mention = &m;
    item.gold = &ds.entity(m.gold_id);
    for (const auto& e : cs.entries) {
      if (e.entity_id != m.gold_id) item.pool.push_back(&ds.entity(e.entity_id));
    }
    if (!item.pool.empty()) items.push_back(std::move(item));
  }

  std::vector<ValItem> val_items;
  val_items.reserve(ds.validation_idx.size());
  for (size_t idx : ds.validation_idx) {
    const FeatureRecord& m = ds.mentions[idx];
    val_items.push_back(
        {&m, generate_candidates(m.surface_name, ds.entity_names, tc.candidate_size)});
  }

  const int total_epochs =
      tc.epochs + (tc.mode == TrainMode::pgmel_pretrain ? tc.warmup_epochs : 0);
  const std::vector<int> ks = {1, 5, 10, 20};

  for (int epoch = start.completed_epochs + 1; epoch <= total_epochs; ++epoch) {
    auto t0 = std::chrono::steady_clock::now();
    bool adversarial =
        tc.mode == TrainMode::pgmel ||
        (tc.mode == TrainMode::pgmel_pretrain && epoch > tc.warmup_epochs);

    // discriminator phase
    std::vector<size_t> order(items.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;
    rng.shuffle(order);

    double loss_sum = 0.0;
    int64_t loss_pairs = 0;
    std::vector<size_t> bounds = chunk_bounds(order.size(), tc.batch_size);
    for (size_t b = 0; b + 1 < bounds.size(); ++b) {
      std::vector<TrainItem> batch;
      std::vector<std::vector<int>> negs;
      for (size_t i = bounds[b]; i < bounds[b + 1]; ++i) {
        const TrainItem& item = items[order[i]];
        std::vector<int> idxs;
        if (adversarial) {
          Vec probs = sampling_distribution(*item.mention, item.pool, result.gen, enc);
          idxs = sample_indices(probs, tc.negatives, rng);
        } else {
          idxs.resize(tc.negatives);
          for (int k = 0; k < tc.negatives; ++k) {
            idxs[k] = static_cast<int>(rng.uniform_int(item.pool.size()));
          }
        }
        batch.push_back(item);
        negs.push_back(std::move(idxs));
      }
      try {
        double loss = discriminator_step(batch, negs, result.disc, tc, enc, rng);
        int64_t pairs = static_cast<int64_t>(batch.size()) * tc.negatives;
        loss_sum += loss * static_cast<double>(pairs);
        loss_pairs += pairs;
      } catch (const NumericFault& e) {
        std::cerr << "epoch " << epoch << ": discriminator step aborted: " << e.what()
                  << "\n";
        zero_grads(result.disc.all());
      }
    }

    // generator phase
    std::optional<double> mean_reward;
    if (adversarial) {
      rng.shuffle(order);
      double reward_sum = 0.0;
      int64_t reward_batches = 0;
      for (size_t b = 0; b + 1 < bounds.size(); ++b) {
        std::vector<TrainItem> batch;
        for (size_t i = bounds[b]; i < bounds[b + 1]; ++i) batch.push_back(items[order[i]]);
        try {
          reward_sum += generator_step(batch, result.gen, result.disc, tc, enc, rng);
          ++reward_batches;
        } catch (const NumericFault& e) {
          std::cerr << "epoch " << epoch << ": generator step aborted: " << e.what()
                    << "\n";
          zero_grads(result.gen.all());
        }
      }
      mean_reward = reward_batches > 0 ? reward_sum / reward_batches : 0.0;
    }

    // validation
    EpochReport report;
    report.epoch = epoch;
    report.disc_loss = loss_pairs > 0 ? loss_sum / static_cast<double>(loss_pairs) : 0.0;
    report.gen_reward = mean_reward;
    if (!val_items.empty()) {
      std::vector<LinkResult> results;
      results.reserve(val_items.size());
      for (const ValItem& v : val_items) {
        results.push_back(link_against(*v.mention, v.candidates, ds, result.disc, enc));
      }
      report.val_top_k = top_k_accuracy(results, ks);
    } else {
      for (int k : ks) report.val_top_k[k] = 0.0;
    }
    report.wallclock_s =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    result.reports.push_back(report);
    if (cb) cb(report, result.disc, result.gen, rng);
  }
  return result;
}

}  // namespace pgmel
