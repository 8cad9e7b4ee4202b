#pragma once

#include <functional>
#include <optional>
#include <span>

#include "pgmel/data.hpp"
#include "pgmel/eval.hpp"
#include "pgmel/rng.hpp"
#include "pgmel/scoring.hpp"

namespace pgmel {

struct EpochReport {
  int epoch = 0;
  double disc_loss = 0.0;
  std::optional<double> gen_reward;  // empty in discriminator-only phases
  std::map<int, double> val_top_k;
  double wallclock_s = 0.0;
};

/// Report CSV: epoch,disc_loss,gen_reward,top1,top5,top10,top20,seconds.
/// gen_reward stays empty on discriminator-only epochs.
void write_reports_csv(const std::string& path, std::span<const EpochReport> reports);
std::string report_csv_header();
std::string report_csv_row(const EpochReport& r);

/// One training mention with its prepared candidates. `pool` is the candidate
/// set minus the gold entity, the population negatives are drawn from.
struct TrainItem {
  const FeatureRecord* mention = nullptr;
  const FeatureRecord* gold = nullptr;
  std::vector<const FeatureRecord*> pool;
};

/// Generator sampling distribution over the pool: softmax of the raw psi
/// scores (not phi). Strictly positive, sums to 1.
Vec sampling_distribution(const FeatureRecord& mention,
                          std::span<const FeatureRecord* const> pool, ModelParams& gen,
                          const EncoderConfig& cfg);

/// n i.i.d. draws (with replacement) from a probability vector.
std::vector<int> sample_indices(const Vec& probs, int n, Rng& rng);

/// One discriminator SGD step over a batch. `negatives[i]` are the sampled
/// negatives for items[i]; loss is the mean over all (mention, negative)
/// pairs of max(0, margin + phi(neg) - phi(gold)). Returns that mean.
double discriminator_step(std::span<const TrainItem> items,
                          std::span<const std::vector<int>> negatives, ModelParams& disc,
                          const TrainConfig& tc, const EncoderConfig& cfg, Rng& rng);

/// One REINFORCE step on the generator with the discriminator frozen: draws
/// negatives from the generator's distribution, scores them with the
/// discriminator for rewards r = -log(phi), and descends the policy-gradient
/// estimate mean[grad log P(sample) * r]. Returns the mean sampled reward.
double generator_step(std::span<const TrainItem> items, ModelParams& gen,
                      ModelParams& disc, const TrainConfig& tc, const EncoderConfig& cfg,
                      Rng& rng);

/// Exact gradient of the generator objective by enumerating the pool
/// (<= 64 candidates): grad sum_e P(e|m) * r(e). Tensors follow gen.all()
/// order. Evaluation mode (no dropout), which is also what the Monte Carlo
/// comparison uses.
std::vector<Tensor> exact_generator_gradient(const TrainItem& item, ModelParams& gen,
                                             ModelParams& disc, const EncoderConfig& cfg);

/// Monte Carlo REINFORCE estimate over num_samples draws, for the estimator
/// correctness check. Same parameter order as exact_generator_gradient.
std::vector<Tensor> monte_carlo_generator_gradient(const TrainItem& item, ModelParams& gen,
                                                   ModelParams& disc,
                                                   const EncoderConfig& cfg,
                                                   int64_t num_samples, Rng& rng);

/// Surrogate whose gradient is the exact objective gradient: sum_e P_e * r_e
/// with constant rewards. Exposed for estimator tests against hand-worked
/// derivatives.
NodeId reinforce_exact_surrogate(Tape& t, NodeId probs, const Vec& rewards);

/// Surrogate whose gradient is the sampled REINFORCE estimate:
/// sum_e w_e * log P_e with w_e = (draws of e / total draws) * r_e.
NodeId reinforce_sample_surrogate(Tape& t, NodeId probs, const Vec& weights);

struct TrainResult {
  ModelParams disc;
  ModelParams gen;
  std::vector<EpochReport> reports;
};

/// Called after every epoch with the fresh report, both models, and the
/// training RNG (for checkpointing).
using EpochCallback = std::function<void(const EpochReport&, const ModelParams& disc,
                                         const ModelParams& gen, const Rng& rng)>;

/// Warm-start state for resuming or for seeding the discriminator from a
/// pretrain checkpoint.
struct TrainStart {
  std::optional<ModelParams> disc;
  std::optional<ModelParams> gen;
  std::optional<Rng::State> rng_state;
  int completed_epochs = 0;
};

/// Alternating adversarial training. Per epoch: discriminator phase over all
/// batches (negatives from the generator, or uniform in mel-rn mode and
/// during pretrain warmup), then a generator phase (skipped when not
/// adversarial), then Top-k on the validation split. In pgmel-pretrain mode
/// the first train.warmup_epochs epochs run discriminator-only with random
/// negatives; train.epochs adversarial epochs follow.
TrainResult train(const Dataset& ds, const RunConfig& cfg, const EpochCallback& cb = {},
                  const TrainStart& start = {});

}  // namespace pgmel
