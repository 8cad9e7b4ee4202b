#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>

#include "pgmel/adversarial.hpp"
#include "pgmel/checkpoint.hpp"
#include "pgmel/gradcheck_suite.hpp"
#include "pgmel/synth.hpp"

namespace fs = std::filesystem;
using namespace pgmel;

namespace {

uint64_t env_seed() {
  const char* s = std::getenv("PGMEL_SEED");
  if (s == nullptr) return 0;
  return std::strtoull(s, nullptr, 10);
}

std::string ckpt_name(int epoch) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "epoch_%03d.ckpt", epoch);
  return buf;
}

Checkpoint make_checkpoint(const RunConfig& cfg, int epoch, const Rng& rng,
                           ModelParams& disc, ModelParams& gen) {
  Checkpoint cp;
  cp.config = cfg;
  cp.epoch = epoch;
  cp.rng_state = rng.state();
  cp.pack("disc", disc);
  cp.pack("gen", gen);
  return cp;
}

ModelParams params_from_checkpoint(const Checkpoint& cp, const std::string& prefix,
                                   const EncoderConfig& enc) {
  Rng scratch(0);
  ModelParams p = ModelParams::init(enc, scratch);
  cp.unpack(prefix, p);
  return p;
}

// ---------------------------------------------------------------------------

struct SynthArgs {
  SyntheticSpec spec;
  std::string preset = "separable";
  std::string out;
  std::optional<uint64_t> seed;
};

int run_synth(SynthArgs& a, const std::vector<std::pair<std::string, std::function<void(SyntheticSpec&)>>>& overrides) {
  a.spec = a.preset == "confusable" ? SyntheticSpec::confusable()
                                    : SyntheticSpec::separable();
  a.spec.preset = a.preset;
  for (const auto& [_, apply] : overrides) apply(a.spec);
  a.spec.seed = a.seed.value_or(env_seed());
  a.spec.validate();

  Dataset ds = generate_synthetic(a.spec);
  save_dataset(ds, a.out);
  int min_cluster = a.spec.num_entities / a.spec.num_clusters;
  std::cout << "wrote " << (fs::path(a.out) / "manifest.json").string() << "\n"
            << "preset: " << a.spec.preset << "\n"
            << "entities: " << ds.entities.size() << " in " << a.spec.num_clusters
            << " clusters (>= " << min_cluster << " each)\n"
            << "mentions: " << ds.mentions.size() << " (splits " << ds.train_idx.size()
            << "/" << ds.validation_idx.size() << "/" << ds.test_idx.size() << ")\n";
  return 0;
}

int run_train(RunConfig cfg, const std::string& resume_path) {
  Dataset ds = load_dataset(cfg.data_manifest);
  cfg.encoder.feature_dim_in = ds.manifest.feature_dim;

  TrainStart start;
  if (!resume_path.empty()) {
    Checkpoint cp = load_checkpoint(resume_path);
    RunConfig resumed = cp.config;
    resumed.out_dir = cfg.out_dir;  // allow a fresh output directory
    cfg = resumed;
    cfg.apply_ablation();
    start.disc = params_from_checkpoint(cp, "disc", cfg.encoder);
    start.gen = params_from_checkpoint(cp, "gen", cfg.encoder);
    start.rng_state = cp.rng_state;
    start.completed_epochs = cp.epoch;
    std::cout << "resuming from " << resume_path << " after epoch " << cp.epoch << "\n";
  } else if (!cfg.init_disc_from.empty()) {
    Checkpoint cp = load_checkpoint(cfg.init_disc_from);
    RunConfig probe = cfg;
    probe.apply_ablation();
    start.disc = params_from_checkpoint(cp, "disc", probe.encoder);
    std::cout << "discriminator initialized from " << cfg.init_disc_from << "\n";
  }

  fs::create_directories(cfg.out_dir);
  {
    RunConfig resolved = cfg;
    resolved.apply_ablation();
    resolved.save((fs::path(cfg.out_dir) / "config.json").string());
  }

  auto cb = [&cfg](const EpochReport& report, const ModelParams& disc,
                   const ModelParams& gen, const Rng& rng) {
    Checkpoint cp = make_checkpoint(cfg, report.epoch, rng,
                                    const_cast<ModelParams&>(disc),
                                    const_cast<ModelParams&>(gen));
    save_checkpoint(cp, (fs::path(cfg.out_dir) / ckpt_name(report.epoch)).string());
    std::cout << report_csv_row(report) << "\n";
  };

  std::cout << report_csv_header() << "\n";
  TrainResult res = train(ds, cfg, cb, start);
  write_reports_csv((fs::path(cfg.out_dir) / "report.csv").string(), res.reports);

  int last_epoch = res.reports.empty() ? start.completed_epochs : res.reports.back().epoch;
  Rng rng_for_final(cfg.train.seed);  // placeholder when no epoch ran
  Checkpoint final_cp = make_checkpoint(cfg, last_epoch, rng_for_final, res.disc, res.gen);
  if (!res.reports.empty()) {
    // reuse the state already written for the last epoch
    Checkpoint last =
        load_checkpoint((fs::path(cfg.out_dir) / ckpt_name(last_epoch)).string());
    final_cp.rng_state = last.rng_state;
  } else if (start.rng_state.has_value()) {
    final_cp.rng_state = *start.rng_state;
  } else {
    final_cp.rng_state = Rng(cfg.train.seed).stream(2).state();
  }
  save_checkpoint(final_cp, (fs::path(cfg.out_dir) / "final.ckpt").string());
  std::cout << "wrote " << (fs::path(cfg.out_dir) / "report.csv").string() << "\n";
  return 0;
}

int run_eval(const std::string& ckpt_path, const std::string& manifest,
             const std::string& split, const std::string& out_csv,
             const std::string& per_mention_csv) {
  Checkpoint cp = load_checkpoint(ckpt_path);
  RunConfig cfg = cp.config;
  cfg.apply_ablation();
  Dataset ds = load_dataset(manifest);
  cfg.encoder.feature_dim_in = ds.manifest.feature_dim;
  ModelParams disc = params_from_checkpoint(cp, "disc", cfg.encoder);

  std::vector<LinkResult> results;
  for (size_t idx : ds.split_indices(split)) {
    results.push_back(
        link(ds.mentions[idx], ds, disc, cfg.encoder, cfg.train.candidate_size));
  }
  if (results.empty()) throw DataError("split " + split + " has no mentions");

  const std::vector<int> ks = {1, 5, 10, 20};
  std::map<int, double> acc = top_k_accuracy(results, ks);
  for (const auto& [k, v] : acc) {
    std::cout << "top-" << k << " " << v << "\n";
  }
  if (!out_csv.empty()) write_topk_csv(out_csv, acc, split);
  if (!per_mention_csv.empty()) write_link_results_csv(per_mention_csv, results);
  return 0;
}

int run_gradcheck(uint64_t seed, int cases) {
  std::vector<GradcheckCase> report = gradcheck_suite(seed, cases);
  bool ok = true;
  int total = 0;
  std::printf("%-14s %6s  %s\n", "op", "cases", "max_rel_err");
  for (const GradcheckCase& g : report) {
    std::printf("%-14s %6d  %.3e%s\n", g.name.c_str(), g.cases, g.max_error,
                g.max_error <= 1e-4 ? "" : "  FAIL");
    ok = ok && g.max_error <= 1e-4;
    total += g.cases;
  }
  std::printf("%d cases, threshold 1e-4: %s\n", total, ok ? "pass" : "FAIL");
  return ok ? 0 : 1;
}

int run_ablate(const std::string& manifest, const std::string& seeds_arg,
               const std::string& out_dir, TrainConfig budget) {
  Dataset ds = load_dataset(manifest);

  std::vector<uint64_t> seeds;
  std::stringstream ss(seeds_arg);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    if (!tok.empty()) seeds.push_back(std::strtoull(tok.c_str(), nullptr, 10));
  }
  if (seeds.empty()) throw ContractViolation("ablate: at least one seed required");

  struct Variant {
    std::string name;
    TrainMode mode;
    Ablation ablation;
  };
  const std::vector<Variant> variants = {
      {"pgmel", TrainMode::pgmel, Ablation::full},
      {"mel-rn", TrainMode::mel_rn, Ablation::full},
      {"text-only", TrainMode::pgmel, Ablation::text_only},
      {"entity-text-only", TrainMode::pgmel, Ablation::entity_text_only},
      {"no-gated-fusion", TrainMode::pgmel, Ablation::no_gated_fusion},
      {"cnn-k1", TrainMode::pgmel, Ablation::cnn_k1},
      {"cnn-k12", TrainMode::pgmel, Ablation::cnn_k12},
  };
  const std::vector<int> ks = {1, 5, 10, 20};

  fs::create_directories(out_dir);
  std::ofstream out(fs::path(out_dir) / "ablation.csv");
  out << "variant,seeds";
  for (int k : ks) out << ",top" << k << "_mean,top" << k << "_sd";
  out << "\n";

  for (const Variant& v : variants) {
    std::map<int, std::vector<double>> finals;
    int completed = 0;
    for (uint64_t seed : seeds) {
      RunConfig cfg;
      cfg.train = budget;
      cfg.train.mode = v.mode;
      cfg.train.ablation = v.ablation;
      cfg.train.seed = seed;
      cfg.encoder.feature_dim_in = ds.manifest.feature_dim;
      try {
        TrainResult res = train(ds, cfg);
        if (res.reports.empty()) throw DataError("no epochs ran");
        for (int k : ks) finals[k].push_back(res.reports.back().val_top_k.at(k));
        ++completed;
      } catch (const std::exception& e) {
        std::cerr << v.name << " seed " << seed << " failed: " << e.what() << "\n";
      }
    }
    out << v.name << "," << completed;
    for (int k : ks) {
      double mean = 0.0, sd = 0.0;
      const auto& xs = finals[k];
      if (!xs.empty()) {
        for (double x : xs) mean += x;
        mean /= static_cast<double>(xs.size());
        for (double x : xs) sd += (x - mean) * (x - mean);
        sd = xs.size() > 1 ? std::sqrt(sd / static_cast<double>(xs.size() - 1)) : 0.0;
      }
      char buf[64];
      std::snprintf(buf, sizeof(buf), ",%.4f,%.4f", mean, sd);
      out << buf;
    }
    out << "\n";
    std::cout << "variant " << v.name << ": " << completed << "/" << seeds.size()
              << " runs\n";
  }
  std::cout << "wrote " << (fs::path(out_dir) / "ablation.csv").string() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"adversarial hard-negative training for multimodal entity linking"};
  app.require_subcommand(1);

  // --- synth
  auto* synth = app.add_subcommand("synth", "generate a synthetic dataset");
  SynthArgs sa;
  std::vector<std::pair<std::string, std::function<void(SyntheticSpec&)>>> synth_overrides;
  synth->add_option("--preset", sa.preset, "separable or confusable")
      ->check(CLI::IsMember({"separable", "confusable"}));
  synth->add_option("--out", sa.out, "output directory")->required();
  uint64_t synth_seed = 0;
  auto* synth_seed_opt = synth->add_option("--seed", synth_seed, "generator seed");
  int ne = 0, nc = 0, mpe = 0, nl = 0, nedits = -1, tc = 0, fd = 0;
  double sigma = -1.0;
  auto* o_ne = synth->add_option("--num-entities", ne);
  auto* o_nc = synth->add_option("--num-clusters", nc);
  auto* o_mpe = synth->add_option("--mentions-per-entity", mpe);
  auto* o_sigma = synth->add_option("--sigma", sigma, "feature noise");
  auto* o_nl = synth->add_option("--name-len", nl);
  auto* o_nedits = synth->add_option("--name-edits", nedits);
  auto* o_tc = synth->add_option("--token-count", tc);
  auto* o_fd = synth->add_option("--feature-dim", fd);

  // --- train
  auto* tr = app.add_subcommand("train", "train discriminator and generator");
  std::string tr_data, tr_out, tr_config, tr_resume, tr_init_disc;
  tr->add_option("--data", tr_data, "dataset manifest.json")->required();
  tr->add_option("--out", tr_out, "run output directory")->required();
  tr->add_option("--config", tr_config, "run config JSON (flags override)");
  tr->add_option("--resume", tr_resume, "checkpoint to resume from");
  tr->add_option("--init-disc-from", tr_init_disc,
                 "checkpoint whose discriminator seeds this run");
  std::string tr_mode, tr_ablation, tr_gated;
  double tr_lr = 0, tr_margin = 0, tr_clip = 0, tr_frac = 0, tr_dropout = 0;
  int tr_batch = 0, tr_neg = 0, tr_epochs = 0, tr_cand = 0, tr_warmup = 0;
  int tr_d1 = 0, tr_d2 = 0, tr_d3 = 0;
  uint64_t tr_seed = 0;
  auto* o_mode = tr->add_option("--mode", tr_mode)
                     ->check(CLI::IsMember({"pgmel", "mel-rn", "pgmel-pretrain"}));
  auto* o_abl = tr->add_option("--ablation", tr_ablation)
                    ->check(CLI::IsMember({"full", "text-only", "entity-text-only",
                                           "no-gated-fusion", "cnn-k1", "cnn-k12"}));
  auto* o_lr = tr->add_option("--lr", tr_lr);
  auto* o_batch = tr->add_option("--batch-size", tr_batch);
  auto* o_margin = tr->add_option("--margin", tr_margin);
  auto* o_neg = tr->add_option("--negatives", tr_neg);
  auto* o_epochs = tr->add_option("--epochs", tr_epochs);
  auto* o_tr_seed = tr->add_option("--seed", tr_seed);
  auto* o_clip = tr->add_option("--clip", tr_clip);
  auto* o_cand = tr->add_option("--candidates", tr_cand);
  auto* o_warm = tr->add_option("--warmup-epochs", tr_warmup);
  auto* o_frac = tr->add_option("--train-fraction", tr_frac);
  auto* o_drop = tr->add_option("--dropout", tr_dropout);
  auto* o_d1 = tr->add_option("--d1", tr_d1);
  auto* o_d2 = tr->add_option("--d2", tr_d2);
  auto* o_d3 = tr->add_option("--d3", tr_d3);
  auto* o_gated = tr->add_option("--gated-modality", tr_gated)
                      ->check(CLI::IsMember({"text", "vision"}));

  // --- eval
  auto* ev = app.add_subcommand("eval", "evaluate a checkpoint on a split");
  std::string ev_ckpt, ev_data, ev_split = "test", ev_out, ev_per;
  ev->add_option("--checkpoint", ev_ckpt)->required();
  ev->add_option("--data", ev_data)->required();
  ev->add_option("--split", ev_split)
      ->check(CLI::IsMember({"train", "validation", "test"}));
  ev->add_option("--out", ev_out, "summary CSV path");
  ev->add_option("--per-mention", ev_per, "per-mention CSV path");

  // --- gradcheck
  auto* gc = app.add_subcommand("gradcheck", "finite-difference check of every op");
  uint64_t gc_seed = 0;
  int gc_cases = 8;
  auto* o_gc_seed = gc->add_option("--seed", gc_seed);
  gc->add_option("--cases", gc_cases, "random cases per op");

  // --- ablate
  auto* ab = app.add_subcommand("ablate", "train all variants, emit comparison table");
  std::string ab_data, ab_seeds = "1,2,3,4,5", ab_out;
  ab->add_option("--data", ab_data)->required();
  ab->add_option("--seeds", ab_seeds, "comma-separated seeds");
  ab->add_option("--out", ab_out)->required();
  TrainConfig ab_budget;
  ab->add_option("--epochs", ab_budget.epochs);
  ab->add_option("--lr", ab_budget.lr);
  ab->add_option("--batch-size", ab_budget.batch_size);
  ab->add_option("--negatives", ab_budget.negatives);
  ab->add_option("--candidates", ab_budget.candidate_size);
  ab->add_option("--dropout", ab_budget.dropout);
  ab->add_option("--warmup-epochs", ab_budget.warmup_epochs);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (synth->parsed()) {
      if (o_ne->count()) synth_overrides.push_back({"ne", [ne](SyntheticSpec& s) { s.num_entities = ne; }});
      if (o_nc->count()) synth_overrides.push_back({"nc", [nc](SyntheticSpec& s) { s.num_clusters = nc; }});
      if (o_mpe->count()) synth_overrides.push_back({"mpe", [mpe](SyntheticSpec& s) { s.mentions_per_entity = mpe; }});
      if (o_sigma->count()) synth_overrides.push_back({"sigma", [sigma](SyntheticSpec& s) { s.sigma = sigma; }});
      if (o_nl->count()) synth_overrides.push_back({"nl", [nl](SyntheticSpec& s) { s.name_len = nl; }});
      if (o_nedits->count()) synth_overrides.push_back({"nedits", [nedits](SyntheticSpec& s) { s.name_edits = nedits; }});
      if (o_tc->count()) synth_overrides.push_back({"tc", [tc](SyntheticSpec& s) { s.token_count = tc; }});
      if (o_fd->count()) synth_overrides.push_back({"fd", [fd](SyntheticSpec& s) { s.feature_dim = fd; }});
      if (synth_seed_opt->count()) sa.seed = synth_seed;
      return run_synth(sa, synth_overrides);
    }
    if (tr->parsed()) {
      RunConfig cfg;
      if (!tr_config.empty()) cfg = RunConfig::load(tr_config);
      cfg.data_manifest = tr_data;
      cfg.out_dir = tr_out;
      if (o_mode->count()) cfg.train.mode = parse_train_mode(tr_mode);
      if (o_abl->count()) cfg.train.ablation = parse_ablation(tr_ablation);
      if (o_lr->count()) cfg.train.lr = tr_lr;
      if (o_batch->count()) cfg.train.batch_size = tr_batch;
      if (o_margin->count()) cfg.train.margin = tr_margin;
      if (o_neg->count()) cfg.train.negatives = tr_neg;
      if (o_epochs->count()) cfg.train.epochs = tr_epochs;
      if (o_tr_seed->count()) {
        cfg.train.seed = tr_seed;
      } else if (std::getenv("PGMEL_SEED") != nullptr) {
        cfg.train.seed = env_seed();
      }
      if (o_clip->count()) cfg.train.clip = tr_clip;
      if (o_cand->count()) cfg.train.candidate_size = tr_cand;
      if (o_warm->count()) cfg.train.warmup_epochs = tr_warmup;
      if (o_frac->count()) cfg.train.train_fraction = tr_frac;
      if (o_drop->count()) cfg.train.dropout = tr_dropout;
      if (o_d1->count()) cfg.encoder.d1 = tr_d1;
      if (o_d2->count()) cfg.encoder.d2 = tr_d2;
      if (o_d3->count()) cfg.encoder.d3 = tr_d3;
      if (o_gated->count()) cfg.encoder.gated_modality = parse_modality(tr_gated);
      cfg.init_disc_from = tr_init_disc;
      cfg.train.validate();
      return run_train(cfg, tr_resume);
    }
    if (ev->parsed()) return run_eval(ev_ckpt, ev_data, ev_split, ev_out, ev_per);
    if (gc->parsed()) {
      uint64_t seed = o_gc_seed->count() ? gc_seed : env_seed();
      return run_gradcheck(seed, gc_cases);
    }
    if (ab->parsed()) return run_ablate(ab_data, ab_seeds, ab_out, ab_budget);
  } catch (const ContractViolation& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
