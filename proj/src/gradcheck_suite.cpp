#include "pgmel/gradcheck_suite.hpp"

#include <cmath>

#include "pgmel/rng.hpp"
#include "pgmel/scoring.hpp"

namespace pgmel {

namespace {

constexpr double kEps = 1e-5;

Tensor rand_tensor(std::vector<Eigen::Index> shape, Rng& rng, double lo = -1.5,
                   double hi = 1.5) {
  Tensor t = Tensor::zeros(std::move(shape));
  for (Eigen::Index i = 0; i < t.size(); ++i) t[i] = rng.uniform(lo, hi);
  return t;
}

// keeps points away from the relu/leaky-relu kink, where central differences
// straddle the nondifferentiability
Tensor rand_away_from_zero(std::vector<Eigen::Index> shape, Rng& rng) {
  Tensor t = rand_tensor(std::move(shape), rng);
  for (Eigen::Index i = 0; i < t.size(); ++i) {
    if (std::abs(t[i]) < 0.05) t[i] = t[i] < 0 ? -0.1 : 0.1;
  }
  return t;
}

// separates each column's top two entries so the pooling winner is stable
// under the probe step
Tensor rand_pool_input(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
  Tensor t = rand_tensor({rows, cols}, rng);
  for (Eigen::Index j = 0; j < cols; ++j) {
    Eigen::Index winner;
    t.mat().col(j).maxCoeff(&winner);
    t.mat()(winner, j) += 0.01;
  }
  return t;
}

struct Case {
  std::string name;
  TapedFn fn;
  std::vector<Tensor> point;
};

std::vector<Case> primitive_cases(Rng& rng) {
  std::vector<Case> cases;
  auto idx = [&](int lo, int hi) {
    return static_cast<Eigen::Index>(lo + static_cast<int>(rng.uniform_int(hi - lo + 1)));
  };

  {
    Eigen::Index k = idx(2, 5), n = idx(1, 4);
    cases.push_back({"matmul.vec",
                     [](Tape& t, const std::vector<NodeId>& in) {
                       return sum(t, matmul(t, in[0], in[1]));
                     },
                     {rand_tensor({k}, rng), rand_tensor({k, n}, rng)}});
  }
  {
    Eigen::Index m = idx(2, 4), k = idx(2, 5), n = idx(1, 4);
    cases.push_back({"matmul.mat",
                     [](Tape& t, const std::vector<NodeId>& in) {
                       return sum(t, matmul(t, in[0], in[1]));
                     },
                     {rand_tensor({m, k}, rng), rand_tensor({k, n}, rng)}});
  }
  {
    Eigen::Index n = idx(2, 6);
    cases.push_back({"add",
                     [](Tape& t, const std::vector<NodeId>& in) {
                       return sum(t, add(t, in[0], in[1]));
                     },
                     {rand_tensor({n}, rng), rand_tensor({n}, rng)}});
  }
  {
    Eigen::Index m = idx(2, 4), n = idx(2, 5);
    cases.push_back({"add.bias",
                     [](Tape& t, const std::vector<NodeId>& in) {
                       return sum(t, tanh(t, add(t, in[0], in[1])));
                     },
                     {rand_tensor({m, n}, rng), rand_tensor({n}, rng)}});
  }
  {
    Eigen::Index a = idx(1, 3), b = idx(1, 3), c = idx(1, 3);
    cases.push_back({"concat",
                     [](Tape& t, const std::vector<NodeId>& in) {
                       std::vector<NodeId> parts = {in[0], in[1], in[2]};
                       return sum(t, tanh(t, concat(t, parts)));
                     },
                     {rand_tensor({a}, rng), rand_tensor({b}, rng), rand_tensor({c}, rng)}});
  }
  {
    Eigen::Index n = idx(2, 6);
    cases.push_back({"mul",
                     [](Tape& t, const std::vector<NodeId>& in) {
                       return sum(t, mul(t, in[0], in[1]));
                     },
                     {rand_tensor({n}, rng), rand_tensor({n}, rng)}});
  }
  {
    Eigen::Index n = idx(2, 6);
    cases.push_back({"tanh",
                     [](Tape& t, const std::vector<NodeId>& in) {
                       return sum(t, tanh(t, in[0]));
                     },
                     {rand_tensor({n}, rng)}});
  }
  {
    Eigen::Index n = idx(2, 6);
    cases.push_back({"sigmoid",
                     [](Tape& t, const std::vector<NodeId>& in) {
                       return sum(t, sigmoid(t, in[0]));
                     },
                     {rand_tensor({n}, rng)}});
  }
  {
    Eigen::Index n = idx(2, 6);
    cases.push_back({"leaky_relu",
                     [](Tape& t, const std::vector<NodeId>& in) {
                       return sum(t, leaky_relu(t, in[0], 0.01));
                     },
                     {rand_away_from_zero({n}, rng)}});
  }
  {
    Eigen::Index n = idx(2, 6);
    cases.push_back({"relu",
                     [](Tape& t, const std::vector<NodeId>& in) {
                       return sum(t, relu(t, in[0]));
                     },
                     {rand_away_from_zero({n}, rng)}});
  }
  {
    int k = static_cast<int>(rng.uniform_int(3)) + 1;
    Eigen::Index L = idx(k + 1, k + 5), F = idx(2, 4), d = idx(1, 3);
    cases.push_back({"conv1d",
                     [k](Tape& t, const std::vector<NodeId>& in) {
                       return sum(t, conv1d(t, in[0], in[1], k));
                     },
                     {rand_tensor({L, F}, rng), rand_tensor({k * F, d}, rng)}});
  }
  {
    Eigen::Index T = idx(2, 6), d = idx(1, 4);
    cases.push_back({"maxpool",
                     [](Tape& t, const std::vector<NodeId>& in) {
                       return sum(t, maxpool_seq(t, in[0]));
                     },
                     {rand_pool_input(T, d, rng)}});
  }
  {
    Eigen::Index n = idx(2, 6);
    Tensor w = rand_tensor({n}, rng);
    cases.push_back({"softmax",
                     [w](Tape& t, const std::vector<NodeId>& in) {
                       return sum(t, mul(t, softmax(t, in[0]), t.leaf(w)));
                     },
                     {rand_tensor({n}, rng)}});
  }
  {
    Eigen::Index n = idx(2, 6);
    cases.push_back({"log",
                     [](Tape& t, const std::vector<NodeId>& in) {
                       return sum(t, log(t, in[0]));
                     },
                     {rand_tensor({n}, rng, 0.5, 2.0)}});
  }
  {
    Eigen::Index n = idx(2, 6);
    cases.push_back({"cos_sim",
                     [](Tape& t, const std::vector<NodeId>& in) {
                       return cos_sim(t, in[0], in[1]);
                     },
                     {rand_away_from_zero({n}, rng), rand_away_from_zero({n}, rng)}});
  }
  {
    Eigen::Index n = idx(3, 8);
    Tensor mask = dropout_mask({n}, 0.3, rng);
    cases.push_back({"dropout",
                     [mask](Tape& t, const std::vector<NodeId>& in) {
                       return sum(t, dropout(t, in[0], mask));
                     },
                     {rand_tensor({n}, rng)}});
  }
  {
    Eigen::Index n = idx(2, 6);
    int at = static_cast<int>(rng.uniform_int(n));
    cases.push_back({"gather",
                     [at](Tape& t, const std::vector<NodeId>& in) {
                       return gather(t, tanh(t, in[0]), at);
                     },
                     {rand_tensor({n}, rng)}});
  }
  {
    Eigen::Index n = idx(2, 6);
    cases.push_back({"sum",
                     [](Tape& t, const std::vector<NodeId>& in) { return sum(t, in[0]); },
                     {rand_tensor({n}, rng)}});
  }
  {
    Eigen::Index n = idx(2, 6);
    double c = rng.uniform(-2.0, 2.0);
    cases.push_back({"scale",
                     [c](Tape& t, const std::vector<NodeId>& in) {
                       return sum(t, scale(t, in[0], c));
                     },
                     {rand_tensor({n}, rng)}});
  }
  {
    Eigen::Index n = idx(2, 6);
    double c = rng.uniform(-2.0, 2.0);
    cases.push_back({"add_const",
                     [c](Tape& t, const std::vector<NodeId>& in) {
                       return sum(t, add_const(t, in[0], c));
                     },
                     {rand_tensor({n}, rng)}});
  }
  return cases;
}

// phi(e | m) differentiated with respect to every model parameter
Case composed_phi_case(Rng& rng) {
  EncoderConfig cfg;
  cfg.d1 = 3;
  cfg.d2 = 4;
  cfg.d3 = 4;
  cfg.feature_dim_in = 6;
  cfg.filter_widths = {1, 2, 3};
  cfg.gated_modality = rng.uniform() < 0.5 ? Modality::text : Modality::vision;

  auto params = std::make_shared<ModelParams>(ModelParams::init(cfg, rng));
  auto mention = std::make_shared<FeatureRecord>();
  mention->id = "m";
  mention->token_features = RowMat::NullaryExpr(
      4, cfg.feature_dim_in, [&rng](Eigen::Index, Eigen::Index) { return rng.normal(); });
  mention->vision_feature = Vec::NullaryExpr(
      cfg.feature_dim_in, [&rng](Eigen::Index) { return rng.normal(); });
  auto entity = std::make_shared<FeatureRecord>();
  entity->id = "e";
  entity->token_features = RowMat::NullaryExpr(
      1, cfg.feature_dim_in, [&rng](Eigen::Index, Eigen::Index) { return rng.normal(); });
  entity->vision_feature = Vec::NullaryExpr(
      cfg.feature_dim_in, [&rng](Eigen::Index) { return rng.normal(); });

  std::vector<Tensor> point;
  for (Parameter* p : params->all()) point.push_back(p->value);

  Case c;
  c.name = "composed_phi";
  c.point = std::move(point);
  c.fn = [params, mention, entity, cfg](Tape& t, const std::vector<NodeId>& in) {
    BoundParams bind(t);
    std::vector<Parameter*> ps = params->all();
    for (size_t i = 0; i < ps.size(); ++i) bind.bind_as(*ps[i], in[i]);
    NodeId m_emb = embed_mention(t, bind, *mention, params->encoder, cfg);
    NodeId e_emb = embed_entity(t, bind, *entity, params->encoder, cfg);
    return match_pair(t, bind, m_emb, e_emb, params->match).phi;
  };
  return c;
}

}  // namespace

std::vector<GradcheckCase> gradcheck_suite(uint64_t seed, int cases_per_op) {
  if (cases_per_op < 1) throw ContractViolation("gradcheck_suite: cases_per_op >= 1");
  Rng rng(seed);
  std::vector<GradcheckCase> report;
  auto fold_in = [&report](const std::string& name, double err) {
    for (GradcheckCase& g : report) {
      if (g.name == name) {
        g.max_error = std::max(g.max_error, err);
        ++g.cases;
        return;
      }
    }
    report.push_back({name, 1, err});
  };

  for (int round = 0; round < cases_per_op; ++round) {
    for (Case& c : primitive_cases(rng)) {
      fold_in(c.name, check_gradients(c.fn, c.point, kEps));
    }
  }
  for (int round = 0; round < 3; ++round) {
    Case c = composed_phi_case(rng);
    fold_in(c.name, check_gradients(c.fn, c.point, kEps));
  }
  return report;
}

}  // namespace pgmel
