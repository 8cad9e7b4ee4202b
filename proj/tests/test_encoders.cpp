#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "pgmel/encoders.hpp"
#include "pgmel/gradcheck.hpp"

using namespace pgmel;

namespace {

RowMat randmat(Eigen::Index r, Eigen::Index c, Rng& rng) {
  return RowMat::NullaryExpr(r, c, [&rng](Eigen::Index, Eigen::Index) { return rng.normal(); });
}

Vec randvec(Eigen::Index n, Rng& rng) {
  return Vec::NullaryExpr(n, [&rng](Eigen::Index) { return rng.normal(); });
}

EncoderConfig tiny_config() {
  EncoderConfig cfg;
  cfg.d1 = 3;
  cfg.d2 = 4;
  cfg.d3 = 4;
  cfg.feature_dim_in = 5;
  cfg.filter_widths = {1, 2, 3};
  return cfg;
}

// direct n-gram computation with plain loops, no tape involvement
std::vector<double> ngram_oracle(const RowMat& tokens, const Tensor& filt,
                                 const Tensor& bias, int k, double slope) {
  const int L = static_cast<int>(tokens.rows());
  const int F = static_cast<int>(tokens.cols());
  const int d = static_cast<int>(filt.cols());
  std::vector<double> out(d, -1e300);
  for (int i = 0; i + k <= L; ++i) {
    for (int j = 0; j < d; ++j) {
      double acc = bias[j];
      for (int t = 0; t < k; ++t) {
        for (int f = 0; f < F; ++f) {
          acc += tokens(i + t, f) * filt.mat()(t * F + f, j);
        }
      }
      double act = acc > 0 ? acc : slope * acc;
      out[j] = std::max(out[j], act);
    }
  }
  return out;
}

// direct fusion computation following the gated-unit formula step by step
std::vector<double> gmu_oracle(const Vec& text, const Vec& vis, GmuParams& p,
                               const EncoderConfig& cfg) {
  const int d2 = cfg.d2, d3 = cfg.d3;
  Vec pt = p.proj_text.value.mat().transpose() * text;
  Vec pv = p.proj_vision.value.mat().transpose() * vis;
  Vec lhs = pt, rhs = pv;
  if (cfg.use_gated_fusion) {
    Vec gate(d2);
    for (int j = 0; j < d2; ++j) {
      double acc = p.gate_b.value[j];
      for (int i = 0; i < d2; ++i) acc += pt[i] * p.gate_w.value.mat()(i, j);
      for (int i = 0; i < d2; ++i) acc += pv[i] * p.gate_w.value.mat()(d2 + i, j);
      gate[j] = 1.0 / (1.0 + std::exp(-acc));
    }
    if (cfg.gated_modality == Modality::text) {
      lhs = gate.cwiseProduct(pt);
    } else {
      rhs = gate.cwiseProduct(pv);
    }
  }
  std::vector<double> out(d3);
  for (int j = 0; j < d3; ++j) {
    double acc = p.fuse_b.value[j];
    for (int i = 0; i < d2; ++i) acc += lhs[i] * p.fuse_w.value.mat()(i, j);
    for (int i = 0; i < d2; ++i) acc += rhs[i] * p.fuse_w.value.mat()(d2 + i, j);
    out[j] = std::tanh(acc);
  }
  return out;
}

}  // namespace

TEST_CASE("single token with width-1 filter degenerates to a linear map") {
  EncoderConfig cfg = tiny_config();
  cfg.filter_widths = {1};
  Rng rng(7);
  EncoderParams params = EncoderParams::init(cfg, rng);
  RowMat token = randmat(1, cfg.feature_dim_in, rng);

  Tape t;
  BoundParams bind(t);
  NodeId out = encode_mention_text(t, bind, token, params.mention, cfg);
  const Tensor& got = t.value(out);
  REQUIRE(got.size() == cfg.d1);

  Vec pre = params.mention.conv_w[0].value.mat().transpose() * token.row(0).transpose() +
            params.mention.conv_b[0].value.data();
  for (int j = 0; j < cfg.d1; ++j) {
    double expect = pre[j] > 0 ? pre[j] : kLeakySlope * pre[j];
    CHECK(got[j] == doctest::Approx(expect).epsilon(1e-12));
  }
}

TEST_CASE("constant token sequences of different lengths encode identically") {
  EncoderConfig cfg = tiny_config();
  Rng rng(8);
  EncoderParams params = EncoderParams::init(cfg, rng);
  Vec tok = randvec(cfg.feature_dim_in, rng);
  RowMat five = tok.transpose().replicate(5, 1);
  RowMat nine = tok.transpose().replicate(9, 1);

  Tape t1, t2;
  BoundParams b1(t1), b2(t2);
  const Tensor& a = t1.value(encode_mention_text(t1, b1, five, params.mention, cfg));
  const Tensor& b = t2.value(encode_mention_text(t2, b2, nine, params.mention, cfg));
  REQUIRE(a.size() == b.size());
  for (Eigen::Index i = 0; i < a.size(); ++i) CHECK(a[i] == doctest::Approx(b[i]).epsilon(1e-14));
}

TEST_CASE("n-gram features match the direct loop oracle") {
  EncoderConfig cfg = tiny_config();
  Rng rng(9);
  EncoderParams params = EncoderParams::init(cfg, rng);
  RowMat tokens = randmat(4, cfg.feature_dim_in, rng);

  Tape t;
  BoundParams bind(t);
  const Tensor& got = t.value(encode_mention_text(t, bind, tokens, params.mention, cfg));
  REQUIRE(got.size() == 3 * cfg.d1);

  int at = 0;
  for (size_t w = 0; w < params.mention.widths.size(); ++w) {
    auto expect = ngram_oracle(tokens, params.mention.conv_w[w].value,
                               params.mention.conv_b[w].value, params.mention.widths[w],
                               kLeakySlope);
    for (double e : expect) {
      CHECK(got[at++] == doctest::Approx(e).epsilon(1e-12));
    }
  }
}

TEST_CASE("short sequences are right-padded to each filter's width") {
  EncoderConfig cfg = tiny_config();
  Rng rng(10);
  EncoderParams params = EncoderParams::init(cfg, rng);
  RowMat one = randmat(1, cfg.feature_dim_in, rng);

  Tape t;
  BoundParams bind(t);
  const Tensor& got = t.value(encode_mention_text(t, bind, one, params.mention, cfg));
  REQUIRE(got.size() == 3 * cfg.d1);

  int at = 0;
  for (size_t w = 0; w < params.mention.widths.size(); ++w) {
    int k = params.mention.widths[w];
    RowMat padded = RowMat::Zero(k, cfg.feature_dim_in);
    padded.row(0) = one.row(0);
    auto expect = ngram_oracle(padded, params.mention.conv_w[w].value,
                               params.mention.conv_b[w].value, k, kLeakySlope);
    for (double e : expect) CHECK(got[at++] == doctest::Approx(e).epsilon(1e-12));
  }
}

TEST_CASE("feature projection") {
  Rng rng(11);
  SUBCASE("zero vector with zero bias projects to zero") {
    Parameter w("w", Tensor::from_mat(randmat(5, 9, rng)));
    Parameter b("b", Tensor::zeros({9}));
    Tape t;
    BoundParams bind(t);
    const Tensor& out = t.value(project_feature(t, bind, Vec::Zero(5), w, b));
    for (Eigen::Index i = 0; i < out.size(); ++i) CHECK(out[i] == 0.0);
  }
  SUBCASE("identity projection reproduces the input") {
    Parameter w("w", Tensor::from_mat(RowMat::Identity(2, 2)));
    Parameter b("b", Tensor::zeros({2}));
    Vec v(2);
    v << 0.3, -1.7;
    Tape t;
    BoundParams bind(t);
    const Tensor& out = t.value(project_feature(t, bind, v, w, b));
    CHECK(out[0] == doctest::Approx(0.3));
    CHECK(out[1] == doctest::Approx(-1.7));
  }
  SUBCASE("random projection matches a dot-product loop") {
    Parameter w("w", Tensor::from_mat(randmat(5, 7, rng)));
    Parameter b("b", Tensor::from_vec(randvec(7, rng)));
    Vec v = randvec(5, rng);
    Tape t;
    BoundParams bind(t);
    const Tensor& out = t.value(project_feature(t, bind, v, w, b));
    for (int j = 0; j < 7; ++j) {
      double acc = b.value[j];
      for (int i = 0; i < 5; ++i) acc += v[i] * w.value.mat()(i, j);
      CHECK(out[j] == doctest::Approx(acc).epsilon(1e-12));
    }
  }
  SUBCASE("width mismatch is a contract violation") {
    Parameter w("w", Tensor::from_mat(randmat(5, 7, rng)));
    Parameter b("b", Tensor::zeros({7}));
    Tape t;
    BoundParams bind(t);
    CHECK_THROWS_AS(project_feature(t, bind, Vec::Zero(4), w, b), ContractViolation);
  }
}

TEST_CASE("gated fusion") {
  EncoderConfig cfg = tiny_config();
  Rng rng(12);

  SUBCASE("saturated gate reduces to plain concatenation fusion") {
    EncoderParams params = EncoderParams::init(cfg, rng);
    params.mention.gmu.gate_w.value.data().setZero();
    params.mention.gmu.gate_b.value.data().setConstant(60.0);  // sigmoid ~ 1
    Vec text = randvec(cfg.text_feature_width(), rng);
    Vec vis = randvec(3 * cfg.d1, rng);

    Tape t1;
    BoundParams b1(t1);
    NodeId gated = gmu_fuse(t1, b1, t1.leaf(Tensor::from_vec(text)),
                            t1.leaf(Tensor::from_vec(vis)), params.mention.gmu, cfg);

    EncoderConfig plain = cfg;
    plain.use_gated_fusion = false;
    Tape t2;
    BoundParams b2(t2);
    NodeId ungated = gmu_fuse(t2, b2, t2.leaf(Tensor::from_vec(text)),
                              t2.leaf(Tensor::from_vec(vis)), params.mention.gmu, plain);
    for (int j = 0; j < cfg.d3; ++j) {
      CHECK(t1.value(gated)[j] == doctest::Approx(t2.value(ungated)[j]).epsilon(1e-12));
    }
  }

  SUBCASE("all-zero inputs and zero biases fuse to zero") {
    EncoderParams params = EncoderParams::init(cfg, rng);
    params.mention.gmu.gate_b.value.data().setZero();
    params.mention.gmu.fuse_b.value.data().setZero();
    Tape t;
    BoundParams bind(t);
    NodeId out = gmu_fuse(t, bind, t.leaf(Tensor::zeros({cfg.text_feature_width()})),
                          t.leaf(Tensor::zeros({3 * cfg.d1})), params.mention.gmu, cfg);
    for (int j = 0; j < cfg.d3; ++j) CHECK(t.value(out)[j] == 0.0);
  }

  SUBCASE("random fusion matches the step-by-step oracle, both gatings") {
    for (Modality m : {Modality::text, Modality::vision}) {
      cfg.gated_modality = m;
      EncoderParams params = EncoderParams::init(cfg, rng);
      Vec text = randvec(cfg.text_feature_width(), rng);
      Vec vis = randvec(3 * cfg.d1, rng);
      Tape t;
      BoundParams bind(t);
      NodeId out = gmu_fuse(t, bind, t.leaf(Tensor::from_vec(text)),
                            t.leaf(Tensor::from_vec(vis)), params.mention.gmu, cfg);
      auto expect = gmu_oracle(text, vis, params.mention.gmu, cfg);
      for (int j = 0; j < cfg.d3; ++j) {
        CHECK(t.value(out)[j] == doctest::Approx(expect[j]).epsilon(1e-12));
      }
    }
  }

  SUBCASE("gate values lie strictly in (0,1) and outputs in (-1,1)") {
    EncoderParams params = EncoderParams::init(cfg, rng);
    for (int trial = 0; trial < 20; ++trial) {
      Vec text = 5.0 * randvec(cfg.text_feature_width(), rng);
      Vec vis = 5.0 * randvec(3 * cfg.d1, rng);
      Tape t;
      BoundParams bind(t);
      NodeId out = gmu_fuse(t, bind, t.leaf(Tensor::from_vec(text)),
                            t.leaf(Tensor::from_vec(vis)), params.mention.gmu, cfg);
      for (int j = 0; j < cfg.d3; ++j) {
        CHECK(t.value(out)[j] > -1.0);
        CHECK(t.value(out)[j] < 1.0);
      }
      // the recorded sigmoid node is the gate
      for (size_t i = 0; i < t.size(); ++i) {
        if (t.node(static_cast<NodeId>(i)).kind == OpKind::sigmoid) {
          const Tensor& g = t.value(static_cast<NodeId>(i));
          for (Eigen::Index j = 0; j < g.size(); ++j) {
            CHECK(g[j] > 0.0);
            CHECK(g[j] < 1.0);
          }
        }
      }
    }
  }
}

TEST_CASE("token order sensitivity follows the filter widths") {
  EncoderConfig cfg = tiny_config();
  Rng rng(13);
  RowMat tokens = randmat(5, cfg.feature_dim_in, rng);
  RowMat permuted = tokens;
  permuted.row(0).swap(permuted.row(3));
  permuted.row(1).swap(permuted.row(4));

  SUBCASE("widths >= 2 see the order") {
    EncoderParams params = EncoderParams::init(cfg, rng);
    Tape t1, t2;
    BoundParams b1(t1), b2(t2);
    const Tensor& a = t1.value(encode_mention_text(t1, b1, tokens, params.mention, cfg));
    const Tensor& b = t2.value(encode_mention_text(t2, b2, permuted, params.mention, cfg));
    double diff = (a.data() - b.data()).norm();
    CHECK(diff > 1e-9);
  }
  SUBCASE("width 1 is permutation-invariant after pooling") {
    cfg.filter_widths = {1};
    EncoderParams params = EncoderParams::init(cfg, rng);
    Tape t1, t2;
    BoundParams b1(t1), b2(t2);
    const Tensor& a = t1.value(encode_mention_text(t1, b1, tokens, params.mention, cfg));
    const Tensor& b = t2.value(encode_mention_text(t2, b2, permuted, params.mention, cfg));
    for (Eigen::Index i = 0; i < a.size(); ++i) CHECK(a[i] == b[i]);
  }
}

TEST_CASE("empty token list is a contract violation") {
  EncoderConfig cfg = tiny_config();
  Rng rng(14);
  EncoderParams params = EncoderParams::init(cfg, rng);
  Tape t;
  BoundParams bind(t);
  RowMat empty(0, cfg.feature_dim_in);
  CHECK_THROWS_AS(encode_mention_text(t, bind, empty, params.mention, cfg),
                  ContractViolation);
}

TEST_CASE("missing vision outside an ablation is a contract violation") {
  EncoderConfig cfg = tiny_config();
  Rng rng(15);
  EncoderParams params = EncoderParams::init(cfg, rng);
  FeatureRecord rec;
  rec.id = "m0";
  rec.token_features = randmat(3, cfg.feature_dim_in, rng);
  Tape t;
  BoundParams bind(t);
  CHECK_THROWS_AS(embed_mention(t, bind, rec, params, cfg), ContractViolation);

  cfg.use_mention_vision = false;  // text-only ablation accepts it
  Tape t2;
  BoundParams bind2(t2);
  CHECK_NOTHROW(embed_mention(t2, bind2, rec, params, cfg));
}

TEST_CASE("dropout mask has inverted-dropout entries") {
  Rng rng(16);
  Tensor m = dropout_mask({2000}, 0.3, rng);
  int zeros = 0;
  for (Eigen::Index i = 0; i < m.size(); ++i) {
    if (m[i] == 0.0) {
      ++zeros;
    } else {
      CHECK(m[i] == doctest::Approx(1.0 / 0.7).epsilon(1e-12));
    }
  }
  CHECK(zeros > 0.25 * 2000);
  CHECK(zeros < 0.35 * 2000);
}

TEST_CASE("composed encoder passes the gradient check") {
  EncoderConfig cfg = tiny_config();
  Rng rng(17);
  auto params = std::make_shared<EncoderParams>(EncoderParams::init(cfg, rng));
  auto mention = std::make_shared<FeatureRecord>();
  mention->id = "m";
  mention->token_features = randmat(4, cfg.feature_dim_in, rng);
  mention->vision_feature = randvec(cfg.feature_dim_in, rng);

  std::vector<Parameter*> ps = params->mention.all();
  std::vector<Tensor> point;
  for (Parameter* p : ps) point.push_back(p->value);

  TapedFn fn = [params, mention, cfg, ps](Tape& t, const std::vector<NodeId>& in) {
    BoundParams bind(t);
    for (size_t i = 0; i < ps.size(); ++i) bind.bind_as(*ps[i], in[i]);
    return sum(t, embed_mention(t, bind, *mention, *params, cfg));
  };
  CHECK(check_gradients(fn, point, 1e-5) < 1e-4);
}
