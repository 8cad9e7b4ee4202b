#include "pgmel/encoders.hpp"

#include <algorithm>
#include <cmath>

namespace pgmel {

namespace {

Tensor glorot(std::vector<Eigen::Index> shape, Rng& rng) {
  Tensor t = Tensor::zeros(shape);
  double fan_in = static_cast<double>(t.rows());
  double fan_out = static_cast<double>(t.cols());
  if (t.rank() == 1) fan_in = 1.0;
  double limit = std::sqrt(6.0 / (fan_in + fan_out));
  for (Eigen::Index i = 0; i < t.size(); ++i) t[i] = rng.uniform(-limit, limit);
  return t;
}

Parameter weight(const std::string& name, Eigen::Index rows, Eigen::Index cols, Rng& rng) {
  return Parameter(name, glorot({rows, cols}, rng));
}

Parameter bias(const std::string& name, Eigen::Index n) {
  return Parameter(name, Tensor::zeros({n}));
}

GmuParams init_gmu(const std::string& prefix, int text_width, int d1, int d2, int d3,
                   Rng& rng) {
  GmuParams g;
  g.proj_text = weight(prefix + ".text_proj", text_width, d2, rng);
  g.proj_vision = weight(prefix + ".vis_proj", 3 * d1, d2, rng);
  g.gate_w = weight(prefix + ".gate.w", 2 * d2, d2, rng);
  g.gate_b = bias(prefix + ".gate.b", d2);
  g.fuse_w = weight(prefix + ".fuse.w", 2 * d2, d3, rng);
  g.fuse_b = bias(prefix + ".fuse.b", d3);
  return g;
}

}  // namespace

std::vector<Parameter*> GmuParams::all() {
  return {&proj_text, &proj_vision, &gate_w, &gate_b, &fuse_w, &fuse_b};
}

std::vector<Parameter*> MentionEncoderParams::all() {
  std::vector<Parameter*> out;
  for (size_t i = 0; i < conv_w.size(); ++i) {
    out.push_back(&conv_w[i]);
    out.push_back(&conv_b[i]);
  }
  out.push_back(&vis_w);
  out.push_back(&vis_b);
  for (Parameter* p : gmu.all()) out.push_back(p);
  return out;
}

std::vector<Parameter*> EntityEncoderParams::all() {
  std::vector<Parameter*> out = {&text_w, &text_b, &vis_w, &vis_b};
  for (Parameter* p : gmu.all()) out.push_back(p);
  return out;
}

std::vector<Parameter*> EncoderParams::all() {
  std::vector<Parameter*> out = mention.all();
  for (Parameter* p : entity.all()) out.push_back(p);
  return out;
}

EncoderParams EncoderParams::init(const EncoderConfig& cfg, Rng& rng) {
  cfg.validate();
  const int F = cfg.feature_dim_in;
  EncoderParams p;

  p.mention.widths = cfg.filter_widths;
  std::sort(p.mention.widths.begin(), p.mention.widths.end());
  for (int k : p.mention.widths) {
    std::string tag = "mention.conv" + std::to_string(k);
    p.mention.conv_w.push_back(weight(tag + ".w", static_cast<Eigen::Index>(k) * F,
                                      cfg.d1, rng));
    p.mention.conv_b.push_back(bias(tag + ".b", cfg.d1));
  }
  p.mention.vis_w = weight("mention.vis.w", F, 3 * cfg.d1, rng);
  p.mention.vis_b = bias("mention.vis.b", 3 * cfg.d1);
  p.mention.gmu =
      init_gmu("mention.gmu", cfg.text_feature_width(), cfg.d1, cfg.d2, cfg.d3, rng);

  p.entity.text_w = weight("entity.text.w", F, 3 * cfg.d1, rng);
  p.entity.text_b = bias("entity.text.b", 3 * cfg.d1);
  p.entity.vis_w = weight("entity.vis.w", F, 3 * cfg.d1, rng);
  p.entity.vis_b = bias("entity.vis.b", 3 * cfg.d1);
  p.entity.gmu =
      init_gmu("entity.gmu", cfg.entity_feature_width(), cfg.d1, cfg.d2, cfg.d3, rng);
  return p;
}

Tensor dropout_mask(const std::vector<Eigen::Index>& shape, double rate, Rng& rng) {
  if (rate < 0.0 || rate >= 1.0) throw ContractViolation("dropout rate must be in [0,1)");
  Tensor m = Tensor::zeros(shape);
  double keep = 1.0 / (1.0 - rate);
  for (Eigen::Index i = 0; i < m.size(); ++i) {
    m[i] = rng.uniform() < rate ? 0.0 : keep;
  }
  return m;
}

NodeId encode_mention_text(Tape& t, BoundParams& bind, const RowMat& tokens,
                           MentionEncoderParams& params, const EncoderConfig& cfg) {
  if (tokens.rows() < 1) throw ContractViolation("encode_mention_text: empty token list");
  if (tokens.cols() != cfg.feature_dim_in) {
    throw ContractViolation("encode_mention_text: token width " +
                            std::to_string(tokens.cols()) + " != feature_dim_in");
  }
  NodeId base = t.leaf(Tensor::from_mat(tokens));
  std::vector<NodeId> per_width;
  for (size_t i = 0; i < params.widths.size(); ++i) {
    int k = params.widths[i];
    NodeId seq = base;
    if (tokens.rows() < k) {  // right-pad short sequences with zero tokens
      RowMat padded = RowMat::Zero(k, tokens.cols());
      padded.topRows(tokens.rows()) = tokens;
      seq = t.leaf(Tensor::from_mat(padded));
    }
    NodeId conv = conv1d(t, seq, bind(params.conv_w[i]), k);
    NodeId act = leaky_relu(t, add(t, conv, bind(params.conv_b[i])), kLeakySlope);
    per_width.push_back(maxpool_seq(t, act));
  }
  if (per_width.size() == 1) return per_width[0];
  return concat(t, per_width);
}

NodeId project_feature(Tape& t, BoundParams& bind, const Vec& v, Parameter& w,
                       Parameter& b) {
  if (v.size() != w.value.rows()) {
    throw ContractViolation("project_feature: width " + std::to_string(v.size()) +
                            " != " + std::to_string(w.value.rows()));
  }
  NodeId x = t.leaf(Tensor::from_vec(v));
  return add(t, matmul(t, x, bind(w)), bind(b));
}

NodeId encode_entity_text(Tape& t, BoundParams& bind, const Vec& pooled,
                          EntityEncoderParams& params) {
  return project_feature(t, bind, pooled, params.text_w, params.text_b);
}

NodeId gmu_fuse(Tape& t, BoundParams& bind, NodeId text_feat, NodeId vision_feat,
                GmuParams& params, const EncoderConfig& cfg) {
  NodeId p_text = matmul(t, text_feat, bind(params.proj_text));
  NodeId p_vis = matmul(t, vision_feat, bind(params.proj_vision));
  NodeId lhs = p_text;
  NodeId rhs = p_vis;
  if (cfg.use_gated_fusion) {
    std::vector<NodeId> both = {p_text, p_vis};
    NodeId gate_in = concat(t, both);
    NodeId rho =
        sigmoid(t, add(t, matmul(t, gate_in, bind(params.gate_w)), bind(params.gate_b)));
    if (cfg.gated_modality == Modality::text) {
      lhs = mul(t, rho, p_text);
    } else {
      rhs = mul(t, rho, p_vis);
    }
  }
  std::vector<NodeId> fused = {lhs, rhs};
  NodeId joint = concat(t, fused);
  return tanh(t, add(t, matmul(t, joint, bind(params.fuse_w)), bind(params.fuse_b)));
}

namespace {

NodeId maybe_dropout(Tape& t, NodeId x, const DropoutCtx& ctx) {
  if (!ctx.training || ctx.rate <= 0.0) return x;
  if (ctx.rng == nullptr) throw ContractViolation("dropout requested without rng");
  return dropout(t, x, dropout_mask(t.value(x).shape(), ctx.rate, *ctx.rng));
}

NodeId vision_node(Tape& t, BoundParams& bind, const FeatureRecord& rec, bool use_vision,
                   Parameter& w, Parameter& b, const EncoderConfig& cfg) {
  if (!use_vision) {
    // excluded modality carries no information: projected from a zero vector
    return project_feature(t, bind, Vec::Zero(cfg.feature_dim_in), w, b);
  }
  if (!rec.vision_feature.has_value()) {
    throw ContractViolation("record " + rec.id + " has no vision feature");
  }
  return project_feature(t, bind, *rec.vision_feature, w, b);
}

}  // namespace

NodeId embed_mention(Tape& t, BoundParams& bind, const FeatureRecord& mention,
                     EncoderParams& params, const EncoderConfig& cfg,
                     const DropoutCtx& ctx) {
  NodeId text = encode_mention_text(t, bind, mention.token_features, params.mention, cfg);
  NodeId vis = vision_node(t, bind, mention, cfg.use_mention_vision, params.mention.vis_w,
                           params.mention.vis_b, cfg);
  text = maybe_dropout(t, text, ctx);
  vis = maybe_dropout(t, vis, ctx);
  return gmu_fuse(t, bind, text, vis, params.mention.gmu, cfg);
}

NodeId embed_entity(Tape& t, BoundParams& bind, const FeatureRecord& entity,
                    EncoderParams& params, const EncoderConfig& cfg,
                    const DropoutCtx& ctx) {
  if (entity.token_features.rows() != 1) {
    throw ContractViolation("entity " + entity.id + " must carry one pooled text vector");
  }
  NodeId text =
      encode_entity_text(t, bind, entity.token_features.row(0).transpose(), params.entity);
  NodeId vis = vision_node(t, bind, entity, cfg.use_entity_vision, params.entity.vis_w,
                           params.entity.vis_b, cfg);
  text = maybe_dropout(t, text, ctx);
  vis = maybe_dropout(t, vis, ctx);
  return gmu_fuse(t, bind, text, vis, params.entity.gmu, cfg);
}

}  // namespace pgmel
