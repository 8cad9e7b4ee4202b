#include "pgmel/tape.hpp"

#include <algorithm>
#include <cmath>

namespace pgmel {

const char* op_name(OpKind k) {
  switch (k) {
    case OpKind::leaf: return "leaf";
    case OpKind::matmul: return "matmul";
    case OpKind::add: return "add";
    case OpKind::concat: return "concat";
    case OpKind::mul: return "mul";
    case OpKind::vtanh: return "tanh";
    case OpKind::sigmoid: return "sigmoid";
    case OpKind::leaky_relu: return "leaky_relu";
    case OpKind::conv1d: return "conv1d";
    case OpKind::maxpool: return "maxpool";
    case OpKind::softmax: return "softmax";
    case OpKind::vlog: return "log";
    case OpKind::cos_sim: return "cos_sim";
    case OpKind::dropout: return "dropout";
    case OpKind::gather: return "gather";
    case OpKind::sum: return "sum";
    case OpKind::scale: return "scale";
    case OpKind::add_const: return "add_const";
  }
  return "?";
}

namespace {

ContractViolation shape_error(OpKind k, const std::string& detail) {
  return ContractViolation(std::string(op_name(k)) + ": " + detail);
}

// im2col over a row-major L x F sequence: window rows are contiguous in the
// flat buffer, so window i is just the segment starting at i * F.
RowMat im2col(const Tensor& seq, int k) {
  Eigen::Index L = seq.rows(), F = seq.cols();
  Eigen::Index out_len = L - k + 1;
  RowMat cols(out_len, static_cast<Eigen::Index>(k) * F);
  for (Eigen::Index i = 0; i < out_len; ++i) {
    cols.row(i) = seq.data().segment(i * F, static_cast<Eigen::Index>(k) * F);
  }
  return cols;
}

}  // namespace

NodeId Tape::push(Node n) {
  if (n.kind != OpKind::leaf) {
    bool ng = false;
    for (NodeId i : n.inputs) ng = ng || nodes_.at(i).needs_grad;
    n.needs_grad = ng;
    n.value = eval_node(n);
    if (!n.value.all_finite()) {
      throw NumericFault(std::string("non-finite output from ") + op_name(n.kind));
    }
  }
  nodes_.push_back(std::move(n));
  return static_cast<NodeId>(nodes_.size()) - 1;
}

NodeId Tape::leaf(Tensor value, bool needs_grad) {
  Node n;
  n.kind = OpKind::leaf;
  n.value = std::move(value);
  n.needs_grad = needs_grad;
  nodes_.push_back(std::move(n));
  return static_cast<NodeId>(nodes_.size()) - 1;
}

NodeId Tape::param(Parameter& p) {
  NodeId id = leaf(p.value, /*needs_grad=*/true);
  nodes_[id].param = &p;
  return id;
}

const Tensor& Tape::grad(NodeId id) const {
  const Node& n = nodes_.at(id);
  if (n.grad.empty()) {
    static const Tensor kEmpty;
    return kEmpty;
  }
  return n.grad;
}

Tensor Tape::eval_node(const Node& n) const {
  auto in = [&](int i) -> const Tensor& { return nodes_[n.inputs[i]].value; };
  switch (n.kind) {
    case OpKind::leaf:
      return n.value;
    case OpKind::matmul: {
      const Tensor& a = in(0);
      const Tensor& b = in(1);
      RowMat c = a.mat() * b.mat();
      if (a.rank() == 1) return Tensor::from_vec(c.row(0).transpose());
      return Tensor::from_mat(c);
    }
    case OpKind::add: {
      const Tensor& a = in(0);
      const Tensor& b = in(1);
      if (a.same_shape(b)) {
        Tensor out = a;
        out.data() += b.data();
        return out;
      }
      // matrix + broadcast row bias
      RowMat m = a.mat();
      m.rowwise() += b.data().transpose();
      return Tensor::from_mat(m);
    }
    case OpKind::concat: {
      Eigen::Index total = 0;
      for (size_t i = 0; i < n.inputs.size(); ++i) total += in(i).size();
      Tensor out = Tensor::zeros({total});
      Eigen::Index at = 0;
      for (size_t i = 0; i < n.inputs.size(); ++i) {
        out.data().segment(at, in(i).size()) = in(i).data();
        at += in(i).size();
      }
      return out;
    }
    case OpKind::mul: {
      Tensor out = in(0);
      out.data().array() *= in(1).data().array();
      return out;
    }
    case OpKind::vtanh: {
      Tensor out = in(0);
      out.data() = out.data().array().tanh();
      return out;
    }
    case OpKind::sigmoid: {
      Tensor out = in(0);
      out.data() = 1.0 / (1.0 + (-out.data().array()).exp());
      return out;
    }
    case OpKind::leaky_relu: {
      Tensor out = in(0);
      out.data() = (out.data().array() > 0.0)
                       .select(out.data().array(), n.attr * out.data().array());
      return out;
    }
    case OpKind::conv1d: {
      const Tensor& seq = in(0);
      const Tensor& filt = in(1);
      RowMat out = im2col(seq, n.width) * filt.mat();
      return Tensor::from_mat(out);
    }
    case OpKind::maxpool: {
      const Tensor& x = in(0);
      Vec out(x.cols());
      for (Eigen::Index j = 0; j < x.cols(); ++j) {
        out[j] = x.mat().col(j).maxCoeff();
      }
      return Tensor::from_vec(std::move(out));
    }
    case OpKind::softmax: {
      const Tensor& x = in(0);
      double m = x.data().maxCoeff();
      Vec e = (x.data().array() - m).exp();
      e /= e.sum();
      return Tensor::from_vec(std::move(e));
    }
    case OpKind::vlog: {
      Tensor out = in(0);
      out.data() = out.data().array().log();
      return out;
    }
    case OpKind::cos_sim: {
      const Tensor& a = in(0);
      const Tensor& b = in(1);
      double na = a.data().norm(), nb = b.data().norm();
      if (na == 0.0 || nb == 0.0) return Tensor::scalar(0.0);
      return Tensor::scalar(a.data().dot(b.data()) / (na * nb));
    }
    case OpKind::dropout: {
      Tensor out = in(0);
      out.data().array() *= n.saved.data().array();
      return out;
    }
    case OpKind::gather:
      return Tensor::scalar(in(0)[n.width]);
    case OpKind::sum:
      return Tensor::scalar(in(0).data().sum());
    case OpKind::scale: {
      Tensor out = in(0);
      out.data() *= n.attr;
      return out;
    }
    case OpKind::add_const: {
      Tensor out = in(0);
      out.data().array() += n.attr;
      return out;
    }
  }
  throw ContractViolation("unknown op kind");
}

void Tape::replay() {
  for (Node& n : nodes_) {
    if (n.kind == OpKind::leaf) continue;
    n.value = eval_node(n);
  }
}

void Tape::backward(NodeId output) {
  Node& out = nodes_.at(output);
  if (out.value.size() != 1) {
    throw ContractViolation("backward requires a scalar output node");
  }
  for (Node& n : nodes_) n.grad = Tensor();
  out.grad = Tensor::scalar(1.0);

  auto ensure = [&](NodeId id) -> Tensor& {
    Node& n = nodes_[id];
    if (n.grad.empty()) n.grad = Tensor::zeros(n.value.shape());
    return n.grad;
  };
  auto wants = [&](NodeId id) { return nodes_[id].needs_grad; };

  for (NodeId i = output; i >= 0; --i) {
    Node& n = nodes_[i];
    if (n.grad.empty() || !n.needs_grad || n.kind == OpKind::leaf) continue;
    const Tensor& g = n.grad;
    auto in = [&](int k) -> const Tensor& { return nodes_[n.inputs[k]].value; };

    switch (n.kind) {
      case OpKind::matmul: {
        const Tensor& a = in(0);
        const Tensor& b = in(1);
        if (wants(n.inputs[0])) {
          ensure(n.inputs[0]).mat() += g.mat() * b.mat().transpose();
        }
        if (wants(n.inputs[1])) {
          ensure(n.inputs[1]).mat() += a.mat().transpose() * g.mat();
        }
        break;
      }
      case OpKind::add: {
        if (wants(n.inputs[0])) ensure(n.inputs[0]).data() += g.data();
        if (wants(n.inputs[1])) {
          Tensor& gb = ensure(n.inputs[1]);
          if (gb.same_shape(g)) {
            gb.data() += g.data();
          } else {  // bias broadcast: fold rows back
            gb.data() += g.mat().colwise().sum().transpose();
          }
        }
        break;
      }
      case OpKind::concat: {
        Eigen::Index at = 0;
        for (size_t k = 0; k < n.inputs.size(); ++k) {
          Eigen::Index len = in(static_cast<int>(k)).size();
          if (wants(n.inputs[k])) {
            ensure(n.inputs[k]).data() += g.data().segment(at, len);
          }
          at += len;
        }
        break;
      }
      case OpKind::mul: {
        if (wants(n.inputs[0])) {
          ensure(n.inputs[0]).data().array() += g.data().array() * in(1).data().array();
        }
        if (wants(n.inputs[1])) {
          ensure(n.inputs[1]).data().array() += g.data().array() * in(0).data().array();
        }
        break;
      }
      case OpKind::vtanh: {
        if (wants(n.inputs[0])) {
          ensure(n.inputs[0]).data().array() +=
              g.data().array() * (1.0 - n.value.data().array().square());
        }
        break;
      }
      case OpKind::sigmoid: {
        if (wants(n.inputs[0])) {
          ensure(n.inputs[0]).data().array() +=
              g.data().array() * n.value.data().array() * (1.0 - n.value.data().array());
        }
        break;
      }
      case OpKind::leaky_relu: {
        if (wants(n.inputs[0])) {
          ensure(n.inputs[0]).data().array() +=
              g.data().array() * (in(0).data().array() > 0.0)
                                     .select(Vec::Ones(g.size()).array(),
                                             Vec::Constant(g.size(), n.attr).array());
        }
        break;
      }
      case OpKind::conv1d: {
        const Tensor& seq = in(0);
        const Tensor& filt = in(1);
        RowMat cols = im2col(seq, n.width);
        if (wants(n.inputs[1])) {
          ensure(n.inputs[1]).mat() += cols.transpose() * g.mat();
        }
        if (wants(n.inputs[0])) {
          RowMat dcols = g.mat() * filt.mat().transpose();
          Tensor& gs = ensure(n.inputs[0]);
          Eigen::Index F = seq.cols();
          for (Eigen::Index i = 0; i < dcols.rows(); ++i) {
            gs.data().segment(i * F, dcols.cols()) += dcols.row(i);
          }
        }
        break;
      }
      case OpKind::maxpool: {
        if (wants(n.inputs[0])) {
          const Tensor& x = in(0);
          Tensor& gx = ensure(n.inputs[0]);
          for (Eigen::Index j = 0; j < x.cols(); ++j) {
            Eigen::Index winner;
            x.mat().col(j).maxCoeff(&winner);  // first maximum wins
            gx.mat()(winner, j) += g[j];
          }
        }
        break;
      }
      case OpKind::softmax: {
        if (wants(n.inputs[0])) {
          const Vec& y = n.value.data();
          double dot = g.data().dot(y);
          ensure(n.inputs[0]).data().array() += y.array() * (g.data().array() - dot);
        }
        break;
      }
      case OpKind::vlog: {
        if (wants(n.inputs[0])) {
          ensure(n.inputs[0]).data().array() += g.data().array() / in(0).data().array();
        }
        break;
      }
      case OpKind::cos_sim: {
        const Tensor& a = in(0);
        const Tensor& b = in(1);
        double na = a.data().norm(), nb = b.data().norm();
        if (na == 0.0 || nb == 0.0) break;  // degenerate forward was pinned to 0
        double c = n.value[0];
        double gs = g[0];
        if (wants(n.inputs[0])) {
          ensure(n.inputs[0]).data() +=
              gs * (b.data() / (na * nb) - c * a.data() / (na * na));
        }
        if (wants(n.inputs[1])) {
          ensure(n.inputs[1]).data() +=
              gs * (a.data() / (na * nb) - c * b.data() / (nb * nb));
        }
        break;
      }
      case OpKind::dropout: {
        if (wants(n.inputs[0])) {
          ensure(n.inputs[0]).data().array() += g.data().array() * n.saved.data().array();
        }
        break;
      }
      case OpKind::gather: {
        if (wants(n.inputs[0])) ensure(n.inputs[0])[n.width] += g[0];
        break;
      }
      case OpKind::sum: {
        if (wants(n.inputs[0])) ensure(n.inputs[0]).data().array() += g[0];
        break;
      }
      case OpKind::scale: {
        if (wants(n.inputs[0])) ensure(n.inputs[0]).data() += n.attr * g.data();
        break;
      }
      case OpKind::add_const: {
        if (wants(n.inputs[0])) ensure(n.inputs[0]).data() += g.data();
        break;
      }
      case OpKind::leaf:
        break;
    }
  }

  for (Node& n : nodes_) {
    if (n.param != nullptr && !n.grad.empty()) {
      n.param->grad.data() += n.grad.data();
    }
  }
}

NodeId BoundParams::operator()(Parameter& p) {
  auto it = ids_.find(&p);
  if (it != ids_.end()) return it->second;
  NodeId id = tape_->param(p);
  ids_.emplace(&p, id);
  return id;
}

// ---------------------------------------------------------------------------
// op builders

NodeId matmul(Tape& t, NodeId a, NodeId b) {
  const Tensor& ta = t.value(a);
  const Tensor& tb = t.value(b);
  if (tb.rank() != 2 || ta.cols() != tb.rows()) {
    throw shape_error(OpKind::matmul, ta.shape_str() + " x " + tb.shape_str());
  }
  Tape::Node n;
  n.kind = OpKind::matmul;
  n.inputs = {a, b};
  return t.push(std::move(n));
}

NodeId add(Tape& t, NodeId a, NodeId b) {
  const Tensor& ta = t.value(a);
  const Tensor& tb = t.value(b);
  bool bias = ta.rank() == 2 && tb.rank() == 1 && ta.cols() == tb.size();
  if (!ta.same_shape(tb) && !bias) {
    throw shape_error(OpKind::add, ta.shape_str() + " + " + tb.shape_str());
  }
  Tape::Node n;
  n.kind = OpKind::add;
  n.inputs = {a, b};
  return t.push(std::move(n));
}

NodeId concat(Tape& t, std::span<const NodeId> parts) {
  if (parts.empty()) throw shape_error(OpKind::concat, "no inputs");
  for (NodeId p : parts) {
    if (t.value(p).rank() != 1) {
      throw shape_error(OpKind::concat, "rank-1 inputs only, got " + t.value(p).shape_str());
    }
  }
  Tape::Node n;
  n.kind = OpKind::concat;
  n.inputs.assign(parts.begin(), parts.end());
  return t.push(std::move(n));
}

NodeId mul(Tape& t, NodeId a, NodeId b) {
  if (!t.value(a).same_shape(t.value(b))) {
    throw shape_error(OpKind::mul, t.value(a).shape_str() + " * " + t.value(b).shape_str());
  }
  Tape::Node n;
  n.kind = OpKind::mul;
  n.inputs = {a, b};
  return t.push(std::move(n));
}

namespace {
NodeId unary(Tape& t, OpKind kind, NodeId x, double attr = 0.0) {
  Tape::Node n;
  n.kind = kind;
  n.inputs = {x};
  n.attr = attr;
  return t.push(std::move(n));
}
}  // namespace

NodeId tanh(Tape& t, NodeId x) { return unary(t, OpKind::vtanh, x); }
NodeId sigmoid(Tape& t, NodeId x) { return unary(t, OpKind::sigmoid, x); }
NodeId leaky_relu(Tape& t, NodeId x, double slope) {
  return unary(t, OpKind::leaky_relu, x, slope);
}
NodeId relu(Tape& t, NodeId x) { return leaky_relu(t, x, 0.0); }

NodeId conv1d(Tape& t, NodeId seq, NodeId filter, int width) {
  const Tensor& s = t.value(seq);
  const Tensor& f = t.value(filter);
  if (width < 1 || s.rank() != 2 || f.rank() != 2) {
    throw shape_error(OpKind::conv1d, "sequence and filter must be rank 2");
  }
  if (s.rows() < width) {
    throw shape_error(OpKind::conv1d, "sequence shorter than filter width");
  }
  if (f.rows() != static_cast<Eigen::Index>(width) * s.cols()) {
    throw shape_error(OpKind::conv1d,
                      "filter rows " + std::to_string(f.rows()) + " != width*features");
  }
  Tape::Node n;
  n.kind = OpKind::conv1d;
  n.inputs = {seq, filter};
  n.width = width;
  return t.push(std::move(n));
}

NodeId maxpool_seq(Tape& t, NodeId x) {
  if (t.value(x).rank() != 2) throw shape_error(OpKind::maxpool, "rank-2 input required");
  Tape::Node n;
  n.kind = OpKind::maxpool;
  n.inputs = {x};
  return t.push(std::move(n));
}

NodeId softmax(Tape& t, NodeId x) {
  if (t.value(x).rank() != 1 || t.value(x).size() == 0) {
    throw shape_error(OpKind::softmax, "nonempty rank-1 input required");
  }
  NodeId id = unary(t, OpKind::softmax, x);
  // normalization invariant, checked on every recorded softmax
  double s = t.value(id).data().sum();
  if (std::abs(s - 1.0) > 1e-12) {
    throw NumericFault("softmax normalization drifted: sum=" + std::to_string(s));
  }
  return id;
}

NodeId log(Tape& t, NodeId x) { return unary(t, OpKind::vlog, x); }

NodeId cos_sim(Tape& t, NodeId a, NodeId b) {
  const Tensor& ta = t.value(a);
  const Tensor& tb = t.value(b);
  if (ta.rank() != 1 || !ta.same_shape(tb)) {
    throw shape_error(OpKind::cos_sim, ta.shape_str() + " vs " + tb.shape_str());
  }
  Tape::Node n;
  n.kind = OpKind::cos_sim;
  n.inputs = {a, b};
  return t.push(std::move(n));
}

NodeId dropout(Tape& t, NodeId x, Tensor mask) {
  if (!t.value(x).same_shape(mask)) {
    throw shape_error(OpKind::dropout, "mask shape mismatch");
  }
  Tape::Node n;
  n.kind = OpKind::dropout;
  n.inputs = {x};
  n.saved = std::move(mask);
  return t.push(std::move(n));
}

NodeId gather(Tape& t, NodeId v, int index) {
  const Tensor& tv = t.value(v);
  if (tv.rank() != 1 || index < 0 || index >= tv.size()) {
    throw shape_error(OpKind::gather, "index " + std::to_string(index) + " out of range");
  }
  Tape::Node n;
  n.kind = OpKind::gather;
  n.inputs = {v};
  n.width = index;
  return t.push(std::move(n));
}

NodeId sum(Tape& t, NodeId x) {
  Tape::Node n;
  n.kind = OpKind::sum;
  n.inputs = {x};
  return t.push(std::move(n));
}

NodeId scale(Tape& t, NodeId x, double c) { return unary(t, OpKind::scale, x, c); }
NodeId add_const(Tape& t, NodeId x, double c) { return unary(t, OpKind::add_const, x, c); }

}  // namespace pgmel
