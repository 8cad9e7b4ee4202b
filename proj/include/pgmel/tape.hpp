#pragma once

#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "pgmel/tensor.hpp"

namespace pgmel {

/// A learnable tensor: the gradient always mirrors the value's shape and is
/// zeroed between optimization steps.
struct Parameter {
  std::string name;
  Tensor value;
  Tensor grad;

  Parameter() = default;
  Parameter(std::string n, Tensor v)
      : name(std::move(n)), value(std::move(v)), grad(Tensor::zeros(value.shape())) {}

  void zero_grad() { grad.data().setZero(); }
};

enum class OpKind {
  leaf,
  matmul,
  add,        // same-shape add, or matrix + row-vector bias broadcast
  concat,     // rank-1 inputs
  mul,        // elementwise
  vtanh,
  sigmoid,
  leaky_relu,
  conv1d,     // no padding, output length L - k + 1
  maxpool,    // max over the sequence (row) axis
  softmax,
  vlog,
  cos_sim,
  dropout,    // multiply by a fixed mask
  gather,     // single element of a rank-1 tensor
  sum,        // reduce to scalar
  scale,      // multiply by constant
  add_const,
};

const char* op_name(OpKind k);

using NodeId = int;

/// Recorded computation graph. Nodes are append-only, inputs always precede
/// outputs, and replay() recomputes every value from the leaves in order,
/// which makes a recorded forward pass reproducible bit for bit.
class Tape {
 public:
  struct Node {
    OpKind kind = OpKind::leaf;
    std::vector<NodeId> inputs;
    Tensor value;
    Tensor grad;              // allocated on first touch during backward
    bool needs_grad = false;  // true iff some parameter feeds this node
    double attr = 0.0;        // leaky slope / scale factor / added constant
    int width = 0;            // conv filter width / gather index
    Tensor saved;             // conv im2col / dropout mask
    std::vector<int> argmax;  // maxpool winner rows
    Parameter* param = nullptr;
  };

  NodeId leaf(Tensor value, bool needs_grad = false);
  NodeId param(Parameter& p);

  const Tensor& value(NodeId id) const { return nodes_.at(id).value; }
  const Tensor& grad(NodeId id) const;
  bool needs_grad(NodeId id) const { return nodes_.at(id).needs_grad; }
  size_t size() const { return nodes_.size(); }
  void reserve(size_t n) { nodes_.reserve(n); }
  void clear() { nodes_.clear(); }

  /// Reverse-mode accumulation from a scalar output node. Gradients of
  /// parameter leaves are added into their Parameter::grad.
  void backward(NodeId output);

  /// Recomputes all node values from the leaves; used to assert determinism.
  void replay();

  NodeId push(Node n);
  Node& node(NodeId id) { return nodes_[id]; }
  const Node& node(NodeId id) const { return nodes_[id]; }

 private:
  Tensor eval_node(const Node& n) const;
  std::vector<Node> nodes_;
};

/// Binds Parameters to leaf nodes of one tape, one leaf per parameter no
/// matter how many times it is used.
class BoundParams {
 public:
  explicit BoundParams(Tape& tape) : tape_(&tape) {}
  NodeId operator()(Parameter& p);

  /// Pre-binds a parameter to an existing leaf, so a caller (e.g. the
  /// finite-difference checker) can substitute its own input nodes.
  void bind_as(const Parameter& p, NodeId id) { ids_[&p] = id; }

 private:
  Tape* tape_;
  std::unordered_map<const Parameter*, NodeId> ids_;
};

// Forward primitives. Each records one node; shapes are validated against
// the op's contract and non-finite outputs raise NumericFault with the op
// name.
NodeId matmul(Tape& t, NodeId a, NodeId b);
NodeId add(Tape& t, NodeId a, NodeId b);
NodeId concat(Tape& t, std::span<const NodeId> parts);
NodeId mul(Tape& t, NodeId a, NodeId b);
NodeId tanh(Tape& t, NodeId x);
NodeId sigmoid(Tape& t, NodeId x);
NodeId leaky_relu(Tape& t, NodeId x, double slope);
NodeId relu(Tape& t, NodeId x);
NodeId conv1d(Tape& t, NodeId seq, NodeId filter, int width);
NodeId maxpool_seq(Tape& t, NodeId x);
NodeId softmax(Tape& t, NodeId x);
NodeId log(Tape& t, NodeId x);
NodeId cos_sim(Tape& t, NodeId a, NodeId b);
NodeId dropout(Tape& t, NodeId x, Tensor mask);
NodeId gather(Tape& t, NodeId v, int index);
NodeId sum(Tape& t, NodeId x);
NodeId scale(Tape& t, NodeId x, double c);
NodeId add_const(Tape& t, NodeId x, double c);

inline NodeId sub(Tape& t, NodeId a, NodeId b) { return add(t, a, scale(t, b, -1.0)); }

}  // namespace pgmel
