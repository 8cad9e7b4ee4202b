#pragma once

#include <functional>
#include <vector>

#include "pgmel/tape.hpp"

namespace pgmel {

/// A scalar-valued taped function: records its computation on the tape and
/// returns the output node. The input leaves are supplied already recorded.
using TapedFn = std::function<NodeId(Tape&, const std::vector<NodeId>&)>;

/// Gradients of fn at `point` via reverse-mode accumulation, one tensor per
/// input, in input order.
std::vector<Tensor> analytic_gradients(const TapedFn& fn, const std::vector<Tensor>& point);

/// Gradients of fn at `point` via central differences with step eps.
std::vector<Tensor> numeric_gradients(const TapedFn& fn, const std::vector<Tensor>& point,
                                      double eps);

/// max over coordinates of |a - b| / max(1, |a|). Non-finite entries count
/// as infinite error.
double max_relative_error(const std::vector<Tensor>& analytic,
                          const std::vector<Tensor>& numeric);

/// Compares reverse-mode gradients against central differences.
double check_gradients(const TapedFn& fn, const std::vector<Tensor>& point, double eps);

}  // namespace pgmel
