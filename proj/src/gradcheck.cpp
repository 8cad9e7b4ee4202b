#include "pgmel/gradcheck.hpp"

#include <cmath>
#include <limits>

namespace pgmel {

namespace {

double eval_at(const TapedFn& fn, const std::vector<Tensor>& point) {
  Tape tape;
  std::vector<NodeId> ids;
  ids.reserve(point.size());
  for (const Tensor& t : point) ids.push_back(tape.leaf(t));
  NodeId out = fn(tape, ids);
  return tape.value(out).scalar_value();
}

}  // namespace

std::vector<Tensor> analytic_gradients(const TapedFn& fn, const std::vector<Tensor>& point) {
  Tape tape;
  std::vector<NodeId> ids;
  ids.reserve(point.size());
  for (const Tensor& t : point) ids.push_back(tape.leaf(t, /*needs_grad=*/true));
  NodeId out = fn(tape, ids);
  tape.backward(out);
  std::vector<Tensor> grads;
  grads.reserve(point.size());
  for (size_t i = 0; i < point.size(); ++i) {
    const Tensor& g = tape.grad(ids[i]);
    grads.push_back(g.empty() ? Tensor::zeros(point[i].shape()) : g);
  }
  return grads;
}

std::vector<Tensor> numeric_gradients(const TapedFn& fn, const std::vector<Tensor>& point,
                                      double eps) {
  if (eps <= 0.0) throw ContractViolation("check_gradients: eps must be positive");
  std::vector<Tensor> grads;
  grads.reserve(point.size());
  std::vector<Tensor> probe = point;
  for (size_t i = 0; i < point.size(); ++i) {
    Tensor g = Tensor::zeros(point[i].shape());
    for (Eigen::Index j = 0; j < point[i].size(); ++j) {
      double orig = probe[i][j];
      probe[i][j] = orig + eps;
      double f_plus = eval_at(fn, probe);
      probe[i][j] = orig - eps;
      double f_minus = eval_at(fn, probe);
      probe[i][j] = orig;
      g[j] = (f_plus - f_minus) / (2.0 * eps);
    }
    grads.push_back(std::move(g));
  }
  return grads;
}

double max_relative_error(const std::vector<Tensor>& analytic,
                          const std::vector<Tensor>& numeric) {
  double worst = 0.0;
  for (size_t i = 0; i < analytic.size(); ++i) {
    for (Eigen::Index j = 0; j < analytic[i].size(); ++j) {
      double a = analytic[i][j];
      double n = numeric[i][j];
      if (!std::isfinite(a) || !std::isfinite(n)) {
        return std::numeric_limits<double>::infinity();
      }
      double err = std::abs(a - n) / std::max(1.0, std::abs(a));
      worst = std::max(worst, err);
    }
  }
  return worst;
}

double check_gradients(const TapedFn& fn, const std::vector<Tensor>& point, double eps) {
  return max_relative_error(analytic_gradients(fn, point),
                            numeric_gradients(fn, point, eps));
}

}  // namespace pgmel
