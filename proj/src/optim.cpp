#include "pgmel/optim.hpp"

#include <cmath>

namespace pgmel {

double global_grad_norm(std::span<Parameter* const> params) {
  double sq = 0.0;
  for (const Parameter* p : params) sq += p->grad.data().squaredNorm();
  return std::sqrt(sq);
}

void zero_grads(std::span<Parameter* const> params) {
  for (Parameter* p : params) p->zero_grad();
}

void sgd_step(std::span<Parameter* const> params, double lr, double clip) {
  if (lr <= 0.0) throw ContractViolation("sgd_step: lr must be positive");
  if (clip <= 0.0) throw ContractViolation("sgd_step: clip must be positive");
  for (const Parameter* p : params) {
    if (!p->grad.all_finite()) {
      throw NumericFault("non-finite gradient in parameter " + p->name);
    }
  }
  double norm = global_grad_norm(params);
  double factor = norm > clip ? clip / norm : 1.0;
  for (Parameter* p : params) {
    p->value.data() -= (lr * factor) * p->grad.data();
    p->zero_grad();
  }
}

}  // namespace pgmel
