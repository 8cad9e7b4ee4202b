#pragma once

#include <span>

#include "pgmel/tape.hpp"

namespace pgmel {

double global_grad_norm(std::span<Parameter* const> params);

void zero_grads(std::span<Parameter* const> params);

/// One SGD step with global-norm clipping: if the L2 norm of the concatenated
/// gradient exceeds `clip`, every gradient is scaled by clip/norm before
/// value -= lr * grad. Gradients are zeroed afterwards. Non-finite gradients
/// abort the step with NumericFault and leave all parameters untouched.
void sgd_step(std::span<Parameter* const> params, double lr, double clip);

}  // namespace pgmel
