#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "pgmel/gradcheck.hpp"

namespace pgmel {

struct GradcheckCase {
  std::string name;
  int cases = 0;
  double max_error = 0.0;
};

/// Finite-difference sweep over every tape primitive (random shapes and
/// points) plus the composed mention-entity score, differentiated with
/// respect to every model parameter. Returns the worst relative error per
/// surface.
std::vector<GradcheckCase> gradcheck_suite(uint64_t seed, int cases_per_op);

}  // namespace pgmel
