#pragma once

#include <functional>
#include <span>
#include <string>

#include "dida/tensor/tape.hpp"

namespace dida {

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::string worst_param;
  std::size_t worst_index = 0;
  double worst_fd = 0.0;
  double worst_tape = 0.0;
  std::size_t coordinates = 0;
};

// Builds a scalar-valued graph over the given parameters.
using GraphBuilder = std::function<Var(Tape&)>;

// Compares tape gradients with central differences at the parameters'
// current values. Per coordinate the error is
// |g_fd - g_tape| / max(1e-8, |g_fd| + |g_tape|); the maximum is returned.
// Parameter values are restored on exit, and their `grad` is left holding the
// tape gradient.
GradCheckResult finite_diff_check(const GraphBuilder& build, std::span<Parameter* const> params,
                                  double eps = 1e-5);

}  // namespace dida
