#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <string>

#include "dfac/diff/graph.hpp"

namespace dfac::diff {

struct GradCheckResult {
  bool passed = true;
  double max_rel_error = 0.0;  // over entries above the absolute floor
  double max_abs_error = 0.0;
  std::string worst;        // "<param>[<index>]" with the largest error
  std::size_t checked = 0;  // scalar entries compared
};

/// Compares backward() against central differences for every entry of every
/// parameter. An entry passes when its relative error is below `rel_tol` or
/// its absolute error is below `abs_floor`. `loss` must build a scalar on the
/// given graph, binding the parameters mutably.
GradCheckResult gradient_check(std::span<Parameter* const> params, const std::function<Var(Graph&)>& loss,
                               double step = 1e-5, double rel_tol = 1e-4, double abs_floor = 1e-7);

}  // namespace dfac::diff
