#pragma once

#include <functional>
#include <string>

#include "hmeqa/graph.hpp"

namespace hmeqa {

struct GradCheckReport {
  double max_relative_error = 0.0;
  std::string worst_parameter;
  std::size_t worst_index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  std::size_t checked = 0;
};

/// Builds the scalar loss on a fresh graph from the current parameter values.
using LossBuilder = std::function<Var<double>(Graph<double>&)>;

/// Compares backward() against central differences for every scalar of every
/// parameter: max |analytic − numeric| / max(|analytic|, |numeric|, 1e-6).
/// The floor sits well above central-difference roundoff (about 1e-10 for O(1)
/// losses at h = 1e-5), so near-zero gradients are compared in absolute terms.
/// Parameter values are restored on return; parameter grads are overwritten.
GradCheckReport grad_check(const LossBuilder& loss, ParameterSet<double>& params, double step = 1e-5);

/// Relative error as used by grad_check.
double relative_error(double analytic, double numeric);

}  // namespace hmeqa
