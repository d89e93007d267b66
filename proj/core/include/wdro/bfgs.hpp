#pragma once

// Dense-inverse-Hessian BFGS with backtracking Armijo line search, used for
// the per-sample inner maximizations and the proximal subproblems.

#include "wdro/core.hpp"

#include <functional>
#include <limits>

namespace wdro {

struct BfgsOptions {
  double tol = 1e-5;  ///< stop when |grad| <= tol
  Index max_iters = 200;
  double c1 = 1e-4;
  Index max_backtracks = 40;
};

struct InnerSolveReport {
  Index iterations = 0;
  Index grad_evals = 0;  ///< including the one at the starting point
  Index func_evals = 0;  ///< value-only evaluations during line search
  double optimality = std::numeric_limits<double>::infinity();
  bool converged = false;
  bool line_search_failed = false;
};

struct BfgsState {
  Mat inv_hessian;  ///< symmetric positive definite; reset to I on curvature failure
  Vec x;
  Vec grad;
  double value = 0.0;
};

/// Smooth objective to be minimized.
struct BfgsObjective {
  std::function<double(const Vec&)> value;
  /// Returns the value and writes the gradient.
  std::function<double(const Vec&, Vec&)> value_grad;
};

/// Minimizes f starting from state.x. On return state holds the best
/// iterate and its gradient. Never throws on non-convergence.
InnerSolveReport bfgs_minimize(const BfgsObjective& f, BfgsState& state, const BfgsOptions& opts);

}  // namespace wdro
