#include "wdro/bfgs.hpp"

#include <cmath>
#include <limits>

namespace wdro {

InnerSolveReport bfgs_minimize(const BfgsObjective& f, BfgsState& state, const BfgsOptions& opts) {
  if (!(opts.tol > 0.0)) throw ConfigError("bfgs: tol must be positive");
  const Index d = state.x.size();
  InnerSolveReport rep;
  state.value = f.value_grad(state.x, state.grad);
  ++rep.grad_evals;
  Mat& H = state.inv_hessian;
  H = Mat::Identity(d, d);
  bool fresh = true;

  while (true) {
    rep.optimality = state.grad.norm();
    if (!std::isfinite(rep.optimality) || !std::isfinite(state.value)) break;
    if (rep.optimality <= opts.tol) {
      rep.converged = true;
      break;
    }
    if (rep.iterations >= opts.max_iters) break;

    Vec p = -(H * state.grad);
    double slope = state.grad.dot(p);
    if (!(slope < 0.0)) {
      H.setIdentity();
      fresh = true;
      p = -state.grad;
      slope = -state.grad.squaredNorm();
    }

    double alpha = 1.0;
    bool accepted = false;
    Vec x_new;
    const double noise = 16.0 * std::numeric_limits<double>::epsilon() * (1.0 + std::abs(state.value));
    for (Index bt = 0; bt <= opts.max_backtracks; ++bt) {
      if (-alpha * slope < noise) break;
      x_new = state.x + alpha * p;
      const double fv = f.value(x_new);
      ++rep.func_evals;
      if (std::isfinite(fv) && fv <= state.value + opts.c1 * alpha * slope) {
        accepted = true;
        break;
      }
      alpha *= 0.5;
    }
    Vec g_new;
    double f_new = 0.0;
    if (accepted) {
      f_new = f.value_grad(x_new, g_new);
      ++rep.grad_evals;
    } else {
      // value decrease below roundoff: accept the full step if it reduces the gradient norm
      x_new = state.x + p;
      f_new = f.value_grad(x_new, g_new);
      ++rep.grad_evals;
      if (!std::isfinite(f_new) || !g_new.allFinite() || !(g_new.norm() < rep.optimality)) {
        rep.line_search_failed = true;
        break;
      }
    }
    ++rep.iterations;
    const Vec s = x_new - state.x;
    const Vec y = g_new - state.grad;
    const double sy = s.dot(y);
    if (sy > 1e-12 * s.norm() * y.norm() && sy > 0.0) {
      if (fresh) {
        H *= sy / y.squaredNorm();
        fresh = false;
      }
      const double r = 1.0 / sy;
      const Vec Hy = H * y;
      const double yHy = y.dot(Hy);
      H += ((1.0 + r * yHy) * r) * (s * s.transpose()) - r * (Hy * s.transpose() + s * Hy.transpose());
    } else {
      H.setIdentity();
      fresh = true;
    }
    state.x = x_new;
    state.grad = std::move(g_new);
    state.value = f_new;
  }
  return rep;
}

}  // namespace wdro
