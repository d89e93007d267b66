#pragma once

// One-sided damped proximal point scheme:
//   t+  = prox of the penalized negative loss at t with step s,
//   t  <- t + (eta / s)(t+ - t),
//   theta <- theta - tau * mean d_theta l(theta, t+).

#include "wdro/elimination.hpp"
#include "wdro/particles.hpp"

namespace wdro {

/// argmin_v -l(theta, v) + |v - x|^2 / (2 gamma) + |v - t|^2 / (2 s), solved
/// by BFGS from v_init (t when empty). Throws ConfigError unless
/// 1/gamma + 1/s > rho_est.
InnerSolution prox_step(const LossModel& loss, VecView theta, VecView t, VecView x, Label y, double gamma,
                        double s, double inner_tol, double rho_est = 0.0, const Vec* v_init = nullptr);

/// Residual -d_v l(theta, v) + (v - x)/gamma + (v - t)/s.
Vec prox_residual(const LossModel& loss, VecView theta, VecView v, VecView t, VecView x, Label y, double gamma,
                  double s);

namespace ppm {

/// Throws ConfigError on a missing or inconsistent proximal configuration.
void validate(const SolverConfig& cfg, double gamma);

/// state.v holds t; state.v_plus holds the latest proximal points. Logged
/// norms are |(t - t+)/s| and |mean d_theta l(theta, t+)|; the row's
/// moreau_residual is max_i |d_T H(t_i+) - (t_i - t_i+)/s|.
RunLog run(ParticleState& state, const Problem& problem, const SolverConfig& cfg,
           TransportNet* map = nullptr, const StateHook& hook = {});

}  // namespace ppm

}  // namespace wdro
