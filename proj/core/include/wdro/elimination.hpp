#pragma once

// Double-loop baseline: per-sample warm-started BFGS maximization of
// h(theta, v; x) = l(theta, v) - |v - x|^2 / (2 gamma), followed by a
// first-order theta step on the eliminated objective.

#include "wdro/bfgs.hpp"
#include "wdro/particles.hpp"

namespace wdro {

struct InnerSolution {
  Vec v;
  InnerSolveReport report;
};

/// argmax_v h(theta, v; x) starting from v_init.
InnerSolution inner_maximize(const LossModel& loss, VecView theta, VecView x, Label y, double gamma,
                             VecView v_init, double tol, Index max_iters = 200);

namespace elim {

/// Outer iterations: solve every i in the batch from v_i^{k-1}, then
/// theta <- theta - tau * mean d_theta l(theta, v_i*). NGE per iteration is
/// the largest per-sample gradient count in the batch.
RunLog run(ParticleState& state, const Problem& problem, const SolverConfig& cfg,
           TransportNet* map = nullptr, const StateHook& hook = {});

}  // namespace elim

}  // namespace wdro
