#pragma once

// Finite-sample particle state and the GDA family of updates: plain,
// heavy-ball momentum, and alternating, driven by a cyclic batch schedule.

#include "wdro/core.hpp"
#include "wdro/problem.hpp"
#include "wdro/run_log.hpp"
#include "wdro/schedule.hpp"

#include <nlohmann/json.hpp>

#include <functional>
#include <span>
#include <vector>

namespace wdro {

class TransportNet;

/// Iterate (theta, {v_i}) plus momentum buffers and schedule. PPM stores its
/// proximal points in v_plus; other solvers leave it empty.
struct ParticleState {
  Vec theta;
  Particles v;
  Particles g;      ///< per-particle velocity
  Vec h;            ///< theta velocity
  Particles v_plus;
  Index k = 0;      ///< rows logged so far
  Index nge = 0;    ///< cumulative gradient passes over the batch
  Index function_evals = 0;
  bool converged = false;
  BatchSchedule schedule;

  nlohmann::json to_json() const;
  static ParticleState from_json(const nlohmann::json& j);
};

/// v = data, zero velocities, fresh schedule.
ParticleState make_state(const data::Dataset& data, const Vec& theta0, const SolverConfig& cfg);

/// theta0 = scale * N(0, I) from the theta stream of `seed`.
Vec random_theta(Index p, double scale, std::uint64_t seed);

/// Hook invoked after every logged row with the post-update state.
using StateHook = std::function<void(const IterRecord&, const ParticleState&)>;

/// Per-particle evaluation of l and d_T L on a batch.
struct BatchGradients {
  std::vector<Index> batch;
  std::vector<LossEval> evals;   ///< one per batch entry
  std::vector<Vec> grad_T;       ///< d_v l - (v - x) / gamma
  Vec mean_grad_theta;
  double objective = 0.0;        ///< batch mean of l - |v - x|^2 / (2 gamma)
  GradNorms norms;
  bool finite = true;            ///< false if any value or gradient is non-finite
};

BatchGradients evaluate_batch(const Problem& problem, const Vec& theta, const Particles& v,
                              std::span<const Index> batch, Index threads = 1);

/// Full-data norms at (theta, v).
GradNorms full_grad_norms(const Problem& problem, const Vec& theta, const Particles& v, Index threads = 1);

namespace gda {

/// Applies one (momentum) GDA update on `grads.batch` given gradients at the
/// current iterate. Particles outside the batch are untouched.
void apply_update(ParticleState& state, const Problem& problem, const SolverConfig& cfg,
                  const BatchGradients& grads);

/// Draws a batch, evaluates, and applies one update. Returns the gradients at
/// the pre-update iterate.
BatchGradients step(ParticleState& state, const Problem& problem, const SolverConfig& cfg);

/// Iterates until both batch norms (and, for m < n, the full-data norms)
/// fall below cfg.tol, or cfg.max_iters rows have been logged. When `map` is
/// given it is trained on each batch's fresh (x_i, v_i^{k+1}) pairs.
RunLog run(ParticleState& state, const Problem& problem, const SolverConfig& cfg,
           TransportNet* map = nullptr, const StateHook& hook = {});

}  // namespace gda

/// Abort threshold on particle norms.
inline constexpr double kDivergenceBound = 1e6;

/// Throws DivergenceError if theta or any particle is non-finite or a
/// particle norm exceeds kDivergenceBound.
void check_divergence(const ParticleState& state, Index iteration);

/// Teacher pairs (x_i, v_i, y_i) for the given indices.
struct TeacherPairs;
TeacherPairs batch_pairs(const data::Dataset& data, const Particles& v, std::span<const Index> batch);

nlohmann::json matrix_to_json(const Particles& m);
Particles matrix_from_json(const nlohmann::json& j);

}  // namespace wdro
