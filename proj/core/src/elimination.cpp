#include "wdro/elimination.hpp"

#include "wdro/parallel.hpp"
#include "wdro/transport_net.hpp"

#include <algorithm>

namespace wdro {

InnerSolution inner_maximize(const LossModel& loss, VecView theta, VecView x, Label y, double gamma,
                             VecView v_init, double tol, Index max_iters) {
  if (!(tol > 0.0)) throw ConfigError("inner_maximize: tol must be positive");
  if (!(gamma > 0.0)) throw ConfigError("inner_maximize: gamma must be positive");
  const double inv_g = 1.0 / gamma;
  BfgsObjective f;
  f.value = [&](const Vec& v) { return -loss.value(theta, v, y) + 0.5 * inv_g * (v - x).squaredNorm(); };
  f.value_grad = [&](const Vec& v, Vec& g) {
    LossEval e = loss.evaluate(theta, v, y);
    g = -e.grad_v + inv_g * (v - x);
    return -e.value + 0.5 * inv_g * (v - x).squaredNorm();
  };
  BfgsState st;
  st.x = v_init;
  BfgsOptions opts;
  opts.tol = tol;
  opts.max_iters = max_iters;
  InnerSolution out;
  out.report = bfgs_minimize(f, st, opts);
  out.v = std::move(st.x);
  return out;
}

namespace elim {

RunLog run(ParticleState& state, const Problem& problem, const SolverConfig& cfg, TransportNet* map,
           const StateHook& hook) {
  const auto& data = problem.data();
  const auto& loss = problem.loss();
  const Index n = data.size();
  cfg.validate(n);
  RunLog log;
  log.family = SolverFamily::Elim;
  const bool full_batch = state.schedule.full_batch();

  while (state.k < cfg.max_iters && !state.converged) {
    const std::vector<Index> batch = state.schedule.next();
    const Index m = static_cast<Index>(batch.size());
    std::vector<InnerSolveReport> reports(batch.size());
    parallel_for(m, cfg.threads, [&](Index b) {
      const Index i = batch[static_cast<std::size_t>(b)];
      InnerSolution sol = inner_maximize(loss, state.theta, data.sample(i), data.label(i), problem.gamma(),
                                         state.v.row(i).transpose(), cfg.inner_tol);
      state.v.row(i) = sol.v.transpose();
      reports[static_cast<std::size_t>(b)] = sol.report;
    });

    NgeStats stats{reports.front().grad_evals, reports.front().grad_evals, 0.0};
    Index failures = 0;
    for (const auto& r : reports) {
      stats.max = std::max(stats.max, r.grad_evals);
      stats.min = std::min(stats.min, r.grad_evals);
      stats.mean += static_cast<double>(r.grad_evals);
      state.function_evals += r.func_evals;
      if (!r.converged) ++failures;
    }
    stats.mean /= static_cast<double>(m);
    state.nge += stats.max;
    if (failures > 0)
      log.warnings.push_back("iteration " + std::to_string(state.k) + ": " + std::to_string(failures) +
                             " inner solve(s) did not converge");

    BatchGradients grads = evaluate_batch(problem, state.theta, state.v, batch, cfg.threads);
    if (!grads.finite) throw DivergenceError(state.k, "non-finite gradient");

    IterRecord rec;
    rec.k = state.k;
    rec.gn_theta = grads.norms.gn_theta;
    rec.gn_T = grads.norms.gn_T;
    rec.objective = grads.objective;
    rec.nge_cumulative = state.nge;
    rec.nge_batch = stats;
    rec.inner_failures = failures;

    bool stop = grads.norms.below(cfg.tol);
    if (full_batch) {
      if (cfg.log_full_norms) rec.full = grads.norms;
    } else if (cfg.log_full_norms || stop) {
      rec.full = full_grad_norms(problem, state.theta, state.v, cfg.threads);
      stop = stop && rec.full->below(cfg.tol);
    }

    if (stop) {
      state.converged = true;
    } else {
      state.theta -= cfg.tau * grads.mean_grad_theta;
      if (map != nullptr) rec.matching_loss = map->matching_update(batch_pairs(data, state.v, batch));
    }
    ++state.k;
    log.rows.push_back(rec);
    log.final_norms = grads.norms;
    if (rec.full) log.final_full_norms = rec.full;
    if (hook) hook(rec, state);
    if (!state.converged) check_divergence(state, rec.k);
  }

  log.converged = state.converged;
  log.iterations = state.k;
  log.nge_total = state.nge;
  log.function_evals = state.function_evals;
  return log;
}

}  // namespace elim

}  // namespace wdro
