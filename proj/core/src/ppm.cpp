#include "wdro/ppm.hpp"

#include "wdro/elimination.hpp"
#include "wdro/parallel.hpp"
#include "wdro/transport_net.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace wdro {

InnerSolution prox_step(const LossModel& loss, VecView theta, VecView t, VecView x, Label y, double gamma,
                        double s, double inner_tol, double rho_est, const Vec* v_init) {
  if (!(gamma > 0.0) || !(s > 0.0)) throw ConfigError("prox_step: gamma and s must be positive");
  if (!(1.0 / gamma + 1.0 / s > rho_est))
    throw ConfigError("prox_step: need 1/gamma + 1/s > rho_est for a strongly convex subproblem");
  if (!(inner_tol > 0.0)) throw ConfigError("prox_step: inner_tol must be positive");
  const double ig = 1.0 / gamma;
  const double is = 1.0 / s;
  BfgsObjective f;
  f.value = [&](const Vec& v) {
    return -loss.value(theta, v, y) + 0.5 * ig * (v - x).squaredNorm() + 0.5 * is * (v - t).squaredNorm();
  };
  f.value_grad = [&](const Vec& v, Vec& g) {
    LossEval e = loss.evaluate(theta, v, y);
    g = -e.grad_v + ig * (v - x) + is * (v - t);
    return -e.value + 0.5 * ig * (v - x).squaredNorm() + 0.5 * is * (v - t).squaredNorm();
  };
  BfgsState st;
  st.x = v_init != nullptr ? *v_init : Vec(t);
  BfgsOptions opts;
  opts.tol = inner_tol;
  InnerSolution out;
  out.report = bfgs_minimize(f, st, opts);
  out.v = std::move(st.x);
  return out;
}

Vec prox_residual(const LossModel& loss, VecView theta, VecView v, VecView t, VecView x, Label y, double gamma,
                  double s) {
  return -loss.grad_v(theta, v, y) + (v - x) / gamma + (v - t) / s;
}

namespace ppm {

void validate(const SolverConfig& cfg, double gamma) {
  if (!(cfg.ppm_s > 0.0)) throw ConfigError("ppm: ppm_s must be set to a positive value");
  const double damping = cfg.eta / cfg.ppm_s;
  if (!(damping > 0.0) || damping > 1.0) throw ConfigError("ppm: damping eta / s must lie in (0, 1]");
  if (cfg.rho_est < 0.0) throw ConfigError("ppm: rho_est must be nonnegative");
  if (cfg.rho_est > 0.0 && !(cfg.ppm_s < 1.0 / cfg.rho_est)) throw ConfigError("ppm: need s < 1 / rho_est");
  if (!(1.0 / gamma + 1.0 / cfg.ppm_s > cfg.rho_est)) throw ConfigError("ppm: need 1/gamma + 1/s > rho_est");
}

namespace {

struct ProxPass {
  std::vector<InnerSolveReport> reports;
  std::vector<LossEval> evals;
};

ProxPass prox_pass(ParticleState& state, const Problem& problem, const SolverConfig& cfg,
                   const std::vector<Index>& batch) {
  const auto& data = problem.data();
  const auto& loss = problem.loss();
  ProxPass pass;
  pass.reports.resize(batch.size());
  pass.evals.resize(batch.size());
  parallel_for(static_cast<Index>(batch.size()), cfg.threads, [&](Index b) {
    const Index i = batch[static_cast<std::size_t>(b)];
    const Vec warm = state.v_plus.row(i).transpose();
    InnerSolution sol = prox_step(loss, state.theta, state.v.row(i).transpose(), data.sample(i), data.label(i),
                                  problem.gamma(), cfg.ppm_s, cfg.inner_tol, cfg.rho_est, &warm);
    state.v_plus.row(i) = sol.v.transpose();
    pass.reports[static_cast<std::size_t>(b)] = sol.report;
    pass.evals[static_cast<std::size_t>(b)] = loss.evaluate(state.theta, sol.v, data.label(i));
  });
  return pass;
}

}  // namespace

RunLog run(ParticleState& state, const Problem& problem, const SolverConfig& cfg, TransportNet* map,
           const StateHook& hook) {
  const auto& data = problem.data();
  const Index n = data.size();
  cfg.validate(n);
  validate(cfg, problem.gamma());
  RunLog log;
  log.family = SolverFamily::Ppm;
  if (cfg.rho_est == 0.0) log.warnings.push_back("rho_est unset; step-size conditions were not checked");
  if (state.v_plus.rows() != state.v.rows() || state.v_plus.cols() != state.v.cols()) state.v_plus = state.v;
  const double s = cfg.ppm_s;
  const double gamma = problem.gamma();
  const double damping = cfg.eta / s;

  while (state.k < cfg.max_iters && !state.converged) {
    const std::vector<Index> batch = state.schedule.next();
    const Index m = static_cast<Index>(batch.size());
    ProxPass pass = prox_pass(state, problem, cfg, batch);

    NgeStats stats{pass.reports.front().grad_evals, pass.reports.front().grad_evals, 0.0};
    double iters_sum = 0.0;
    Index failures = 0;
    Vec mean_gt = Vec::Zero(state.theta.size());
    double sum_T2 = 0.0;
    double sum_obj = 0.0;
    double moreau = 0.0;
    for (Index b = 0; b < m; ++b) {
      const std::size_t bs = static_cast<std::size_t>(b);
      const Index i = batch[bs];
      const auto& r = pass.reports[bs];
      stats.max = std::max(stats.max, r.grad_evals);
      stats.min = std::min(stats.min, r.grad_evals);
      stats.mean += static_cast<double>(r.grad_evals);
      iters_sum += static_cast<double>(r.iterations);
      state.function_evals += r.func_evals;
      if (!r.converged) ++failures;

      const Vec tp = state.v_plus.row(i).transpose();
      const Vec t = state.v.row(i).transpose();
      const Vec x = data.sample(i);
      const Vec dT = (t - tp) / s;
      sum_T2 += dT.squaredNorm();
      mean_gt += pass.evals[bs].grad_theta;
      sum_obj += pass.evals[bs].value - (tp - x).squaredNorm() / (2.0 * gamma);
      const Vec dH = -pass.evals[bs].grad_v + (tp - x) / gamma;
      moreau = std::max(moreau, (dH - dT).norm());
    }
    const double inv_m = 1.0 / static_cast<double>(m);
    stats.mean *= inv_m;
    mean_gt *= inv_m;
    state.nge += stats.max;
    if (failures > 0)
      log.warnings.push_back("iteration " + std::to_string(state.k) + ": " + std::to_string(failures) +
                             " proximal solve(s) did not converge");

    IterRecord rec;
    rec.k = state.k;
    rec.gn_theta = mean_gt.norm();
    rec.gn_T = std::sqrt(sum_T2 * inv_m);
    rec.objective = sum_obj * inv_m;
    rec.nge_cumulative = state.nge;
    rec.prox_inner_iters_mean = iters_sum * inv_m;
    rec.moreau_residual = moreau;
    rec.inner_failures = failures;
    if (!std::isfinite(rec.gn_theta) || !std::isfinite(rec.gn_T) || !std::isfinite(rec.objective))
      throw DivergenceError(state.k, "non-finite gradient");
    const GradNorms batch_norms{rec.gn_theta, rec.gn_T};

    bool stop = batch_norms.below(cfg.tol);
    if (cfg.log_full_norms || stop) {
      if (state.schedule.full_batch()) {
        rec.full = batch_norms;
      } else {
        std::vector<Index> all(static_cast<std::size_t>(n));
        std::iota(all.begin(), all.end(), Index{0});
        ParticleState probe = state;
        ProxPass full = prox_pass(probe, problem, cfg, all);
        Vec g = Vec::Zero(state.theta.size());
        double t2 = 0.0;
        for (Index i = 0; i < n; ++i) {
          g += full.evals[static_cast<std::size_t>(i)].grad_theta;
          t2 += ((probe.v.row(i) - probe.v_plus.row(i)) / s).squaredNorm();
        }
        rec.full = GradNorms{(g / static_cast<double>(n)).norm(), std::sqrt(t2 / static_cast<double>(n))};
      }
      stop = stop && rec.full->below(cfg.tol);
    }

    if (stop) {
      state.converged = true;
    } else {
      for (Index i : batch) state.v.row(i) += damping * (state.v_plus.row(i) - state.v.row(i));
      state.theta -= cfg.tau * mean_gt;
      if (map != nullptr) rec.matching_loss = map->matching_update(batch_pairs(data, state.v, batch));
    }
    ++state.k;
    log.rows.push_back(rec);
    log.final_norms = batch_norms;
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

}  // namespace ppm

}  // namespace wdro
