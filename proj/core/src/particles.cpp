#include "wdro/particles.hpp"

#include "wdro/parallel.hpp"
#include "wdro/rng.hpp"
#include "wdro/transport_net.hpp"

#include <cmath>
#include <numeric>

namespace wdro {

nlohmann::json matrix_to_json(const Particles& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (Index i = 0; i < m.rows(); ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return {{"rows", m.rows()}, {"cols", m.cols()}, {"data", std::move(rows)}};
}

Particles matrix_from_json(const nlohmann::json& j) {
  const Index r = j.at("rows").get<Index>();
  const Index c = j.at("cols").get<Index>();
  const auto& data = j.at("data");
  if (static_cast<Index>(data.size()) != r) throw ParseError("matrix: row count mismatch");
  Particles m(r, c);
  for (Index i = 0; i < r; ++i) {
    const auto& row = data.at(static_cast<std::size_t>(i));
    if (static_cast<Index>(row.size()) != c) throw ParseError("matrix: column count mismatch");
    for (Index k = 0; k < c; ++k) m(i, k) = row.at(static_cast<std::size_t>(k)).get<double>();
  }
  return m;
}

nlohmann::json ParticleState::to_json() const {
  return {{"theta", nn::vec_to_json(theta)},
          {"v", matrix_to_json(v)},
          {"g", matrix_to_json(g)},
          {"h", nn::vec_to_json(h)},
          {"v_plus", matrix_to_json(v_plus)},
          {"k", k},
          {"nge", nge},
          {"function_evals", function_evals},
          {"converged", converged},
          {"schedule", schedule.to_json()}};
}

ParticleState ParticleState::from_json(const nlohmann::json& j) {
  ParticleState s;
  s.theta = nn::vec_from_json(j.at("theta"));
  s.v = matrix_from_json(j.at("v"));
  s.g = matrix_from_json(j.at("g"));
  s.h = nn::vec_from_json(j.at("h"));
  s.v_plus = matrix_from_json(j.at("v_plus"));
  s.k = j.at("k").get<Index>();
  s.nge = j.at("nge").get<Index>();
  s.function_evals = j.value("function_evals", Index{0});
  s.converged = j.value("converged", false);
  s.schedule = BatchSchedule::from_json(j.at("schedule"));
  if (s.g.rows() != s.v.rows() || s.g.cols() != s.v.cols() || s.h.size() != s.theta.size())
    throw ParseError("particle state: inconsistent shapes");
  return s;
}

ParticleState make_state(const data::Dataset& data, const Vec& theta0, const SolverConfig& cfg) {
  cfg.validate(data.size());
  ParticleState s;
  s.theta = theta0;
  s.v = data.samples();
  s.g = Particles::Zero(data.size(), data.dim());
  s.h = Vec::Zero(theta0.size());
  s.schedule = BatchSchedule(data.size(), cfg.resolved_batch(data.size()), cfg.seed);
  return s;
}

Vec random_theta(Index p, double scale, std::uint64_t seed) {
  CounterRng rng(seed, streams::kTheta);
  Vec t(p);
  for (Index i = 0; i < p; ++i) t[i] = scale * rng.normal();
  return t;
}

BatchGradients evaluate_batch(const Problem& problem, const Vec& theta, const Particles& v,
                              std::span<const Index> batch, Index threads) {
  if (batch.empty()) throw UsageError("empty batch");
  const auto& loss = problem.loss();
  const auto& data = problem.data();
  const double gamma = problem.gamma();
  const Index m = static_cast<Index>(batch.size());

  BatchGradients out;
  out.batch.assign(batch.begin(), batch.end());
  out.evals.resize(batch.size());
  out.grad_T.resize(batch.size());
  std::vector<double> pen(batch.size());
  parallel_for(m, threads, [&](Index b) {
    const Index i = batch[static_cast<std::size_t>(b)];
    const auto vi = v.row(i).transpose();
    const auto xi = data.sample(i);
    auto& e = out.evals[static_cast<std::size_t>(b)];
    e = loss.evaluate(theta, vi, data.label(i));
    out.grad_T[static_cast<std::size_t>(b)] = grad_T_from(e.grad_v, vi, xi, gamma);
    pen[static_cast<std::size_t>(b)] = (vi - xi).squaredNorm() / (2.0 * gamma);
  });

  Vec sum_theta = Vec::Zero(theta.size());
  double sum_T2 = 0.0;
  double sum_obj = 0.0;
  for (std::size_t b = 0; b < batch.size(); ++b) {
    sum_theta += out.evals[b].grad_theta;
    sum_T2 += out.grad_T[b].squaredNorm();
    sum_obj += out.evals[b].value - pen[b];
  }
  const double inv_m = 1.0 / static_cast<double>(m);
  out.mean_grad_theta = inv_m * sum_theta;
  out.objective = inv_m * sum_obj;
  out.norms.gn_theta = out.mean_grad_theta.norm();
  out.norms.gn_T = std::sqrt(inv_m * sum_T2);
  out.finite = std::isfinite(out.objective) && std::isfinite(out.norms.gn_theta) && std::isfinite(out.norms.gn_T);
  return out;
}

GradNorms full_grad_norms(const Problem& problem, const Vec& theta, const Particles& v, Index threads) {
  std::vector<Index> all(static_cast<std::size_t>(problem.data().size()));
  std::iota(all.begin(), all.end(), Index{0});
  return evaluate_batch(problem, theta, v, all, threads).norms;
}

void check_divergence(const ParticleState& state, Index iteration) {
  if (!state.theta.allFinite()) throw DivergenceError(iteration, "non-finite theta");
  for (Index i = 0; i < state.v.rows(); ++i) {
    const double nv = state.v.row(i).norm();
    if (!std::isfinite(nv)) throw DivergenceError(iteration, "non-finite particle " + std::to_string(i));
    if (nv > kDivergenceBound)
      throw DivergenceError(iteration, "particle " + std::to_string(i) + " norm exceeds the divergence bound");
  }
}

TeacherPairs batch_pairs(const data::Dataset& data, const Particles& v, std::span<const Index> batch) {
  TeacherPairs p;
  const Index m = static_cast<Index>(batch.size());
  p.x.resize(m, data.dim());
  p.v.resize(m, data.dim());
  if (data.num_classes() > 1) p.y.reserve(batch.size());
  for (Index b = 0; b < m; ++b) {
    const Index i = batch[static_cast<std::size_t>(b)];
    p.x.row(b) = data.samples().row(i);
    p.v.row(b) = v.row(i);
    if (data.num_classes() > 1) p.y.push_back(data.label(i));
  }
  return p;
}

namespace gda {

void apply_update(ParticleState& state, const Problem& problem, const SolverConfig& cfg,
                  const BatchGradients& grads) {
  const double nu = cfg.momentum;
  const Index m = static_cast<Index>(grads.batch.size());
  parallel_for(m, cfg.threads, [&](Index b) {
    const Index i = grads.batch[static_cast<std::size_t>(b)];
    const Vec& gt = grads.grad_T[static_cast<std::size_t>(b)];
    state.g.row(i) = nu * state.g.row(i) + gt.transpose();
    state.v.row(i) += cfg.eta * state.g.row(i);
  });

  Vec dtheta = grads.mean_grad_theta;
  if (cfg.alternating) {
    const auto& loss = problem.loss();
    const auto& data = problem.data();
    std::vector<Vec> gth(grads.batch.size());
    parallel_for(m, cfg.threads, [&](Index b) {
      const Index i = grads.batch[static_cast<std::size_t>(b)];
      gth[static_cast<std::size_t>(b)] = loss.grad_theta(state.theta, state.v.row(i).transpose(), data.label(i));
    });
    dtheta.setZero();
    for (const Vec& g : gth) dtheta += g;
    dtheta /= static_cast<double>(m);
  }
  state.h = nu * state.h + dtheta;
  state.theta -= cfg.tau * state.h;
}

BatchGradients step(ParticleState& state, const Problem& problem, const SolverConfig& cfg) {
  const std::vector<Index> batch = state.schedule.next();
  BatchGradients grads = evaluate_batch(problem, state.theta, state.v, batch, cfg.threads);
  if (!grads.finite) throw DivergenceError(state.k, "non-finite gradient");
  apply_update(state, problem, cfg, grads);
  return grads;
}

RunLog run(ParticleState& state, const Problem& problem, const SolverConfig& cfg, TransportNet* map,
           const StateHook& hook) {
  const Index n = problem.data().size();
  cfg.validate(n);
  RunLog log;
  log.family = SolverFamily::Gda;
  const bool full_batch = state.schedule.full_batch();

  while (state.k < cfg.max_iters && !state.converged) {
    const std::vector<Index> batch = state.schedule.next();
    BatchGradients grads = evaluate_batch(problem, state.theta, state.v, batch, cfg.threads);
    if (!grads.finite) throw DivergenceError(state.k, "non-finite gradient");
    ++state.nge;

    IterRecord rec;
    rec.k = state.k;
    rec.gn_theta = grads.norms.gn_theta;
    rec.gn_T = grads.norms.gn_T;
    rec.objective = grads.objective;
    rec.nge_cumulative = state.nge;

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
      apply_update(state, problem, cfg, grads);
      if (map != nullptr) rec.matching_loss = map->matching_update(batch_pairs(problem.data(), state.v, batch));
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

}  // namespace gda

}  // namespace wdro
