#include "wdro/diagnostics.hpp"

#include "wdro/elimination.hpp"
#include "wdro/rng.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace wdro::diag {

GradNorms grad_norms(const LossModel& loss, const Vec& theta, const Particles& v, const data::Dataset& data,
                     std::span<const Index> batch, double gamma) {
  if (batch.empty()) throw UsageError("grad_norms: empty batch");
  std::vector<Index> order(batch.begin(), batch.end());
  std::sort(order.begin(), order.end());
  Vec sum = Vec::Zero(theta.size());
  double t2 = 0.0;
  for (Index i : order) {
    const auto vi = v.row(i).transpose();
    const LossEval e = loss.evaluate(theta, vi, data.label(i));
    sum += e.grad_theta;
    t2 += grad_T_from(e.grad_v, vi, data.sample(i), gamma).squaredNorm();
  }
  const double m = static_cast<double>(order.size());
  return {(sum / m).norm(), std::sqrt(t2 / m)};
}

double transport_cost(const Particles& v, const Particles& x) {
  if (v.rows() != x.rows() || v.cols() != x.cols()) throw ConfigError("transport_cost: shape mismatch");
  if (v.rows() == 0) return 0.0;
  double s = 0.0;
  for (Index i = 0; i < v.rows(); ++i) s += (v.row(i) - x.row(i)).squaredNorm();
  return s / static_cast<double>(v.rows());
}

double mean_displacement(const Particles& v, const Particles& x) {
  if (v.rows() != x.rows() || v.cols() != x.cols()) throw ConfigError("mean_displacement: shape mismatch");
  if (v.rows() == 0) return 0.0;
  double s = 0.0;
  for (Index i = 0; i < v.rows(); ++i) s += (v.row(i) - x.row(i)).norm();
  return s / static_cast<double>(v.rows());
}

double max_particle_distance(const Particles& a, const Particles& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) throw ConfigError("max_particle_distance: shape mismatch");
  double m = 0.0;
  for (Index i = 0; i < a.rows(); ++i) m = std::max(m, (a.row(i) - b.row(i)).norm());
  return m;
}

Vec fd_gradient(const ScalarFn& f, const Vec& z, double h) {
  if (!(h > 0.0)) throw ConfigError("fd_gradient: h must be positive");
  Vec g(z.size());
  Vec zp = z;
  for (Index j = 0; j < z.size(); ++j) {
    zp[j] = z[j] + h;
    const double fp = f(zp);
    zp[j] = z[j] - h;
    const double fm = f(zp);
    zp[j] = z[j];
    if (!std::isfinite(fp) || !std::isfinite(fm))
      throw OracleError("fd_gradient: non-finite function value at coordinate " + std::to_string(j));
    g[j] = (fp - fm) / (2.0 * h);
  }
  return g;
}

double relative_error(const Vec& a, const Vec& b, double floor) {
  const double denom = std::max({a.norm(), b.norm(), floor});
  return (a - b).norm() / denom;
}

Vec jacobi_eigenvalues(const Mat& input, double tol, Index max_sweeps) {
  if (input.rows() != input.cols()) throw ConfigError("jacobi_eigenvalues: matrix must be square");
  Mat a = 0.5 * (input + input.transpose());
  const Index n = a.rows();
  const double scale = std::max(a.norm(), std::numeric_limits<double>::min());
  for (Index sweep = 0; sweep < max_sweeps; ++sweep) {
    double off = 0.0;
    for (Index p = 0; p < n; ++p)
      for (Index q = p + 1; q < n; ++q) off += a(p, q) * a(p, q);
    if (std::sqrt(off) <= tol * scale) break;
    for (Index p = 0; p < n; ++p) {
      for (Index q = p + 1; q < n; ++q) {
        if (a(p, q) == 0.0) continue;
        const double theta = (a(q, q) - a(p, p)) / (2.0 * a(p, q));
        const double t = (theta >= 0.0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (Index k = 0; k < n; ++k) {
          const double akp = a(k, p);
          const double akq = a(k, q);
          a(k, p) = c * akp - s * akq;
          a(k, q) = s * akp + c * akq;
        }
        for (Index k = 0; k < n; ++k) {
          const double apk = a(p, k);
          const double aqk = a(q, k);
          a(p, k) = c * apk - s * aqk;
          a(q, k) = s * apk + c * aqk;
        }
      }
    }
  }
  Vec ev = a.diagonal();
  std::sort(ev.data(), ev.data() + ev.size());
  return ev;
}

Mat averaged_hessian_theta(const LossModel& loss, const Vec& theta, const Particles& v, const data::Dataset& data) {
  if (v.rows() == 0) throw UsageError("averaged_hessian_theta: empty particle set");
  Mat h = Mat::Zero(theta.size(), theta.size());
  for (Index i = 0; i < v.rows(); ++i) h += loss.hessian_theta_theta(theta, v.row(i).transpose(), data.label(i));
  return h / static_cast<double>(v.rows());
}

namespace {

struct Sampler {
  CounterRng rng;
  Index p;
  double radius;
  Vec lo, hi;
  Index classes;

  Vec theta() {
    Vec dir(p);
    for (Index j = 0; j < p; ++j) dir[j] = rng.normal();
    const double nrm = dir.norm();
    if (nrm == 0.0) return Vec::Zero(p);
    const double r = radius * std::pow(rng.uniform(), 1.0 / static_cast<double>(p));
    return (r / nrm) * dir;
  }
  Vec point() {
    Vec v(lo.size());
    for (Index j = 0; j < v.size(); ++j) v[j] = rng.uniform(lo[j], hi[j]);
    return v;
  }
  Label label() { return classes > 1 ? static_cast<Label>(rng.below(static_cast<std::uint64_t>(classes))) : 0; }
  Vec unit(Index dim) {
    Vec u(dim);
    do {
      for (Index j = 0; j < dim; ++j) u[j] = rng.normal();
    } while (u.norm() == 0.0);
    return u.normalized();
  }
};

Sampler make_sampler(const LossModel& loss, const data::Dataset& data, const ProbeRanges& r, std::uint64_t offset) {
  if (!(r.theta_radius > 0.0) || !(r.box_inflation > 0.0)) throw ConfigError("probe: ranges must be positive");
  Sampler s{CounterRng(r.seed, streams::kProbe).split(offset), loss.param_dim(), r.theta_radius,
            Vec(), Vec(), loss.num_classes()};
  const Particles& x = data.samples();
  const Vec mn = x.colwise().minCoeff().transpose();
  const Vec mx = x.colwise().maxCoeff().transpose();
  const Vec c = 0.5 * (mn + mx);
  const Vec w = (0.5 * (mx - mn)).cwiseMax(1e-12);
  s.lo = c - r.box_inflation * w;
  s.hi = c + r.box_inflation * w;
  return s;
}

double l0_estimate(const LossModel& loss, Sampler& s, Index probes) {
  const Index p = loss.param_dim();
  const Index d = loss.data_dim();
  double best = 0.0;
  for (Index k = 0; k < probes; ++k) {
    const Label y = s.label();
    const Vec t1 = s.theta();
    const Vec v1 = s.point();
    Vec t2, v2;
    if (k % 2 == 0) {
      t2 = s.theta();
      v2 = s.point();
    } else {
      const Vec u = s.unit(p + d);
      t2 = t1 + 1e-4 * u.head(p);
      v2 = v1 + 1e-4 * u.tail(d);
    }
    const LossEval e1 = loss.evaluate(t1, v1, y);
    const LossEval e2 = loss.evaluate(t2, v2, y);
    const double num = std::sqrt((e1.grad_theta - e2.grad_theta).squaredNorm() + (e1.grad_v - e2.grad_v).squaredNorm());
    const double den = std::sqrt((t1 - t2).squaredNorm() + (v1 - v2).squaredNorm());
    if (den > 0.0) best = std::max(best, num / den);
  }
  return best;
}

}  // namespace

double estimate_weak_concavity(const LossModel& loss, const data::Dataset& data, const ProbeRanges& ranges) {
  if (!loss.has_hessian()) throw CapabilityError("estimate_weak_concavity: loss provides no Hessian");
  Sampler s = make_sampler(loss, data, ranges, 4);
  double rho = 0.0;
  for (Index k = 0; k < ranges.smoothness_probes; ++k) {
    const Label y = s.label();
    const Vec t = s.theta();
    const Vec v = s.point();
    rho = std::max(rho, jacobi_eigenvalues(loss.hessian_v_v(t, v, y)).maxCoeff());
  }
  return rho;
}

AssumptionReport probe_assumptions(const Problem& problem, const ProbeRanges& ranges,
                                   const std::vector<Iterate>& iterates) {
  const auto& loss = problem.loss();
  const auto& data = problem.data();
  const double gamma = problem.gamma();
  AssumptionReport rep;
  rep.loss = loss.name();
  rep.gamma = gamma;
  rep.ranges = ranges;

  Sampler s = make_sampler(loss, data, ranges, 1);
  rep.box_lo.assign(s.lo.data(), s.lo.data() + s.lo.size());
  rep.box_hi.assign(s.hi.data(), s.hi.data() + s.hi.size());

  rep.l0_estimate = l0_estimate(loss, s, ranges.smoothness_probes);
  rep.l0_probes = ranges.smoothness_probes;

  Sampler se = make_sampler(loss, data, ranges, 2);
  const Index n = data.size();
  double eb_min = std::numeric_limits<double>::infinity();
  Index failures = 0;
  for (Index a = 0; a < ranges.eb_thetas; ++a) {
    const Vec theta = se.theta();
    Particles tstar(n, data.dim());
    for (Index i = 0; i < n; ++i) {
      InnerSolution sol = inner_maximize(loss, theta, data.sample(i), data.label(i), gamma, data.sample(i),
                                         ranges.eb_tol, 1000);
      if (!sol.report.converged) ++failures;
      tstar.row(i) = sol.v.transpose();
    }
    for (Index b = 0; b < ranges.eb_draws; ++b) {
      double num = 0.0;
      double den = 0.0;
      for (Index i = 0; i < n; ++i) {
        const Vec t = se.point();
        num += grad_T_component(loss, theta, t, data.sample(i), data.label(i), gamma).squaredNorm();
        den += (t - tstar.row(i).transpose()).squaredNorm();
      }
      if (den > 0.0) eb_min = std::min(eb_min, std::sqrt(num / den));
      ++rep.eb_probes;
    }
  }
  if (rep.eb_probes > 0) rep.eb_T_ratio_min = eb_min;
  if (failures > 0)
    rep.warnings.push_back(std::to_string(failures) + " inner solve(s) for T* did not reach the probe tolerance");

  if (!loss.has_hessian()) {
    rep.warnings.push_back("loss '" + loss.name() + "' provides no Hessian; Hessian probes skipped");
    return rep;
  }

  if (!iterates.empty()) {
    double mn = std::numeric_limits<double>::infinity();
    for (const auto& [theta, v] : iterates)
      mn = std::min(mn, jacobi_eigenvalues(averaged_hessian_theta(loss, theta, v, data)).minCoeff());
    rep.hessian_min_eig = mn;
    rep.hessian_iterates = static_cast<Index>(iterates.size());
  }

  Sampler sh = make_sampler(loss, data, ranges, 3);
  double mn = std::numeric_limits<double>::infinity();
  for (Index k = 0; k < ranges.hessian_probes; ++k) {
    const Vec theta = sh.theta();
    Particles v(n, data.dim());
    for (Index i = 0; i < n; ++i) v.row(i) = sh.point().transpose();
    mn = std::min(mn, jacobi_eigenvalues(averaged_hessian_theta(loss, theta, v, data)).minCoeff());
  }
  if (ranges.hessian_probes > 0) {
    rep.hessian_min_eig_sampled = mn;
    rep.hessian_sampled = ranges.hessian_probes;
  }
  rep.rho_estimate = estimate_weak_concavity(loss, data, ranges);
  return rep;
}

nlohmann::json AssumptionReport::to_json() const {
  auto opt = [](const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(nullptr); };
  return {{"loss", loss},
          {"gamma", gamma},
          {"l0_estimate", opt(l0_estimate)},
          {"l0_probes", l0_probes},
          {"eb_T_ratio_min", opt(eb_T_ratio_min)},
          {"eb_probes", eb_probes},
          {"hessian_min_eig", opt(hessian_min_eig)},
          {"hessian_iterates", hessian_iterates},
          {"hessian_min_eig_sampled", opt(hessian_min_eig_sampled)},
          {"hessian_sampled", hessian_sampled},
          {"rho_estimate", opt(rho_estimate)},
          {"ranges",
           {{"theta_radius", ranges.theta_radius},
            {"box_inflation", ranges.box_inflation},
            {"box_lo", box_lo},
            {"box_hi", box_hi},
            {"smoothness_probes", ranges.smoothness_probes},
            {"eb_thetas", ranges.eb_thetas},
            {"eb_draws", ranges.eb_draws},
            {"hessian_probes", ranges.hessian_probes},
            {"eb_tol", ranges.eb_tol}}},
          {"seed", ranges.seed},
          {"warnings", warnings}};
}

}  // namespace wdro::diag
