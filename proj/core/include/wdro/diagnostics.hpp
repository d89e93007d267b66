#pragma once

// Convergence metrics, transport cost, the central finite-difference oracle,
// and numerical probes of smoothness, error-bound and Hessian positivity.

#include "wdro/core.hpp"
#include "wdro/data.hpp"
#include "wdro/problem.hpp"
#include "wdro/run_log.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace wdro::diag {

/// gn_theta = |mean d_theta l|, gn_T = (mean |d_v l - (v - x)/gamma|^2)^(1/2)
/// over the batch, reduced in ascending index order.
GradNorms grad_norms(const LossModel& loss, const Vec& theta, const Particles& v, const data::Dataset& data,
                     std::span<const Index> batch, double gamma);

/// (1/n) sum |v_i - x_i|^2.
double transport_cost(const Particles& v, const Particles& x);
/// (1/n) sum |v_i - x_i|.
double mean_displacement(const Particles& v, const Particles& x);
/// max_i |a_i - b_i|.
double max_particle_distance(const Particles& a, const Particles& b);

using ScalarFn = std::function<double(const Vec&)>;

/// Central differences (f(z + h e_j) - f(z - h e_j)) / (2h). Throws
/// OracleError on a non-finite function value.
Vec fd_gradient(const ScalarFn& f, const Vec& z, double h);

/// |a - b| / max(|a|, |b|, floor).
double relative_error(const Vec& a, const Vec& b, double floor = 1e-12);

/// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations, ascending.
Vec jacobi_eigenvalues(const Mat& a, double tol = 1e-14, Index max_sweeps = 100);

/// (1/n) sum_i H_theta_theta(theta, v_i; y_i).
Mat averaged_hessian_theta(const LossModel& loss, const Vec& theta, const Particles& v, const data::Dataset& data);

struct ProbeRanges {
  double theta_radius = 3.0;   ///< theta sampled uniformly in this ball
  double box_inflation = 2.0;  ///< particles sampled in the data box scaled about its center
  Index smoothness_probes = 2000;
  Index eb_thetas = 4;
  Index eb_draws = 3;
  Index hessian_probes = 50;
  double eb_tol = 1e-8;
  std::uint64_t seed = 0;
};

/// (theta, particle set) pair at which the averaged Hessian is inspected.
using Iterate = std::pair<Vec, Particles>;

struct AssumptionReport {
  std::string loss;
  double gamma = 0.0;
  std::optional<double> l0_estimate;
  Index l0_probes = 0;
  std::optional<double> eb_T_ratio_min;
  Index eb_probes = 0;
  std::optional<double> hessian_min_eig;  ///< at supplied iterates
  Index hessian_iterates = 0;
  std::optional<double> hessian_min_eig_sampled;  ///< at sampled (theta, particle set) pairs
  Index hessian_sampled = 0;
  std::optional<double> rho_estimate;  ///< max sampled lambda_max(H_vv), clamped at 0
  ProbeRanges ranges;
  std::vector<double> box_lo, box_hi;
  std::vector<std::string> warnings;

  nlohmann::json to_json() const;
};

/// Weak-concavity bound: max over sampled (theta, v) of lambda_max(H_vv),
/// clamped at 0. Requires Hessian capability.
double estimate_weak_concavity(const LossModel& loss, const data::Dataset& data, const ProbeRanges& ranges);

AssumptionReport probe_assumptions(const Problem& problem, const ProbeRanges& ranges,
                                   const std::vector<Iterate>& iterates = {});

}  // namespace wdro::diag
