#pragma once

// Shared domain types for the Wasserstein minimax solvers: vector aliases,
// error types, the problem/solver configuration, and the LossModel interface
// every solver consumes.

#include <Eigen/Dense>

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace wdro {

using Index = Eigen::Index;
using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
/// n x d particle / sample storage; one row per sample.
using Particles = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using VecView = Eigen::Ref<const Eigen::VectorXd>;

/// Class index. Always 0 for unconditioned problems (K = 1).
using Label = std::size_t;

// ---------------------------------------------------------------------------
// Errors
// ---------------------------------------------------------------------------

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid dimensions, parameters, or option combinations.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// API misuse: bad class index, stale tape, empty batch.
class UsageError : public Error {
 public:
  using Error::Error;
};

/// A loss was asked for a Hessian block it does not provide.
class CapabilityError : public Error {
 public:
  using Error::Error;
};

/// Malformed input file.
class ParseError : public Error {
 public:
  using Error::Error;
};

/// Finite-difference oracle hit a non-finite function value.
class OracleError : public Error {
 public:
  using Error::Error;
};

/// Iterates blew up (non-finite gradient or particle norm above the guard).
class DivergenceError : public Error {
 public:
  DivergenceError(Index iteration, const std::string& what)
      : Error("diverged at iteration " + std::to_string(iteration) + ": " + what),
        iteration_(iteration) {}
  Index iteration() const noexcept { return iteration_; }

 private:
  Index iteration_;
};

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

struct ProblemSpec {
  double gamma = 1.0;  ///< Wasserstein penalty weight.
  Index data_dim = 0;
  Index param_dim = 0;
  Index num_classes = 1;
  std::vector<double> class_proportions{1.0};

  /// Throws ConfigError if any invariant fails.
  void validate() const;
};

struct SolverConfig {
  double eta = 0.4;        ///< step size on the transport particles
  double tau = 0.2;        ///< step size on theta
  double momentum = 0.0;   ///< heavy-ball coefficient in [0, 1)
  Index batch_size = 0;    ///< 0 means full batch
  Index max_iters = 10000;
  double tol = 1e-5;
  std::uint64_t seed = 0;
  bool alternating = false;
  double ppm_s = 0.0;      ///< proximal step; required by the PPM solver
  double inner_tol = 1e-5; ///< BFGS optimality tolerance (Elim / PPM)
  double rho_est = 0.0;    ///< weak-concavity bound used by PPM; 0 = unset
  bool log_full_norms = true;
  Index threads = 1;

  void validate(Index n) const;
  /// Batch size with 0 resolved to n.
  Index resolved_batch(Index n) const { return batch_size == 0 ? n : batch_size; }
};

// ---------------------------------------------------------------------------
// Loss interface
// ---------------------------------------------------------------------------

struct LossEval {
  double value = 0.0;
  Vec grad_theta;
  Vec grad_v;
};

/// A differentiable loss l(theta, v; y). Implementations must be safe for
/// concurrent const evaluation.
class LossModel {
 public:
  virtual ~LossModel() = default;

  virtual Index param_dim() const = 0;
  virtual Index data_dim() const = 0;
  virtual Index num_classes() const { return 1; }
  virtual std::string name() const = 0;

  virtual double value(VecView theta, VecView v, Label y) const = 0;
  /// Value and both gradients in one pass.
  virtual LossEval evaluate(VecView theta, VecView v, Label y) const = 0;

  Vec grad_theta(VecView theta, VecView v, Label y) const { return evaluate(theta, v, y).grad_theta; }
  Vec grad_v(VecView theta, VecView v, Label y) const { return evaluate(theta, v, y).grad_v; }

  virtual bool has_hessian() const { return false; }
  virtual Mat hessian_theta_theta(VecView theta, VecView v, Label y) const;
  virtual Mat hessian_v_v(VecView theta, VecView v, Label y) const;
  /// p x d block d^2 l / (d theta d v).
  virtual Mat hessian_theta_v(VecView theta, VecView v, Label y) const;

 protected:
  void check_dims(VecView theta, VecView v, Label y) const;
};

// ---------------------------------------------------------------------------
// Pointwise pieces of the penalized objective
// ---------------------------------------------------------------------------

/// h(theta, v; x) = l(theta, v, y) - |v - x|^2 / (2 gamma).
double inner_objective(const LossModel& loss, VecView theta, VecView v, VecView x, Label y,
                       double gamma);

/// Pointwise functional gradient in T: d_v l(theta, v, y) - (v - x) / gamma.
Vec grad_T_component(const LossModel& loss, VecView theta, VecView v, VecView x, Label y,
                     double gamma);

/// Same as grad_T_component but reuses an existing d_v l.
Vec grad_T_from(VecView grad_v, VecView v, VecView x, double gamma);

}  // namespace wdro
