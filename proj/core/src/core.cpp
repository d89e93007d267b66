#include "wdro/core.hpp"

#include <cmath>
#include <numeric>

namespace wdro {

void ProblemSpec::validate() const {
  if (!(gamma > 0.0) || !std::isfinite(gamma)) throw ConfigError("gamma must be positive");
  if (data_dim <= 0) throw ConfigError("data_dim must be positive");
  if (param_dim <= 0) throw ConfigError("param_dim must be positive");
  if (num_classes < 1) throw ConfigError("num_classes must be >= 1");
  if (static_cast<Index>(class_proportions.size()) != num_classes)
    throw ConfigError("class_proportions must have num_classes entries");
  double total = 0.0;
  for (double p : class_proportions) {
    if (!(p >= 0.0)) throw ConfigError("class proportions must be nonnegative");
    total += p;
  }
  if (std::abs(total - 1.0) > 1e-12) throw ConfigError("class proportions must sum to 1");
}

void SolverConfig::validate(Index n) const {
  if (!(eta > 0.0)) throw ConfigError("eta must be positive");
  if (!(tau > 0.0)) throw ConfigError("tau must be positive");
  if (!(tol > 0.0)) throw ConfigError("tol must be positive");
  if (!(inner_tol > 0.0)) throw ConfigError("inner_tol must be positive");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw ConfigError("momentum must lie in [0, 1)");
  if (max_iters < 0) throw ConfigError("max_iters must be nonnegative");
  if (batch_size < 0) throw ConfigError("batch_size must be nonnegative");
  if (n > 0 && resolved_batch(n) > n) throw ConfigError("batch_size exceeds the number of samples");
  if (threads < 1) throw ConfigError("threads must be >= 1");
}

Mat LossModel::hessian_theta_theta(VecView, VecView, Label) const {
  throw CapabilityError(name() + " does not provide hessian_theta_theta");
}

Mat LossModel::hessian_v_v(VecView, VecView, Label) const {
  throw CapabilityError(name() + " does not provide hessian_v_v");
}

Mat LossModel::hessian_theta_v(VecView, VecView, Label) const {
  throw CapabilityError(name() + " does not provide hessian_theta_v");
}

void LossModel::check_dims(VecView theta, VecView v, Label y) const {
  if (theta.size() != param_dim())
    throw ConfigError(name() + ": theta has dimension " + std::to_string(theta.size()) +
                      ", expected " + std::to_string(param_dim()));
  if (v.size() != data_dim())
    throw ConfigError(name() + ": v has dimension " + std::to_string(v.size()) + ", expected " +
                      std::to_string(data_dim()));
  if (static_cast<Index>(y) >= num_classes())
    throw UsageError(name() + ": class index " + std::to_string(y) + " out of range");
}

double inner_objective(const LossModel& loss, VecView theta, VecView v, VecView x, Label y,
                       double gamma) {
  if (x.size() != v.size()) throw ConfigError("inner_objective: x and v differ in dimension");
  return loss.value(theta, v, y) - (v - x).squaredNorm() / (2.0 * gamma);
}

Vec grad_T_from(VecView grad_v, VecView v, VecView x, double gamma) {
  if (x.size() != v.size() || grad_v.size() != v.size())
    throw ConfigError("grad_T_component: dimension mismatch");
  return grad_v - (v - x) / gamma;
}

Vec grad_T_component(const LossModel& loss, VecView theta, VecView v, VecView x, Label y,
                     double gamma) {
  return grad_T_from(loss.grad_v(theta, v, y), v, x, gamma);
}

}  // namespace wdro
