#pragma once

#include "wdro/core.hpp"
#include "wdro/data.hpp"
#include "wdro/nn.hpp"

#include <string>

namespace wdro::losses {

/// Generalized-linear L2 regression loss
///   l(theta, v) = 1/2 (sigma(theta^T v) - y*(v))^2,  y*(v) = exp(-|v|^2 / (2 sigma_y^2)),
/// with the logistic link. theta and v share the dimension d.
class GlmRegressionLoss final : public LossModel {
 public:
  explicit GlmRegressionLoss(Index dim = 2, double sigma_y = 0.5);

  Index param_dim() const override { return dim_; }
  Index data_dim() const override { return dim_; }
  std::string name() const override { return "glm"; }
  double sigma_y() const { return sigma_y_; }

  /// True response y*(v).
  double response(VecView v) const;
  /// Model output sigma(theta^T v).
  double predict(VecView theta, VecView v) const;

  double value(VecView theta, VecView v, Label y) const override;
  LossEval evaluate(VecView theta, VecView v, Label y) const override;

  bool has_hessian() const override { return true; }
  /// ((y_theta - y*) sigma'' + sigma'^2) v v^T
  Mat hessian_theta_theta(VecView theta, VecView v, Label y) const override;
  Mat hessian_v_v(VecView theta, VecView v, Label y) const override;
  Mat hessian_theta_v(VecView theta, VecView v, Label y) const override;

 private:
  Index dim_;
  double sigma_y_;
};

/// Class-conditional cross-entropy of an MLP classifier with L2 decay:
///   l_y(theta, v) = -log softmax_y(f(theta, v)) + (omega / 2) |theta|^2.
/// theta is the flattened parameter vector of `arch`.
class ClassifierLoss final : public LossModel {
 public:
  ClassifierLoss(nn::Mlp arch, double weight_decay);

  Index param_dim() const override { return arch_.num_params(); }
  Index data_dim() const override { return arch_.input_dim(); }
  Index num_classes() const override { return arch_.output_dim(); }
  std::string name() const override { return "classifier"; }

  const nn::Mlp& arch() const { return arch_; }
  double weight_decay() const { return weight_decay_; }

  Vec logits(VecView theta, VecView v) const;
  Vec probabilities(VecView theta, VecView v) const;
  Label predict_class(VecView theta, VecView v) const;

  double value(VecView theta, VecView v, Label y) const override;
  LossEval evaluate(VecView theta, VecView v, Label y) const override;

 private:
  nn::Mlp arch_;
  double weight_decay_;
};

/// Joint quadratic
///   l(theta, v) = a^T v + b^T theta + 1/2 v^T B v + 1/2 theta^T A theta + theta^T C v.
/// Used as a closed-form test and probe loss.
class QuadraticLoss final : public LossModel {
 public:
  QuadraticLoss(Vec a, Mat B, Vec b, Mat A, Mat C);
  /// theta-independent variant with p = 1: l = a^T v + 1/2 v^T B v.
  static QuadraticLoss in_v(Vec a, Mat B);
  /// l = 1/2 z^T diag(h) z on z = (theta, v).
  static QuadraticLoss diagonal(Index p, Index d, const Vec& joint_diag);

  Index param_dim() const override { return b_.size(); }
  Index data_dim() const override { return a_.size(); }
  std::string name() const override { return "quadratic"; }

  /// Spectral norm of the joint Hessian [[A, C], [C^T, B]].
  double joint_hessian_norm() const;

  double value(VecView theta, VecView v, Label y) const override;
  LossEval evaluate(VecView theta, VecView v, Label y) const override;

  bool has_hessian() const override { return true; }
  Mat hessian_theta_theta(VecView theta, VecView v, Label y) const override;
  Mat hessian_v_v(VecView theta, VecView v, Label y) const override;
  Mat hessian_theta_v(VecView theta, VecView v, Label y) const override;

  const Vec& a() const { return a_; }
  const Mat& B() const { return B_; }

 private:
  Vec a_;
  Mat B_;
  Vec b_;
  Mat A_;
  Mat C_;
};

/// l = 0 everywhere.
class ZeroLoss final : public LossModel {
 public:
  ZeroLoss(Index param_dim, Index data_dim) : p_(param_dim), d_(data_dim) {}

  Index param_dim() const override { return p_; }
  Index data_dim() const override { return d_; }
  std::string name() const override { return "zero"; }

  double value(VecView theta, VecView v, Label y) const override;
  LossEval evaluate(VecView theta, VecView v, Label y) const override;

  bool has_hessian() const override { return true; }
  Mat hessian_theta_theta(VecView theta, VecView v, Label y) const override;
  Mat hessian_v_v(VecView theta, VecView v, Label y) const override;
  Mat hessian_theta_v(VecView theta, VecView v, Label y) const override;

 private:
  Index p_;
  Index d_;
};

/// Full-batch optimizer training of the classifier parameters from a fresh
/// init (classifier stream of `seed`). Returns theta.
Vec pretrain_classifier(const ClassifierLoss& loss, const data::Dataset& data, Index steps,
                        const nn::OptimConfig& optim, std::uint64_t seed);

/// Fraction of samples whose predicted class matches the label.
double classifier_accuracy(const ClassifierLoss& loss, const Vec& theta, const Particles& v,
                           const data::Dataset& data);

}  // namespace wdro::losses
