#include "wdro/losses.hpp"

#include "wdro/rng.hpp"

#include <cmath>

namespace wdro::losses {

namespace {

struct Link {
  double s;    // sigma(t)
  double ds;   // sigma'(t)
  double dds;  // sigma''(t)
};

Link logistic(double t) {
  const double s = nn::sigmoid(t);
  const double ds = s * (1.0 - s);
  return {s, ds, ds * (1.0 - 2.0 * s)};
}

}  // namespace

// ---------------------------------------------------------------------------
// GLM regression
// ---------------------------------------------------------------------------

GlmRegressionLoss::GlmRegressionLoss(Index dim, double sigma_y) : dim_(dim), sigma_y_(sigma_y) {
  if (dim_ <= 0) throw ConfigError("glm: dimension must be positive");
  if (!(sigma_y_ > 0.0)) throw ConfigError("glm: sigma_y must be positive");
}

double GlmRegressionLoss::response(VecView v) const {
  return std::exp(-v.squaredNorm() / (2.0 * sigma_y_ * sigma_y_));
}

double GlmRegressionLoss::predict(VecView theta, VecView v) const {
  return nn::sigmoid(theta.dot(v));
}

double GlmRegressionLoss::value(VecView theta, VecView v, Label y) const {
  check_dims(theta, v, y);
  const double r = predict(theta, v) - response(v);
  return 0.5 * r * r;
}

LossEval GlmRegressionLoss::evaluate(VecView theta, VecView v, Label y) const {
  check_dims(theta, v, y);
  const Link k = logistic(theta.dot(v));
  const double ystar = response(v);
  const double r = k.s - ystar;
  const double inv_s2 = 1.0 / (sigma_y_ * sigma_y_);
  LossEval out;
  out.value = 0.5 * r * r;
  out.grad_theta = (r * k.ds) * v;
  // grad_v r = sigma'(t) theta + y* v / sigma_y^2
  out.grad_v = r * (k.ds * theta + (ystar * inv_s2) * v);
  return out;
}

Mat GlmRegressionLoss::hessian_theta_theta(VecView theta, VecView v, Label y) const {
  check_dims(theta, v, y);
  const Link k = logistic(theta.dot(v));
  const double r = k.s - response(v);
  return (r * k.dds + k.ds * k.ds) * (v * v.transpose());
}

Mat GlmRegressionLoss::hessian_v_v(VecView theta, VecView v, Label y) const {
  check_dims(theta, v, y);
  const Link k = logistic(theta.dot(v));
  const double ystar = response(v);
  const double r = k.s - ystar;
  const double inv_s2 = 1.0 / (sigma_y_ * sigma_y_);
  const Vec dr = k.ds * theta + (ystar * inv_s2) * v;
  Mat d2r = k.dds * (theta * theta.transpose());
  d2r += (ystar * inv_s2) * (Mat::Identity(dim_, dim_) - inv_s2 * (v * v.transpose()));
  return dr * dr.transpose() + r * d2r;
}

Mat GlmRegressionLoss::hessian_theta_v(VecView theta, VecView v, Label y) const {
  check_dims(theta, v, y);
  const Link k = logistic(theta.dot(v));
  const double ystar = response(v);
  const double r = k.s - ystar;
  const double inv_s2 = 1.0 / (sigma_y_ * sigma_y_);
  const Vec dr_theta = k.ds * v;
  const Vec dr_v = k.ds * theta + (ystar * inv_s2) * v;
  Mat d2 = k.ds * Mat::Identity(dim_, dim_) + k.dds * (v * theta.transpose());
  return dr_theta * dr_v.transpose() + r * d2;
}

// ---------------------------------------------------------------------------
// Classifier cross-entropy
// ---------------------------------------------------------------------------

ClassifierLoss::ClassifierLoss(nn::Mlp arch, double weight_decay)
    : arch_(std::move(arch)), weight_decay_(weight_decay) {
  if (weight_decay_ < 0.0) throw ConfigError("classifier: weight decay must be nonnegative");
  if (arch_.output_dim() < 2) throw ConfigError("classifier: needs at least two classes");
}

Vec ClassifierLoss::logits(VecView theta, VecView v) const {
  nn::Tape tape;
  return arch_.forward_with(theta, v, tape);
}

Vec ClassifierLoss::probabilities(VecView theta, VecView v) const {
  const Vec z = logits(theta, v);
  const double zmax = z.maxCoeff();
  Vec e = (z.array() - zmax).exp().matrix();
  return e / e.sum();
}

Label ClassifierLoss::predict_class(VecView theta, VecView v) const {
  Index best = 0;
  logits(theta, v).maxCoeff(&best);
  return static_cast<Label>(best);
}

double ClassifierLoss::value(VecView theta, VecView v, Label y) const {
  check_dims(theta, v, y);
  const Vec z = logits(theta, v);
  const double zmax = z.maxCoeff();
  const double lse = zmax + std::log((z.array() - zmax).exp().sum());
  return lse - z[static_cast<Index>(y)] + 0.5 * weight_decay_ * theta.squaredNorm();
}

LossEval ClassifierLoss::evaluate(VecView theta, VecView v, Label y) const {
  check_dims(theta, v, y);
  nn::Tape tape;
  const Vec z = arch_.forward_with(theta, v, tape);
  const double zmax = z.maxCoeff();
  Vec e = (z.array() - zmax).exp().matrix();
  const double sum = e.sum();
  const double lse = zmax + std::log(sum);
  Vec dz = e / sum;
  dz[static_cast<Index>(y)] -= 1.0;
  nn::Gradients g = arch_.backward_with(theta, tape, dz);

  LossEval out;
  out.value = lse - z[static_cast<Index>(y)] + 0.5 * weight_decay_ * theta.squaredNorm();
  out.grad_theta = std::move(g.params);
  if (weight_decay_ != 0.0) out.grad_theta += weight_decay_ * theta;
  out.grad_v = std::move(g.input);
  return out;
}

// ---------------------------------------------------------------------------
// Quadratic
// ---------------------------------------------------------------------------

QuadraticLoss::QuadraticLoss(Vec a, Mat B, Vec b, Mat A, Mat C)
    : a_(std::move(a)), B_(std::move(B)), b_(std::move(b)), A_(std::move(A)), C_(std::move(C)) {
  const Index d = a_.size();
  const Index p = b_.size();
  if (d == 0 || p == 0) throw ConfigError("quadratic: empty dimension");
  if (B_.rows() != d || B_.cols() != d) throw ConfigError("quadratic: B must be d x d");
  if (A_.rows() != p || A_.cols() != p) throw ConfigError("quadratic: A must be p x p");
  if (C_.rows() != p || C_.cols() != d) throw ConfigError("quadratic: C must be p x d");
  B_ = 0.5 * (B_ + B_.transpose()).eval();
  A_ = 0.5 * (A_ + A_.transpose()).eval();
}

QuadraticLoss QuadraticLoss::in_v(Vec a, Mat B) {
  const Index d = a.size();
  return QuadraticLoss(std::move(a), std::move(B), Vec::Zero(1), Mat::Zero(1, 1), Mat::Zero(1, d));
}

QuadraticLoss QuadraticLoss::diagonal(Index p, Index d, const Vec& joint_diag) {
  if (joint_diag.size() != p + d) throw ConfigError("quadratic: diagonal must have p + d entries");
  Mat A = joint_diag.head(p).asDiagonal();
  Mat B = joint_diag.tail(d).asDiagonal();
  return QuadraticLoss(Vec::Zero(d), B, Vec::Zero(p), A, Mat::Zero(p, d));
}

double QuadraticLoss::joint_hessian_norm() const {
  const Index p = b_.size();
  const Index d = a_.size();
  Mat H(p + d, p + d);
  H.topLeftCorner(p, p) = A_;
  H.topRightCorner(p, d) = C_;
  H.bottomLeftCorner(d, p) = C_.transpose();
  H.bottomRightCorner(d, d) = B_;
  Eigen::SelfAdjointEigenSolver<Mat> es(H, Eigen::EigenvaluesOnly);
  return es.eigenvalues().cwiseAbs().maxCoeff();
}

double QuadraticLoss::value(VecView theta, VecView v, Label y) const {
  check_dims(theta, v, y);
  return a_.dot(v) + b_.dot(theta) + 0.5 * v.dot(B_ * v) + 0.5 * theta.dot(A_ * theta) +
         theta.dot(C_ * v);
}

LossEval QuadraticLoss::evaluate(VecView theta, VecView v, Label y) const {
  LossEval out;
  out.value = value(theta, v, y);
  out.grad_theta = b_ + A_ * theta + C_ * v;
  out.grad_v = a_ + B_ * v + C_.transpose() * theta;
  return out;
}

Mat QuadraticLoss::hessian_theta_theta(VecView theta, VecView v, Label y) const {
  check_dims(theta, v, y);
  return A_;
}

Mat QuadraticLoss::hessian_v_v(VecView theta, VecView v, Label y) const {
  check_dims(theta, v, y);
  return B_;
}

Mat QuadraticLoss::hessian_theta_v(VecView theta, VecView v, Label y) const {
  check_dims(theta, v, y);
  return C_;
}

// ---------------------------------------------------------------------------

double ZeroLoss::value(VecView theta, VecView v, Label y) const {
  check_dims(theta, v, y);
  return 0.0;
}

LossEval ZeroLoss::evaluate(VecView theta, VecView v, Label y) const {
  check_dims(theta, v, y);
  return {0.0, Vec::Zero(p_), Vec::Zero(d_)};
}

Mat ZeroLoss::hessian_theta_theta(VecView theta, VecView v, Label y) const {
  check_dims(theta, v, y);
  return Mat::Zero(p_, p_);
}

Mat ZeroLoss::hessian_v_v(VecView theta, VecView v, Label y) const {
  check_dims(theta, v, y);
  return Mat::Zero(d_, d_);
}

Mat ZeroLoss::hessian_theta_v(VecView theta, VecView v, Label y) const {
  check_dims(theta, v, y);
  return Mat::Zero(p_, d_);
}

Vec pretrain_classifier(const ClassifierLoss& loss, const data::Dataset& data, Index steps,
                        const nn::OptimConfig& optim, std::uint64_t seed) {
  if (data.num_classes() != loss.num_classes()) throw ConfigError("pretrain: class count mismatch");
  if (data.size() == 0) throw UsageError("pretrain: empty dataset");
  nn::Mlp net = loss.arch();
  CounterRng rng(seed, streams::kClassifier);
  net.init(rng, /*zero_final=*/false);
  Vec theta = net.params();
  nn::Optimizer opt(optim, theta.size());
  Vec grad(theta.size());
  for (Index s = 0; s < steps; ++s) {
    grad.setZero();
    for (Index i = 0; i < data.size(); ++i) grad += loss.evaluate(theta, data.sample(i), data.label(i)).grad_theta;
    grad /= static_cast<double>(data.size());
    opt.step(theta, grad);
  }
  return theta;
}

double classifier_accuracy(const ClassifierLoss& loss, const Vec& theta, const Particles& v,
                           const data::Dataset& data) {
  if (v.rows() == 0) return 0.0;
  Index hits = 0;
  for (Index i = 0; i < v.rows(); ++i)
    if (loss.predict_class(theta, v.row(i).transpose()) == data.label(i)) ++hits;
  return static_cast<double>(hits) / static_cast<double>(v.rows());
}

}  // namespace wdro::losses
