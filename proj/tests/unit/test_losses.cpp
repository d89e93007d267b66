#include <doctest.h>

#include "oracles.hpp"
#include "wdro/data.hpp"
#include "wdro/losses.hpp"

#include <cmath>

using namespace wdro;
using namespace wdro::losses;

namespace {

void check_loss_gradients(const LossModel& loss, CounterRng& rng, int probes, double tol, double scale = 1.0) {
  for (int i = 0; i < probes; ++i) {
    const Vec theta = testing::random_vec(rng, loss.param_dim(), scale);
    const Vec v = testing::random_vec(rng, loss.data_dim());
    const Label y = static_cast<Label>(rng.below(static_cast<std::uint64_t>(loss.num_classes())));
    const LossEval e = loss.evaluate(theta, v, y);
    CHECK(e.value == doctest::Approx(loss.value(theta, v, y)).epsilon(1e-14));
    auto ft = [&](const Vec& t) { return loss.value(t, v, y); };
    auto fv = [&](const Vec& z) { return loss.value(theta, z, y); };
    CHECK(testing::fd_check(ft, theta, e.grad_theta) <= tol);
    CHECK(testing::fd_check(fv, v, e.grad_v) <= tol);
  }
}

void check_hessians(const LossModel& loss, CounterRng& rng, int probes, double tol) {
  for (int i = 0; i < probes; ++i) {
    const Vec theta = testing::random_vec(rng, loss.param_dim());
    const Vec v = testing::random_vec(rng, loss.data_dim());
    const Mat htt = loss.hessian_theta_theta(theta, v, 0);
    const Mat hvv = loss.hessian_v_v(theta, v, 0);
    const Mat htv = loss.hessian_theta_v(theta, v, 0);
    for (Index j = 0; j < loss.param_dim(); ++j) {
      auto gj = [&](const Vec& t) { return loss.grad_theta(t, v, 0)[j]; };
      auto gjv = [&](const Vec& z) { return loss.grad_theta(theta, z, 0)[j]; };
      CHECK(testing::fd_check(gj, theta, htt.row(j).transpose()) <= tol);
      CHECK(testing::fd_check(gjv, v, htv.row(j).transpose()) <= tol);
    }
    for (Index j = 0; j < loss.data_dim(); ++j) {
      auto gj = [&](const Vec& z) { return loss.grad_v(theta, z, 0)[j]; };
      CHECK(testing::fd_check(gj, v, hvv.row(j).transpose()) <= tol);
    }
    CHECK((hvv - hvv.transpose()).norm() < 1e-12);
  }
}

}  // namespace

TEST_CASE("glm response and prediction") {
  GlmRegressionLoss glm;
  CHECK(glm.response(Vec::Zero(2)) == 1.0);
  Vec v(2);
  v << 0.5, 0.0;
  CHECK(glm.response(v) == doctest::Approx(std::exp(-0.5)));
  CHECK(glm.predict(Vec::Zero(2), v) == 0.5);
  CHECK(glm.value(Vec::Zero(2), Vec::Zero(2), 0) == doctest::Approx(0.125));
  CHECK_THROWS_AS(GlmRegressionLoss(2, 0.0), ConfigError);
}

TEST_CASE("glm gradients and hessians match finite differences") {
  GlmRegressionLoss glm;
  CounterRng rng(100);
  check_loss_gradients(glm, rng, 100, 1e-5);
  check_hessians(glm, rng, 20, 1e-5);
}

TEST_CASE("glm stays finite at extreme logits") {
  GlmRegressionLoss glm;
  Vec theta = Vec::Constant(2, 500.0);
  Vec v = Vec::Constant(2, 2.0);
  const LossEval e = glm.evaluate(theta, v, 0);
  CHECK(std::isfinite(e.value));
  CHECK(e.grad_theta.allFinite());
  CHECK(e.grad_v.allFinite());
}

TEST_CASE("classifier gradients match finite differences") {
  ClassifierLoss clf(nn::Mlp({2, 5, 3}), 1e-2);
  CHECK(clf.num_classes() == 3);
  CounterRng rng(7);
  check_loss_gradients(clf, rng, 30, 1e-5, 0.5);
}

TEST_CASE("classifier probabilities") {
  ClassifierLoss clf(nn::Mlp({2, 4, 3}), 0.0);
  CounterRng rng(3);
  const Vec theta = testing::random_vec(rng, clf.param_dim());
  const Vec p = clf.probabilities(theta, Vec::Ones(2));
  CHECK(p.sum() == doctest::Approx(1.0));
  CHECK((p.array() > 0.0).all());
  Index best = 0;
  p.maxCoeff(&best);
  CHECK(clf.predict_class(theta, Vec::Ones(2)) == static_cast<Label>(best));
  CHECK(clf.value(theta, Vec::Ones(2), 1) == doctest::Approx(-std::log(p[1])));
  CHECK_THROWS_AS(clf.value(theta, Vec::Ones(2), 3), UsageError);
}

TEST_CASE("classifier weight decay term") {
  ClassifierLoss a(nn::Mlp({2, 3}), 0.0), b(nn::Mlp({2, 3}), 0.5);
  CounterRng rng(9);
  const Vec theta = testing::random_vec(rng, a.param_dim());
  const Vec v = testing::random_vec(rng, 2);
  CHECK(b.value(theta, v, 0) - a.value(theta, v, 0) == doctest::Approx(0.25 * theta.squaredNorm()));
  CHECK((b.grad_theta(theta, v, 0) - a.grad_theta(theta, v, 0) - 0.5 * theta).norm() < 1e-12);
}

TEST_CASE("quadratic loss matches its closed form") {
  CounterRng rng(21);
  const Vec a = testing::random_vec(rng, 3);
  const Vec b = testing::random_vec(rng, 2);
  const Mat B = testing::random_symmetric(rng, 3, -1.0, 1.0);
  const Mat A = testing::random_symmetric(rng, 2, 0.5, 2.0);
  Mat C(2, 3);
  for (Index i = 0; i < 2; ++i)
    for (Index j = 0; j < 3; ++j) C(i, j) = rng.normal();
  QuadraticLoss q(a, B, b, A, C);
  const Vec th = testing::random_vec(rng, 2);
  const Vec v = testing::random_vec(rng, 3);
  const double expected = a.dot(v) + b.dot(th) + 0.5 * v.dot(B * v) + 0.5 * th.dot(A * th) + th.dot(C * v);
  CHECK(q.value(th, v, 0) == doctest::Approx(expected));
  check_loss_gradients(q, rng, 20, 1e-7);
  check_hessians(q, rng, 5, 1e-6);
  CHECK((q.hessian_theta_v(th, v, 0) - C).norm() < 1e-14);
  CHECK_THROWS_AS(QuadraticLoss(a, A, b, A, C), ConfigError);
}

TEST_CASE("diagonal quadratic joint norm") {
  Vec h(3);
  h << 1.0, -2.0, 3.0;
  QuadraticLoss q = QuadraticLoss::diagonal(1, 2, h);
  CHECK(q.joint_hessian_norm() == doctest::Approx(3.0));
  CHECK(q.param_dim() == 1);
  CHECK(q.data_dim() == 2);
}

TEST_CASE("zero loss") {
  ZeroLoss z(2, 3);
  const LossEval e = z.evaluate(Vec::Ones(2), Vec::Ones(3), 0);
  CHECK(e.value == 0.0);
  CHECK(e.grad_theta.squaredNorm() == 0.0);
  CHECK(e.grad_v.squaredNorm() == 0.0);
  CHECK(z.hessian_v_v(Vec::Ones(2), Vec::Ones(3), 0).norm() == 0.0);
}

TEST_CASE("pretrained classifier separates distinct blobs") {
  const Particles centers = data::circle_centers(3, 2, 3.0);
  const data::Dataset ds = data::gen_blobs(50, centers, 0.5, 4);
  ClassifierLoss clf(nn::Mlp({2, 16, 16, 3}), 1e-3);
  nn::OptimConfig opt;
  opt.lr = 1e-2;
  const Vec theta = pretrain_classifier(clf, ds, 1000, opt, 4);
  CHECK(classifier_accuracy(clf, theta, ds.samples(), ds) >= 0.95);
  const Vec again = pretrain_classifier(clf, ds, 1000, opt, 4);
  CHECK(theta == again);
}
