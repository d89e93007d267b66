#include <doctest.h>

#include "oracles.hpp"
#include "wdro/data.hpp"
#include "wdro/diagnostics.hpp"
#include "wdro/losses.hpp"
#include "wdro/particles.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

using namespace wdro;

namespace {

std::vector<Index> iota_batch(Index n) {
  std::vector<Index> b(static_cast<std::size_t>(n));
  std::iota(b.begin(), b.end(), Index{0});
  return b;
}

}  // namespace

TEST_CASE("grad norms of the zero loss at the samples") {
  const auto ds = data::gen_regression_2d(10, 1);
  losses::ZeroLoss zero(2, 2);
  const auto b = iota_batch(10);
  const GradNorms g = diag::grad_norms(zero, Vec::Zero(2), ds.samples(), ds, b, 1.0);
  CHECK(g.gn_theta == 0.0);
  CHECK(g.gn_T == 0.0);
}

TEST_CASE("grad norms on a single displaced particle") {
  Particles x = Particles::Zero(1, 2);
  const data::Dataset ds(x, {}, data::DatasetMeta{});
  losses::ZeroLoss zero(1, 2);
  Particles v(1, 2);
  v << 3.0, 4.0;
  const std::vector<Index> b{0};
  const GradNorms g = diag::grad_norms(zero, Vec::Zero(1), v, ds, b, 1.0);
  CHECK(g.gn_T == 5.0);
}

TEST_CASE("grad norms are permutation invariant") {
  const auto ds = data::gen_regression_2d(20, 2);
  losses::GlmRegressionLoss glm;
  CounterRng rng(2);
  const Vec theta = testing::random_vec(rng, 2);
  Particles v = ds.samples();
  for (Index i = 0; i < v.rows(); ++i) v.row(i) += 0.1 * testing::random_vec(rng, 2).transpose();
  std::vector<Index> b = iota_batch(20);
  const GradNorms a = diag::grad_norms(glm, theta, v, ds, b, 0.5);
  std::reverse(b.begin(), b.end());
  std::swap(b[3], b[11]);
  const GradNorms c = diag::grad_norms(glm, theta, v, ds, b, 0.5);
  CHECK(a.gn_theta == c.gn_theta);
  CHECK(a.gn_T == c.gn_T);
}

TEST_CASE("transport cost and displacement") {
  Particles x = Particles::Zero(2, 2);
  Particles v(2, 2);
  v << 3.0, 4.0, 0.0, 0.0;
  CHECK(diag::transport_cost(x, x) == 0.0);
  CHECK(diag::transport_cost(v, x) == 12.5);
  CHECK(diag::mean_displacement(v, x) == 2.5);
  CHECK(diag::max_particle_distance(v, x) == 5.0);
}

TEST_CASE("finite differences on polynomials") {
  const Vec c = Vec::LinSpaced(4, 1.0, 4.0);
  auto affine = [&](const Vec& z) { return c.dot(z) + 2.0; };
  const Vec z = Vec::LinSpaced(4, -1.0, 1.0);
  const Vec g = diag::fd_gradient(affine, z, 1e-3);
  CHECK((g - c).norm() < 1e-10);

  CounterRng rng(3);
  const Mat Q = testing::random_symmetric(rng, 4, -2.0, 2.0);
  auto quad = [&](const Vec& w) { return 0.5 * w.dot(Q * w); };
  CHECK(diag::relative_error(diag::fd_gradient(quad, z, 1e-4), Q * z) <= 1e-8);
}

TEST_CASE("finite difference error shrinks quadratically") {
  auto f = [](const Vec& z) { return std::exp(z[0]) * std::sin(z[1]); };
  Vec z(2);
  z << 0.3, 0.7;
  Vec exact(2);
  exact << std::exp(0.3) * std::sin(0.7), std::exp(0.3) * std::cos(0.7);
  const double e1 = (diag::fd_gradient(f, z, 1e-2) - exact).norm();
  const double e2 = (diag::fd_gradient(f, z, 5e-3) - exact).norm();
  CHECK(e1 / e2 >= 3.0);
}

TEST_CASE("finite differences reject non-finite values") {
  auto f = [](const Vec& z) { return std::log(z[0]); };
  CHECK_THROWS_AS(diag::fd_gradient(f, Vec::Zero(1), 1e-3), OracleError);
}

TEST_CASE("jacobi eigenvalues agree with the dense solver") {
  CounterRng rng(4);
  for (int t = 0; t < 5; ++t) {
    const Mat a = testing::random_symmetric(rng, 5, -3.0, 3.0);
    const Vec ev = diag::jacobi_eigenvalues(a);
    const Eigen::SelfAdjointEigenSolver<Mat> es(a);
    CHECK((ev - es.eigenvalues()).norm() < 1e-10);
  }
}

TEST_CASE("probe on a diagonal quadratic recovers the joint constant") {
  const auto ds = data::gen_regression_2d(50, 5);
  Vec h(3);
  h << 1.0, 2.0, 3.0;
  auto q = losses::QuadraticLoss::diagonal(1, 2, h);
  Problem prob(q, ds, 0.2);
  diag::ProbeRanges r;
  r.smoothness_probes = 500;
  const auto rep = diag::probe_assumptions(prob, r);
  REQUIRE(rep.l0_estimate.has_value());
  CHECK(*rep.l0_estimate >= 0.9 * 3.0);
  CHECK(*rep.l0_estimate <= 3.0 + 1e-6);
  REQUIRE(rep.rho_estimate.has_value());
  CHECK(*rep.rho_estimate == doctest::Approx(3.0));
}

TEST_CASE("probe on the zero loss gives the penalty error bound") {
  const auto ds = data::gen_regression_2d(30, 6);
  losses::ZeroLoss zero(1, 2);
  Problem prob(zero, ds, 0.5);
  diag::ProbeRanges r;
  r.smoothness_probes = 100;
  const auto rep = diag::probe_assumptions(prob, r);
  REQUIRE(rep.eb_T_ratio_min.has_value());
  CHECK(*rep.eb_T_ratio_min == doctest::Approx(2.0).epsilon(1e-6));
  CHECK(*rep.l0_estimate == 0.0);
  const auto j = rep.to_json();
  CHECK(j.contains("l0_estimate"));
  CHECK(j.contains("ranges"));
}

TEST_CASE("probe without hessian capability gives a partial report") {
  const auto ds = data::gen_blobs(10, data::circle_centers(3, 2, 2.0), 0.3, 7);
  losses::ClassifierLoss clf(nn::Mlp({2, 4, 3}), 1e-2);
  Problem prob(clf, ds, 0.5);
  diag::ProbeRanges r;
  r.smoothness_probes = 50;
  r.eb_thetas = 1;
  r.eb_draws = 1;
  const Vec theta = random_theta(clf.param_dim(), 0.5, 7);
  const auto rep = diag::probe_assumptions(prob, r, {{theta, ds.samples()}});
  CHECK(rep.l0_estimate.has_value());
  CHECK_FALSE(rep.hessian_min_eig.has_value());
  CHECK_FALSE(rep.warnings.empty());
}

TEST_CASE("averaged hessian of the glm loss is positive at a converged iterate") {
  const auto ds = data::gen_regression_2d(200, 0);
  losses::GlmRegressionLoss glm;
  Problem prob(glm, ds, 0.5);
  SolverConfig cfg;
  cfg.eta = 0.2;
  cfg.tau = 0.4;
  ParticleState st = make_state(ds, random_theta(2, 0.5, 0), cfg);
  REQUIRE(gda::run(st, prob, cfg).converged);
  const Mat H = diag::averaged_hessian_theta(glm, st.theta, st.v, ds);
  CHECK(diag::jacobi_eigenvalues(H).minCoeff() > 0.0);
}
