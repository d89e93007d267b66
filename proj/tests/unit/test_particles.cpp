#include <doctest.h>

#include "oracles.hpp"
#include "wdro/data.hpp"
#include "wdro/diagnostics.hpp"
#include "wdro/losses.hpp"
#include "wdro/particles.hpp"
#include "wdro/run_log.hpp"
#include "wdro/schedule.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

using namespace wdro;

namespace {

SolverConfig reference_config() {
  SolverConfig c;
  c.eta = 0.4;
  c.tau = 0.2;
  c.max_iters = 3000;
  return c;
}

double sig(double t) { return 1.0 / (1.0 + std::exp(-t)); }

// Hand-written GLM gradients with sigma_y = 0.5.
void glm_grads(const Vec& th, const Vec& v, Vec& gth, Vec& gv) {
  const double t = th.dot(v);
  const double s = sig(t);
  const double ys = std::exp(-2.0 * v.squaredNorm());
  const double r = s - ys;
  gth = r * s * (1 - s) * v;
  gv = r * (s * (1 - s) * th + 4.0 * ys * v);
}

}  // namespace

TEST_CASE("schedule partitions each epoch") {
  BatchSchedule s(10, 3, 5);
  std::set<Index> seen;
  std::vector<std::size_t> sizes;
  for (int b = 0; b < 4; ++b) {
    const auto batch = s.next();
    sizes.push_back(batch.size());
    CHECK(std::is_sorted(batch.begin(), batch.end()));
    for (Index i : batch) CHECK(seen.insert(i).second);
  }
  CHECK(seen.size() == 10);
  CHECK(sizes == std::vector<std::size_t>{3, 3, 3, 1});
  BatchSchedule copy = BatchSchedule::from_json(s.to_json());
  CHECK(copy == s);
  CHECK(copy.next() == s.next());
  CHECK_THROWS_AS(BatchSchedule(0, 0, 0), ConfigError);
  CHECK_THROWS_AS(BatchSchedule(5, 6, 0), ConfigError);
}

TEST_CASE("full batch schedule is the identity") {
  BatchSchedule s(4, 4, 1);
  CHECK(s.next() == std::vector<Index>{0, 1, 2, 3});
  CHECK(s.next() == std::vector<Index>{0, 1, 2, 3});
}

TEST_CASE("zero loss keeps every particle at its sample") {
  const auto ds = data::gen_regression_2d(20, 1);
  losses::ZeroLoss zero(2, 2);
  Problem prob(zero, ds, 0.5);
  SolverConfig cfg = reference_config();
  cfg.momentum = 0.5;
  ParticleState st = make_state(ds, Vec::Ones(2), cfg);
  for (int k = 0; k < 5; ++k) gda::step(st, prob, cfg);
  CHECK(st.v == ds.samples());
  CHECK(st.theta == Vec::Ones(2));
  ParticleState st2 = make_state(ds, Vec::Ones(2), cfg);
  const RunLog log = gda::run(st2, prob, cfg);
  CHECK(log.converged);
  CHECK(log.iterations == 1);
}

TEST_CASE("one gda step matches the hand computation") {
  const auto ds = data::gen_regression_2d(6, 2);
  losses::GlmRegressionLoss glm;
  const double gamma = 0.5;
  Problem prob(glm, ds, gamma);
  SolverConfig cfg = reference_config();
  Vec th0(2);
  th0 << 0.3, -0.7;
  ParticleState st = make_state(ds, th0, cfg);
  // move particles off the samples so the penalty term is active
  for (Index i = 0; i < st.v.rows(); ++i) st.v.row(i) += Vec::Constant(2, 0.05 * static_cast<double>(i)).transpose();
  const Particles v0 = st.v;
  gda::step(st, prob, cfg);

  Vec mean_gth = Vec::Zero(2);
  for (Index i = 0; i < 6; ++i) {
    Vec gth, gv;
    glm_grads(th0, v0.row(i).transpose(), gth, gv);
    mean_gth += gth / 6.0;
    const Vec expected = v0.row(i).transpose() + cfg.eta * (gv - (v0.row(i).transpose() - ds.sample(i)) / gamma);
    CHECK((st.v.row(i).transpose() - expected).norm() < 1e-14);
  }
  CHECK((st.theta - (th0 - cfg.tau * mean_gth)).norm() < 1e-14);
}

TEST_CASE("zeroed velocities reduce momentum to plain gda") {
  const auto ds = data::gen_regression_2d(30, 3);
  losses::GlmRegressionLoss glm;
  Problem prob(glm, ds, 0.5);
  SolverConfig plain = reference_config();
  SolverConfig mom = plain;
  mom.momentum = 0.7;
  const Vec th0 = random_theta(2, 0.5, 3);
  ParticleState a = make_state(ds, th0, plain);
  ParticleState b = make_state(ds, th0, mom);
  for (int k = 0; k < 20; ++k) {
    gda::step(a, prob, plain);
    b.g.setZero();
    b.h.setZero();
    gda::step(b, prob, mom);
  }
  CHECK(a.v == b.v);
  CHECK(a.theta == b.theta);
}

TEST_CASE("particles outside the batch are untouched") {
  const auto ds = data::gen_regression_2d(40, 4);
  losses::GlmRegressionLoss glm;
  Problem prob(glm, ds, 0.5);
  SolverConfig cfg = reference_config();
  cfg.batch_size = 7;
  cfg.momentum = 0.7;
  ParticleState st = make_state(ds, random_theta(2, 0.5, 4), cfg);
  for (int k = 0; k < 3; ++k) gda::step(st, prob, cfg);
  const Particles before = st.v;
  const Particles g_before = st.g;
  const BatchGradients grads = gda::step(st, prob, cfg);
  std::set<Index> in(grads.batch.begin(), grads.batch.end());
  for (Index i = 0; i < 40; ++i) {
    if (in.count(i)) continue;
    CHECK(st.v.row(i) == before.row(i));
    CHECK(st.g.row(i) == g_before.row(i));
  }
}

TEST_CASE("alternating variant uses the updated particles") {
  const auto ds = data::gen_regression_2d(10, 5);
  losses::GlmRegressionLoss glm;
  Problem prob(glm, ds, 0.5);
  SolverConfig cfg = reference_config();
  cfg.alternating = true;
  const Vec th0 = random_theta(2, 0.5, 5);
  ParticleState st = make_state(ds, th0, cfg);
  gda::step(st, prob, cfg);
  Vec mean = Vec::Zero(2);
  for (Index i = 0; i < 10; ++i) mean += glm.grad_theta(th0, st.v.row(i).transpose(), 0) / 10.0;
  CHECK((st.theta - (th0 - cfg.tau * mean)).norm() < 1e-14);
}

TEST_CASE("zero iterations leave the state and log empty") {
  const auto ds = data::gen_regression_2d(10, 6);
  losses::GlmRegressionLoss glm;
  Problem prob(glm, ds, 0.5);
  SolverConfig cfg = reference_config();
  cfg.max_iters = 0;
  ParticleState st = make_state(ds, Vec::Ones(2), cfg);
  const RunLog log = gda::run(st, prob, cfg);
  CHECK(log.rows.empty());
  CHECK_FALSE(log.converged);
  CHECK(st.v == ds.samples());
  CHECK(st.theta == Vec::Ones(2));
}

TEST_CASE("full batch runs are bitwise reproducible") {
  const auto ds = data::gen_regression_2d(50, 7);
  losses::GlmRegressionLoss glm;
  Problem prob(glm, ds, 0.5);
  SolverConfig cfg = reference_config();
  cfg.max_iters = 200;
  ParticleState a = make_state(ds, random_theta(2, 0.5, 7), cfg);
  ParticleState b = make_state(ds, random_theta(2, 0.5, 7), cfg);
  const RunLog la = gda::run(a, prob, cfg);
  const RunLog lb = gda::run(b, prob, cfg);
  CHECK(a.v == b.v);
  CHECK(a.theta == b.theta);
  REQUIRE(la.rows.size() == lb.rows.size());
  for (std::size_t i = 0; i < la.rows.size(); ++i) CHECK(la.rows[i].gn_T == lb.rows[i].gn_T);
}

TEST_CASE("reference configuration converges and the residual decays") {
  const auto ds = data::gen_regression_2d(200, 0);
  losses::GlmRegressionLoss glm;
  Problem prob(glm, ds, 0.5);
  SolverConfig cfg = reference_config();
  ParticleState st = make_state(ds, random_theta(2, 0.5, 0), cfg);
  const RunLog log = gda::run(st, prob, cfg);
  CHECK(log.converged);
  CHECK(log.iterations >= 300);
  CHECK(log.iterations <= 2000);
  CHECK(log.final_norms.below(cfg.tol));
  CHECK(log.nge_total == log.iterations);
  // final-half log-linear slope of gn_T is negative
  const std::size_t half = log.rows.size() / 2;
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  const double cnt = static_cast<double>(log.rows.size() - half);
  for (std::size_t i = half; i < log.rows.size(); ++i) {
    const double x = static_cast<double>(i);
    const double y = std::log(log.rows[i].gn_T);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  CHECK((cnt * sxy - sx * sy) / (cnt * sxx - sx * sx) < 0.0);
}

TEST_CASE("larger gamma moves particles further") {
  const auto ds = data::gen_regression_2d(200, 0);
  losses::GlmRegressionLoss glm;
  SolverConfig cfg = reference_config();
  cfg.eta = 0.2;
  cfg.tau = 0.4;
  double last = -1.0;
  for (double gamma : {0.5, 1.0, 2.0}) {
    Problem prob(glm, ds, gamma);
    ParticleState st = make_state(ds, random_theta(2, 0.5, 0), cfg);
    const RunLog log = gda::run(st, prob, cfg);
    CHECK(log.converged);
    const double disp = diag::mean_displacement(st.v, ds.samples());
    CHECK(disp > last);
    last = disp;
  }
}

TEST_CASE("oversized steps raise a divergence error") {
  const auto ds = data::gen_regression_2d(20, 8);
  losses::QuadraticLoss q = losses::QuadraticLoss::in_v(Vec::Zero(2), 10.0 * Mat::Identity(2, 2));
  Problem prob(q, ds, 0.5);
  SolverConfig cfg = reference_config();
  cfg.eta = 1.0;
  ParticleState st = make_state(ds, Vec::Zero(1), cfg);
  try {
    gda::run(st, prob, cfg);
    FAIL("expected divergence");
  } catch (const DivergenceError& e) {
    CHECK(e.iteration() >= 0);
    CHECK(e.iteration() < 100);
  }
}

TEST_CASE("minibatch stopping requires full-data norms below tol") {
  const auto ds = data::gen_regression_2d(20, 9);
  losses::ZeroLoss zero(1, 2);
  const double gamma = 0.5;
  Problem prob(zero, ds, gamma);
  SolverConfig cfg = reference_config();
  cfg.eta = gamma;
  cfg.batch_size = 5;
  cfg.log_full_norms = false;
  ParticleState st = make_state(ds, Vec::Zero(1), cfg);
  BatchSchedule peek = st.schedule;
  const auto first = peek.next();
  for (Index i = 0; i < 20; ++i)
    if (std::find(first.begin(), first.end(), i) == first.end()) st.v.row(i).array() += 1.0;
  const RunLog log = gda::run(st, prob, cfg);
  REQUIRE(log.rows.size() >= 2);
  CHECK(log.rows[0].gn_T == 0.0);
  REQUIRE(log.rows[0].full.has_value());
  CHECK_FALSE(log.rows[0].full->below(cfg.tol));
  CHECK(log.converged);
  REQUIRE(log.final_full_norms.has_value());
  CHECK(log.final_full_norms->below(cfg.tol));
  CHECK((st.v - ds.samples()).norm() < 1e-12);
}

TEST_CASE("particle state json round trip") {
  const auto ds = data::gen_regression_2d(15, 10);
  losses::GlmRegressionLoss glm;
  Problem prob(glm, ds, 0.5);
  SolverConfig cfg = reference_config();
  cfg.batch_size = 4;
  cfg.momentum = 0.3;
  ParticleState st = make_state(ds, random_theta(2, 0.5, 10), cfg);
  for (int k = 0; k < 5; ++k) gda::step(st, prob, cfg);
  const ParticleState back = ParticleState::from_json(nlohmann::json::parse(st.to_json().dump()));
  CHECK(back.v == st.v);
  CHECK(back.g == st.g);
  CHECK(back.theta == st.theta);
  CHECK(back.h == st.h);
  CHECK(back.schedule == st.schedule);
}

TEST_CASE("csv rows format and round trip") {
  IterRecord r;
  r.k = 3;
  r.gn_theta = 0.1;
  r.gn_T = 1.0 / 3.0;
  r.objective = -2.5;
  r.nge_cumulative = 4;
  r.full = GradNorms{0.2, 0.3};
  const std::string row = CsvLogWriter::format_row(r, SolverFamily::Gda);
  std::vector<std::string> cells;
  std::stringstream ss(row);
  std::string cell;
  while (std::getline(ss, cell, ',')) cells.push_back(cell);
  const std::string header = CsvLogWriter::header(SolverFamily::Gda);
  CHECK(header == "k,gn_theta,gn_T,objective,matching_loss,nge_cumulative,gn_theta_full,gn_T_full");
  REQUIRE(cells.size() == 8);
  CHECK(cells[0] == "3");
  CHECK(std::stod(cells[2]) == r.gn_T);
  CHECK(cells[4].empty());
  CHECK(cells[5] == "4");
  CHECK(CsvLogWriter::header(SolverFamily::Elim).find("nge_batch_max") != std::string::npos);
  CHECK(CsvLogWriter::header(SolverFamily::Ppm).find("moreau_residual") != std::string::npos);
}
