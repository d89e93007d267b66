#pragma once

// Test oracles: central finite differences, closed-form inner solutions, and
// seeded probe generators.

#include "wdro/core.hpp"
#include "wdro/diagnostics.hpp"
#include "wdro/rng.hpp"

#include <functional>

namespace wdro::testing {

/// Relative error of the analytic gradient against central differences at h.
inline double fd_check(const std::function<double(const Vec&)>& f, const Vec& z, const Vec& analytic,
                       double h = 1e-5) {
  return diag::relative_error(analytic, diag::fd_gradient(f, z, h), 1e-8);
}

inline Vec random_vec(CounterRng& rng, Index n, double scale = 1.0) {
  Vec v(n);
  for (Index i = 0; i < n; ++i) v[i] = scale * rng.normal();
  return v;
}

inline Vec uniform_vec(CounterRng& rng, Index n, double lo, double hi) {
  Vec v(n);
  for (Index i = 0; i < n; ++i) v[i] = rng.uniform(lo, hi);
  return v;
}

/// Maximizer of a^T v + 1/2 v^T B v - |v - x|^2 / (2 gamma): solves
/// ((1/gamma) I - B) v = a + x / gamma.
inline Vec quadratic_inner_solution(const Vec& a, const Mat& B, const Vec& x, double gamma) {
  const Index d = a.size();
  const Mat M = Mat::Identity(d, d) / gamma - B;
  return M.ldlt().solve(a + x / gamma);
}

/// Minimizer of -(a^T v + 1/2 v^T B v) + |v - x|^2 / (2 gamma) + |v - t|^2 / (2 s).
inline Vec quadratic_prox_solution(const Vec& a, const Mat& B, const Vec& x, const Vec& t, double gamma, double s) {
  const Index d = a.size();
  const Mat M = Mat::Identity(d, d) * (1.0 / gamma + 1.0 / s) - B;
  return M.ldlt().solve(a + x / gamma + t / s);
}

/// Random symmetric matrix with eigenvalues in [lo, hi].
inline Mat random_symmetric(CounterRng& rng, Index d, double lo, double hi) {
  Mat g(d, d);
  for (Index i = 0; i < d; ++i)
    for (Index j = 0; j < d; ++j) g(i, j) = rng.normal();
  Eigen::HouseholderQR<Mat> qr(g);
  const Mat q = qr.householderQ();
  Vec ev(d);
  for (Index i = 0; i < d; ++i) ev[i] = rng.uniform(lo, hi);
  return q * ev.asDiagonal() * q.transpose();
}

}  // namespace wdro::testing
