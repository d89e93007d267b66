#pragma once

#include "wdro/core.hpp"

#include <nlohmann/json.hpp>

#include <functional>
#include <limits>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace wdro {

struct GradNorms {
  double gn_theta = 0.0;
  double gn_T = 0.0;
  bool below(double tol) const { return gn_theta < tol && gn_T < tol; }
};

struct NgeStats {
  Index max = 0;
  Index min = 0;
  double mean = 0.0;
};

/// One row per evaluated iterate. For PPM the gradient norms are the
/// envelope surrogates |(t - t+)/s| and |d_theta H(t+, theta)|.
struct IterRecord {
  Index k = 0;
  double gn_theta = 0.0;
  double gn_T = 0.0;
  double objective = 0.0;
  std::optional<double> matching_loss;
  Index nge_cumulative = 0;
  std::optional<GradNorms> full;  ///< full-data norms when computed
  std::optional<NgeStats> nge_batch;
  std::optional<double> prox_inner_iters_mean;
  std::optional<double> moreau_residual;
  Index inner_failures = 0;
};

enum class SolverFamily { Gda, Elim, Ppm };

struct RunLog {
  SolverFamily family = SolverFamily::Gda;
  std::vector<IterRecord> rows;
  bool converged = false;
  /// Gradient passes performed so far, including any before a resume.
  Index iterations = 0;
  Index nge_total = 0;
  Index function_evals = 0;
  std::vector<std::string> warnings;
  GradNorms final_norms;
  std::optional<GradNorms> final_full_norms;
};

/// Called after each logged row; the solver state is passed by the caller's
/// concrete type via a type-erased hook in each solver.
using RowCallback = std::function<void(const IterRecord&)>;

/// Streams RunLog rows as CSV, flushing after each row.
class CsvLogWriter {
 public:
  CsvLogWriter(std::ostream& out, SolverFamily family) : out_(&out), family_(family) {}

  static std::string header(SolverFamily family);
  static std::string format_row(const IterRecord& r, SolverFamily family);

  void write_header();
  void write(const IterRecord& r);

 private:
  std::ostream* out_;
  SolverFamily family_;
};

std::string to_string(SolverFamily f);

}  // namespace wdro
