#include "wdro/run_log.hpp"

#include "wdro/data.hpp"

namespace wdro {

namespace {

std::string num(double x) { return data::format_double(x); }

std::string opt(const std::optional<double>& x) { return x ? num(*x) : std::string(); }

}  // namespace

std::string to_string(SolverFamily f) {
  switch (f) {
    case SolverFamily::Gda: return "gda";
    case SolverFamily::Elim: return "elim";
    case SolverFamily::Ppm: return "ppm";
  }
  return "gda";
}

std::string CsvLogWriter::header(SolverFamily family) {
  switch (family) {
    case SolverFamily::Gda:
      return "k,gn_theta,gn_T,objective,matching_loss,nge_cumulative,gn_theta_full,gn_T_full";
    case SolverFamily::Elim:
      return "k,gn_theta,gn_T,objective,matching_loss,nge_cumulative,gn_theta_full,gn_T_full,"
             "nge_batch_max,nge_batch_min,nge_batch_mean";
    case SolverFamily::Ppm:
      return "k,gn_theta_Hs,gn_T_Hs,objective,prox_inner_iters_mean,nge_cumulative,"
             "gn_theta_full,gn_T_full,moreau_residual";
  }
  return {};
}

std::string CsvLogWriter::format_row(const IterRecord& r, SolverFamily family) {
  std::string s = std::to_string(r.k) + ',' + num(r.gn_theta) + ',' + num(r.gn_T) + ',' + num(r.objective) + ',';
  const std::string full_theta = r.full ? num(r.full->gn_theta) : std::string();
  const std::string full_T = r.full ? num(r.full->gn_T) : std::string();
  if (family == SolverFamily::Ppm) {
    s += opt(r.prox_inner_iters_mean) + ',' + std::to_string(r.nge_cumulative) + ',' + full_theta + ',' + full_T +
         ',' + opt(r.moreau_residual);
    return s;
  }
  s += opt(r.matching_loss) + ',' + std::to_string(r.nge_cumulative) + ',' + full_theta + ',' + full_T;
  if (family == SolverFamily::Elim) {
    if (r.nge_batch) {
      s += ',' + std::to_string(r.nge_batch->max) + ',' + std::to_string(r.nge_batch->min) + ',' +
           num(r.nge_batch->mean);
    } else {
      s += ",,,";
    }
  }
  return s;
}

void CsvLogWriter::write_header() {
  *out_ << header(family_) << '\n';
  out_->flush();
}

void CsvLogWriter::write(const IterRecord& r) {
  *out_ << format_row(r, family_) << '\n';
  out_->flush();
}

}  // namespace wdro
