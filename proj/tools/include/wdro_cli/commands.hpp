#pragma once

// Subcommands behind the wdro executable. Each returns the process exit code:
// 0 success, 1 error, 2 not converged, 3 diverged.

#include "wdro/diagnostics.hpp"
#include "wdro/particles.hpp"
#include "wdro/transport_net.hpp"
#include "wdro_cli/config.hpp"

#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace wdro::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitError = 1;
inline constexpr int kExitNotConverged = 2;
inline constexpr int kExitDiverged = 3;

struct GenDataOptions {
  DataSpec spec;
  std::string out;
  bool force = false;
};

int cmd_gen_data(const GenDataOptions& opts, std::ostream& log);

struct SolveFlags {
  bool force = false;
  bool resume = false;
  bool allow_max_iters = false;
  bool deterministic = false;
};

int cmd_solve(RunConfig cfg, const SolveFlags& flags, std::ostream& log);

/// Contents of checkpoint.json.
struct Checkpoint {
  std::string method;
  std::string config_hash;
  ParticleState state;
  std::optional<TransportNet> map;

  nlohmann::json to_json() const;
  static Checkpoint from_json(const nlohmann::json& j);
};

Checkpoint read_checkpoint(const std::string& run_dir);

struct EvalOptions {
  std::string run_dir;
  std::string test_data;            ///< dataset file; empty generates a fresh draw
  std::uint64_t test_seed = 1000;
  NeighborTarget targets = NeighborTarget::Displacement;
  std::vector<Index> traj_samples;
  Index traj_steps = 10;
  std::string out;                  ///< defaults to <run_dir>/eval.json
};

int cmd_eval(const EvalOptions& opts, std::ostream& log);

struct ProbeOptions {
  RunConfig cfg;                    ///< loss, data and gamma
  std::string run_dir;              ///< use the checkpointed iterate when set
  diag::ProbeRanges ranges;
  std::string out = "probe.json";
};

int cmd_probe(const ProbeOptions& opts, std::ostream& log);

struct ExportTrajOptions {
  std::string run_dir;
  std::vector<Index> samples;
  Index steps = 10;
  std::string out;                  ///< CSV path; defaults to <run_dir>/traj.csv
};

int cmd_export_traj(const ExportTrajOptions& opts, std::ostream& log);

/// Rows "sample,j,x_0,...,x_{d-1}" for each requested sample.
void write_trajectories(const TransportNet& net, const data::Dataset& data, const std::vector<Index>& samples,
                        Index steps, const std::string& path);

}  // namespace wdro::cli
