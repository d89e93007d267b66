#include "wdro_cli/commands.hpp"

#include <CLI11.hpp>

#include <cstdlib>
#include <iostream>
#include <optional>

using namespace wdro;
using namespace wdro::cli;

namespace {

template <class T>
void set_if(const std::optional<T>& v, T& dst) {
  if (v) dst = *v;
}

struct DataFlags {
  std::optional<std::string> path, kind;
  std::optional<Index> n, k, n_per_class;
  std::optional<std::uint64_t> seed;
  std::optional<double> scale, radius;

  void add(CLI::App* app, bool with_path) {
    if (with_path) app->add_option("--data", path, "Dataset file");
    app->add_option("--kind", kind, "regression2d | blobs");
    app->add_option("--n", n, "Sample count (regression2d)");
    app->add_option("--k", k, "Number of classes (blobs)");
    app->add_option("--n-per-class", n_per_class, "Samples per class (blobs)");
    app->add_option("--data-seed", seed, "Data generation seed");
    app->add_option("--scale", scale, "Blob standard deviation");
    app->add_option("--radius", radius, "Blob center circle radius");
  }
  void apply(DataSpec& d) const {
    set_if(path, d.path);
    set_if(kind, d.kind);
    set_if(n, d.n);
    set_if(k, d.k);
    set_if(n_per_class, d.n_per_class);
    set_if(seed, d.seed);
    set_if(scale, d.scale);
    set_if(radius, d.radius);
  }
};

struct ConfigFlags {
  std::optional<std::string> config, method, loss, out;
  std::optional<double> gamma, eta, tau, momentum, tol, ppm_s, rho_est, inner_tol, theta0_scale;
  std::optional<double> map_lr, post_fit_lr, weight_decay;
  std::optional<Index> batch_size, max_iters, threads, checkpoint_every, map_sub_batch, map_epochs, post_fit_epochs;
  std::optional<std::uint64_t> seed;
  std::vector<double> quad_diag;
  bool with_map = false;
  DataFlags data;

  void add(CLI::App* app) {
    app->add_option("--config", config, "JSON run configuration");
    app->add_option("--method", method, "gda | gda-momentum | gda-alternating | elim | ppm");
    app->add_option("--loss", loss, "glm | classifier | quadratic | zero");
    app->add_option("--quad-diag", quad_diag, "Joint diagonal of the quadratic loss");
    app->add_option("--weight-decay", weight_decay, "Classifier L2 weight");
    app->add_option("--gamma", gamma, "Wasserstein penalty weight");
    app->add_option("--eta", eta, "Particle step size");
    app->add_option("--tau", tau, "Theta step size");
    app->add_option("--momentum", momentum, "Heavy-ball coefficient");
    app->add_option("--batch-size", batch_size, "Batch size m (0 = full)");
    app->add_option("--max-iters", max_iters, "Iteration cap");
    app->add_option("--tol", tol, "Gradient-norm tolerance");
    app->add_option("--seed", seed, "Solver seed (overrides WDRO_SEED)");
    app->add_option("--ppm-s", ppm_s, "Proximal step s");
    app->add_option("--rho-est", rho_est, "Weak-concavity bound used by ppm");
    app->add_option("--inner-tol", inner_tol, "Inner solver tolerance");
    app->add_option("--theta0-scale", theta0_scale, "Scale of the random theta init");
    app->add_option("--threads", threads, "Worker threads for per-particle loops");
    app->add_option("--out", out, "Run directory");
    app->add_option("--checkpoint-every", checkpoint_every, "Checkpoint period in iterations");
    app->add_flag("--with-map", with_map, "Train a transport map concurrently");
    app->add_option("--map-lr", map_lr, "Transport map learning rate");
    app->add_option("--map-sub-batch", map_sub_batch, "Transport map sub-batch m'");
    app->add_option("--map-epochs", map_epochs, "Map passes per teacher batch");
    app->add_option("--post-fit-epochs", post_fit_epochs, "Extra map epochs on the final particles");
    app->add_option("--post-fit-lr", post_fit_lr, "Learning rate for the extra map epochs");
    data.add(app, true);
  }

  RunConfig resolve() const {
    RunConfig cfg;
    if (config) cfg = RunConfig::from_json(read_json_file(*config));
    if (const char* env = std::getenv("WDRO_SEED"); env != nullptr && *env != '\0') {
      try {
        cfg.solver.seed = std::stoull(env);
      } catch (const std::exception&) {
        throw ConfigError(std::string("WDRO_SEED is not an unsigned integer: '") + env + "'");
      }
    }
    if (method) cfg.method = method_from_string(*method);
    set_if(loss, cfg.loss.kind);
    if (!quad_diag.empty()) cfg.loss.quad_diag = quad_diag;
    set_if(weight_decay, cfg.loss.weight_decay);
    set_if(gamma, cfg.gamma);
    set_if(eta, cfg.solver.eta);
    set_if(tau, cfg.solver.tau);
    set_if(momentum, cfg.solver.momentum);
    set_if(batch_size, cfg.solver.batch_size);
    set_if(max_iters, cfg.solver.max_iters);
    set_if(tol, cfg.solver.tol);
    set_if(seed, cfg.solver.seed);
    set_if(ppm_s, cfg.solver.ppm_s);
    set_if(rho_est, cfg.solver.rho_est);
    set_if(inner_tol, cfg.solver.inner_tol);
    set_if(theta0_scale, cfg.theta0_scale);
    set_if(threads, cfg.solver.threads);
    set_if(out, cfg.out_dir);
    set_if(checkpoint_every, cfg.checkpoint_every);
    data.apply(cfg.data);
    if (data.path) cfg.data.path = *data.path;
    if (with_map && !cfg.map) {
      cfg.map = MapSpec{};
      cfg.map->net.seed = cfg.solver.seed;
    }
    if (cfg.map) {
      set_if(map_lr, cfg.map->net.optim.lr);
      set_if(map_sub_batch, cfg.map->net.sub_batch);
      set_if(map_epochs, cfg.map->net.epochs_per_batch);
      set_if(post_fit_epochs, cfg.map->post_fit_epochs);
      set_if(post_fit_lr, cfg.map->post_fit_lr);
    }
    apply_method_defaults(cfg, momentum.has_value());
    return cfg;
  }
};

std::vector<Index> to_indices(const std::vector<long long>& v) { return {v.begin(), v.end()}; }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Wasserstein DRO minimax solvers: particle GDA, elimination, proximal point, transport maps"};
  app.require_subcommand(1);

  GenDataOptions gen;
  DataFlags gen_data;
  std::uint64_t gen_seed = 0;
  auto* gen_cmd = app.add_subcommand("gen-data", "Generate a synthetic dataset");
  gen_data.add(gen_cmd, false);
  gen_cmd->add_option("--seed", gen_seed, "Generation seed");
  gen_cmd->add_option("--out", gen.out, "Output CSV path")->required();
  gen_cmd->add_flag("--force", gen.force, "Overwrite an existing file");

  ConfigFlags solve_flags;
  SolveFlags solve;
  auto* solve_cmd = app.add_subcommand("solve", "Run a solver and write config, log, checkpoint and summary");
  solve_flags.add(solve_cmd);
  solve_cmd->add_flag("--force", solve.force, "Overwrite an existing run directory");
  solve_cmd->add_flag("--resume", solve.resume, "Continue from <out>/checkpoint.json");
  solve_cmd->add_flag("--allow-max-iters", solve.allow_max_iters, "Exit 0 when the iteration cap is hit");
  solve_cmd->add_flag("--deterministic", solve.deterministic, "Force single-threaded execution");

  EvalOptions eval;
  std::string eval_targets = "displacement";
  std::vector<long long> eval_traj;
  auto* eval_cmd = app.add_subcommand("eval", "Generalization metrics of a trained transport map");
  eval_cmd->add_option("--run", eval.run_dir, "Run directory")->required();
  eval_cmd->add_option("--test-data", eval.test_data, "Held-out dataset file");
  eval_cmd->add_option("--test-seed", eval.test_seed, "Seed for a fresh held-out draw");
  eval_cmd->add_option("--targets", eval_targets, "displacement | particle");
  eval_cmd->add_option("--traj-samples", eval_traj, "Training indices for trajectory export");
  eval_cmd->add_option("--traj-steps", eval.traj_steps, "Interpolation steps J");
  eval_cmd->add_option("--out", eval.out, "Metrics JSON path");

  ConfigFlags probe_flags;
  ProbeOptions probe;
  std::string probe_out = "probe.json";
  auto* probe_cmd = app.add_subcommand("probe", "Numerical probes of smoothness, error bound and Hessian positivity");
  probe_flags.add(probe_cmd);
  probe_cmd->remove_option(probe_cmd->get_option("--out"));
  probe_cmd->add_option("--report", probe_out, "Report JSON path");
  probe_cmd->add_option("--run", probe.run_dir, "Use the checkpointed iterate of this run");
  probe_cmd->add_option("--probes", probe.ranges.smoothness_probes, "Smoothness probe count");
  probe_cmd->add_option("--theta-radius", probe.ranges.theta_radius, "Theta sampling radius");
  probe_cmd->add_option("--box-inflation", probe.ranges.box_inflation, "Particle box inflation");

  ExportTrajOptions traj;
  std::vector<long long> traj_samples;
  auto* traj_cmd = app.add_subcommand("export-traj", "Export interpolation trajectories x -> T(x) as CSV");
  traj_cmd->add_option("--run", traj.run_dir, "Run directory")->required();
  traj_cmd->add_option("--samples", traj_samples, "Training sample indices");
  traj_cmd->add_option("--steps", traj.steps, "Interpolation steps J");
  traj_cmd->add_option("--out", traj.out, "CSV path");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*gen_cmd) {
      gen.spec.seed = gen_seed;
      gen_data.apply(gen.spec);
      if (gen_data.seed) gen.spec.seed = *gen_data.seed;
      return cmd_gen_data(gen, std::cout);
    }
    if (*solve_cmd) return cmd_solve(solve_flags.resolve(), solve, std::cout);
    if (*eval_cmd) {
      if (eval_targets == "particle") {
        eval.targets = NeighborTarget::Particle;
      } else if (eval_targets != "displacement") {
        throw ConfigError("--targets must be displacement or particle");
      }
      eval.traj_samples = to_indices(eval_traj);
      return cmd_eval(eval, std::cout);
    }
    if (*probe_cmd) {
      probe.cfg = probe_flags.resolve();
      probe.ranges.seed = probe.cfg.solver.seed;
      probe.out = probe_out;
      return cmd_probe(probe, std::cout);
    }
    if (*traj_cmd) {
      traj.samples = to_indices(traj_samples);
      return cmd_export_traj(traj, std::cout);
    }
  } catch (const wdro::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitError;
  }
  return kExitError;
}
