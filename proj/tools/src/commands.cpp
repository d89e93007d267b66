#include "wdro_cli/commands.hpp"

#include "wdro/elimination.hpp"
#include "wdro/ppm.hpp"

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace fs = std::filesystem;

namespace wdro::cli {

namespace {

SolverFamily family_of(Method m) {
  switch (m) {
    case Method::Elim: return SolverFamily::Elim;
    case Method::Ppm: return SolverFamily::Ppm;
    default: return SolverFamily::Gda;
  }
}

nlohmann::json norms_json(const GradNorms& g) { return {{"gn_theta", g.gn_theta}, {"gn_T", g.gn_T}}; }

void resolve_map(RunConfig& cfg, const data::Dataset& data) {
  if (!cfg.map) return;
  cfg.map->net.data_dim = data.dim();
  cfg.map->net.num_classes = data.num_classes();
}

/// Keeps the header and the first `rows` data lines of an existing log.
void truncate_log(const fs::path& path, Index rows) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot resume: '" + path.string() + "' is missing");
  std::vector<std::string> keep;
  std::string line;
  while (std::getline(in, line) && static_cast<Index>(keep.size()) < rows + 1) keep.push_back(line);
  in.close();
  if (static_cast<Index>(keep.size()) < rows + 1)
    throw UsageError("cannot resume: log has fewer rows than the checkpoint iteration");
  std::ofstream out(path, std::ios::trunc);
  for (const auto& l : keep) out << l << '\n';
}

TeacherPairs all_pairs(const data::Dataset& data, const Particles& v) {
  std::vector<Index> all(static_cast<std::size_t>(data.size()));
  for (Index i = 0; i < data.size(); ++i) all[static_cast<std::size_t>(i)] = i;
  return batch_pairs(data, v, all);
}

}  // namespace

int cmd_gen_data(const GenDataOptions& opts, std::ostream& log) {
  if (opts.out.empty()) throw UsageError("gen-data: --out is required");
  if (fs::exists(opts.out) && !opts.force)
    throw UsageError("refusing to overwrite '" + opts.out + "' (pass --force)");
  DataSpec spec = opts.spec;
  spec.path.clear();
  const data::Dataset ds = make_dataset(spec);
  if (const auto parent = fs::path(opts.out).parent_path(); !parent.empty()) fs::create_directories(parent);
  data::save(ds, opts.out);
  log << "wrote " << ds.size() << " samples to " << opts.out << '\n';
  return kExitOk;
}

nlohmann::json Checkpoint::to_json() const {
  return {{"method", method},
          {"config_hash", config_hash},
          {"k", state.k},
          {"state", state.to_json()},
          {"map", map ? map->to_json() : nlohmann::json(nullptr)}};
}

Checkpoint Checkpoint::from_json(const nlohmann::json& j) {
  try {
    Checkpoint c;
    c.method = j.at("method").get<std::string>();
    c.config_hash = j.at("config_hash").get<std::string>();
    c.state = ParticleState::from_json(j.at("state"));
    if (!j.at("map").is_null()) c.map = TransportNet::from_json(j.at("map"));
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("bad checkpoint: ") + e.what());
  }
}

Checkpoint read_checkpoint(const std::string& run_dir) {
  return Checkpoint::from_json(read_json_file((fs::path(run_dir) / "checkpoint.json").string()));
}

int cmd_solve(RunConfig cfg, const SolveFlags& flags, std::ostream& log) {
  if (flags.deterministic) cfg.solver.threads = 1;
  cfg.validate();
  const data::Dataset data = make_dataset(cfg.data);
  const auto loss = make_loss(cfg.loss, data.dim(), std::max<Index>(data.num_classes(), 1));
  resolve_map(cfg, data);
  const Problem problem(*loss, data, cfg.gamma);
  cfg.solver.validate(data.size());

  const fs::path dir(cfg.out_dir);
  const fs::path log_path = dir / "log.csv";
  const fs::path ckpt_path = dir / "checkpoint.json";
  if (!flags.resume && !flags.force && (fs::exists(log_path) || fs::exists(ckpt_path)))
    throw UsageError("run directory '" + dir.string() + "' already holds a run (pass --force or --resume)");
  fs::create_directories(dir);
  const std::string hash = config_hash(cfg);
  const SolverFamily family = family_of(cfg.method);

  Checkpoint ck;
  ck.method = to_string(cfg.method);
  ck.config_hash = hash;
  if (flags.resume) {
    Checkpoint prev = read_checkpoint(dir.string());
    if (prev.config_hash != hash) throw UsageError("cannot resume: config hash differs from the checkpoint");
    if (prev.method != ck.method) throw UsageError("cannot resume: checkpoint was written by another method");
    if (prev.state.v.rows() != data.size() || prev.state.theta.size() != loss->param_dim())
      throw UsageError("cannot resume: checkpoint shapes do not match the data and loss");
    ck.state = std::move(prev.state);
    ck.map = std::move(prev.map);
    if (cfg.map.has_value() != ck.map.has_value())
      throw UsageError("cannot resume: transport map presence differs from the checkpoint");
    truncate_log(log_path, ck.state.k);
  } else {
    ck.state = make_state(data, initial_theta(cfg, *loss, data), cfg.solver);
    if (cfg.map) ck.map.emplace(cfg.map->net);
  }
  write_json_file((dir / "config.json").string(), cfg.to_json());

  std::ofstream csv(log_path, flags.resume ? std::ios::app : std::ios::trunc);
  if (!csv) throw ConfigError("cannot open '" + log_path.string() + "' for writing");
  CsvLogWriter writer(csv, family);
  if (!flags.resume) writer.write_header();

  auto save_checkpoint = [&](const ParticleState& st) {
    Checkpoint out;
    out.method = ck.method;
    out.config_hash = hash;
    out.state = st;
    out.map = ck.map;
    write_json_file(ckpt_path.string(), out.to_json());
  };
  const StateHook hook = [&](const IterRecord& rec, const ParticleState& st) {
    writer.write(rec);
    if (cfg.checkpoint_every > 0 && st.k % cfg.checkpoint_every == 0) save_checkpoint(st);
  };

  TransportNet* map = ck.map ? &*ck.map : nullptr;
  nlohmann::json summary = {{"method", ck.method}, {"config_hash", hash}};
  const auto t0 = std::chrono::steady_clock::now();
  RunLog result;
  try {
    switch (cfg.method) {
      case Method::Elim: result = elim::run(ck.state, problem, cfg.solver, map, hook); break;
      case Method::Ppm: result = ppm::run(ck.state, problem, cfg.solver, map, hook); break;
      default: result = gda::run(ck.state, problem, cfg.solver, map, hook); break;
    }
  } catch (const DivergenceError& e) {
    summary["converged"] = false;
    summary["diverged"] = {{"iteration", e.iteration()}, {"message", e.what()}};
    summary["iterations"] = ck.state.k;
    write_json_file((dir / "summary.json").string(), summary);
    log << "error: " << e.what() << '\n';
    return kExitDiverged;
  }
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  if (map != nullptr && cfg.map->post_fit_epochs > 0) {
    TransportNetConfig fit_cfg = map->config();
    fit_cfg.epochs_per_batch = cfg.map->post_fit_epochs;
    if (cfg.map->post_fit_lr > 0.0) fit_cfg.optim.lr = cfg.map->post_fit_lr;
    TransportNet fitted(fit_cfg);
    fitted.set_params(map->params());
    fitted.matching_update(all_pairs(data, ck.state.v));
    nlohmann::json j = fitted.to_json();
    j["config"] = map->config().to_json();
    ck.map = TransportNet::from_json(j);
  }
  save_checkpoint(ck.state);

  summary["converged"] = result.converged;
  summary["iterations"] = result.iterations;
  summary["final_norms"] = norms_json(result.final_norms);
  summary["final_full_norms"] = result.final_full_norms ? norms_json(*result.final_full_norms) : nlohmann::json(nullptr);
  summary["nge_total"] = result.nge_total;
  summary["function_evals"] = result.function_evals;
  summary["transport_cost"] = diag::transport_cost(ck.state.v, data.samples());
  summary["mean_displacement"] = diag::mean_displacement(ck.state.v, data.samples());
  summary["theta"] = nn::vec_to_json(ck.state.theta);
  summary["warnings"] = result.warnings;
  summary["elapsed_seconds"] = seconds;
  if (ck.map) summary["final_matching_loss"] = ck.map->matching_loss(all_pairs(data, ck.state.v));
  write_json_file((dir / "summary.json").string(), summary);

  log << ck.method << ": " << (result.converged ? "converged" : "not converged") << " after "
      << result.iterations << " iterations, norms (" << result.final_norms.gn_theta << ", "
      << result.final_norms.gn_T << "), NGE " << result.nge_total << '\n';
  if (result.converged || flags.allow_max_iters) return kExitOk;
  return kExitNotConverged;
}

void write_trajectories(const TransportNet& net, const data::Dataset& data, const std::vector<Index>& samples,
                        Index steps, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot open '" + path + "' for writing");
  out << "sample,j";
  for (Index c = 0; c < data.dim(); ++c) out << ",x_" << c;
  out << '\n';
  for (Index i : samples) {
    if (i < 0 || i >= data.size()) throw UsageError("trajectory sample " + std::to_string(i) + " out of range");
    const Particles traj = interpolation_trajectory(net, data.sample(i), data.label(i), steps);
    for (Index j = 0; j < traj.rows(); ++j) {
      out << i << ',' << j;
      for (Index c = 0; c < traj.cols(); ++c) out << ',' << data::format_double(traj(j, c));
      out << '\n';
    }
  }
}

int cmd_eval(const EvalOptions& opts, std::ostream& log) {
  const RunConfig cfg = RunConfig::from_json(read_json_file((fs::path(opts.run_dir) / "config.json").string()));
  const Checkpoint ck = read_checkpoint(opts.run_dir);
  if (!ck.map) throw UsageError("checkpoint in '" + opts.run_dir + "' has no transport net");
  const data::Dataset train = make_dataset(cfg.data);
  data::Dataset test;
  if (!opts.test_data.empty()) {
    test = data::load(opts.test_data);
  } else {
    DataSpec spec = cfg.data;
    if (!spec.path.empty()) {
      const auto& meta = train.meta();
      spec.path.clear();
      spec.kind = meta.kind;
      spec.n = meta.n;
      spec.sigma_y = meta.sigma_y;
      spec.k = meta.num_classes;
      if (meta.kind == "blobs") throw UsageError("eval: pass --test-data for file-backed blob runs");
    }
    spec.seed = opts.test_seed;
    test = make_dataset(spec);
  }
  if (test.dim() != train.dim()) throw UsageError("eval: test data dimension differs from training data");
  const TeacherPairs tr = all_pairs(train, ck.state.v);
  const TeacherPairs te = nearest_neighbor_targets(tr, test.samples(), test.labels(), opts.targets);
  const GeneralizationReport rep = evaluate_generalization(*ck.map, tr, te);
  nlohmann::json j = {{"train_mse", rep.train_mse},
                      {"test_mse", rep.test_mse},
                      {"generalization_ratio", rep.ratio()},
                      {"targets", opts.targets == NeighborTarget::Particle ? "particle" : "displacement"},
                      {"n_train", train.size()},
                      {"n_test", test.size()}};
  if (!opts.traj_samples.empty()) {
    const std::string path = (fs::path(opts.run_dir) / "traj.csv").string();
    write_trajectories(*ck.map, train, opts.traj_samples, opts.traj_steps, path);
    j["trajectories"] = path;
  }
  const std::string out = opts.out.empty() ? (fs::path(opts.run_dir) / "eval.json").string() : opts.out;
  write_json_file(out, j);
  log << "train mse " << rep.train_mse << ", test mse " << rep.test_mse << ", ratio " << rep.ratio() << '\n';
  return kExitOk;
}

int cmd_probe(const ProbeOptions& opts, std::ostream& log) {
  const RunConfig& cfg = opts.cfg;
  const data::Dataset data = make_dataset(cfg.data);
  const auto loss = make_loss(cfg.loss, data.dim(), std::max<Index>(data.num_classes(), 1));
  const Problem problem(*loss, data, cfg.gamma);

  std::vector<diag::Iterate> iterates;
  std::string source = "none";
  if (!opts.run_dir.empty()) {
    const Checkpoint ck = read_checkpoint(opts.run_dir);
    iterates.emplace_back(ck.state.theta, ck.state.v);
    source = "checkpoint";
  } else if (cfg.loss.kind == "glm") {
    SolverConfig s;
    s.eta = 0.2;
    s.tau = 0.4;
    s.seed = opts.ranges.seed;
    ParticleState st = make_state(data, initial_theta(cfg, *loss, data), s);
    std::vector<diag::Iterate> trail;
    const StateHook keep = [&](const IterRecord&, const ParticleState& x) { trail.emplace_back(x.theta, x.v); };
    try {
      const RunLog r = gda::run(st, problem, s, nullptr, keep);
      source = r.converged ? "converged theta-fast gda" : "theta-fast gda (not converged)";
    } catch (const DivergenceError& e) {
      source = std::string("theta-fast gda diverged: ") + e.what();
    }
    if (!trail.empty()) {
      const std::size_t from = trail.size() - std::max<std::size_t>(1, trail.size() / 10);
      iterates.assign(trail.begin() + static_cast<std::ptrdiff_t>(from), trail.end());
    }
  }
  diag::AssumptionReport rep = diag::probe_assumptions(problem, opts.ranges, iterates);
  nlohmann::json j = rep.to_json();
  j["iterate_source"] = source;
  write_json_file(opts.out, j);
  log << "l0 " << rep.l0_estimate.value_or(0.0) << ", eb ratio " << rep.eb_T_ratio_min.value_or(0.0);
  if (rep.hessian_min_eig) log << ", hessian min eig " << *rep.hessian_min_eig;
  log << '\n';
  return kExitOk;
}

int cmd_export_traj(const ExportTrajOptions& opts, std::ostream& log) {
  const RunConfig cfg = RunConfig::from_json(read_json_file((fs::path(opts.run_dir) / "config.json").string()));
  const Checkpoint ck = read_checkpoint(opts.run_dir);
  if (!ck.map) throw UsageError("checkpoint in '" + opts.run_dir + "' has no transport net");
  const data::Dataset data = make_dataset(cfg.data);
  const std::string out = opts.out.empty() ? (fs::path(opts.run_dir) / "traj.csv").string() : opts.out;
  std::vector<Index> samples = opts.samples;
  if (samples.empty()) samples.push_back(0);
  write_trajectories(*ck.map, data, samples, opts.steps, out);
  log << "wrote " << samples.size() << " trajectories to " << out << '\n';
  return kExitOk;
}

}  // namespace wdro::cli
