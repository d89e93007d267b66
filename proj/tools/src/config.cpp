#include "wdro_cli/config.hpp"

#include "wdro/ppm.hpp"
#include "wdro/particles.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace wdro::cli {

std::string to_string(Method m) {
  switch (m) {
    case Method::Gda: return "gda";
    case Method::GdaMomentum: return "gda-momentum";
    case Method::GdaAlternating: return "gda-alternating";
    case Method::Elim: return "elim";
    case Method::Ppm: return "ppm";
  }
  return "gda";
}

Method method_from_string(const std::string& s) {
  if (s == "gda") return Method::Gda;
  if (s == "gda-momentum") return Method::GdaMomentum;
  if (s == "gda-alternating") return Method::GdaAlternating;
  if (s == "elim") return Method::Elim;
  if (s == "ppm") return Method::Ppm;
  throw ConfigError("unknown method '" + s + "' (expected gda, gda-momentum, gda-alternating, elim or ppm)");
}

nlohmann::json LossSpec::to_json() const {
  nlohmann::json j = {{"kind", kind}};
  if (kind == "glm") j["sigma_y"] = sigma_y;
  if (kind == "classifier") {
    j["hidden"] = hidden;
    j["weight_decay"] = weight_decay;
    j["pretrain_steps"] = pretrain_steps;
    j["pretrain_lr"] = pretrain_lr;
  }
  if (kind == "quadratic") {
    j["diag"] = quad_diag;
    j["param_dim"] = param_dim;
  }
  if (kind == "zero") j["param_dim"] = param_dim;
  return j;
}

LossSpec LossSpec::from_json(const nlohmann::json& j) {
  LossSpec s;
  s.kind = j.value("kind", s.kind);
  s.sigma_y = j.value("sigma_y", s.sigma_y);
  if (j.contains("hidden")) s.hidden = j.at("hidden").get<std::vector<Index>>();
  s.weight_decay = j.value("weight_decay", s.weight_decay);
  s.pretrain_steps = j.value("pretrain_steps", s.pretrain_steps);
  s.pretrain_lr = j.value("pretrain_lr", s.pretrain_lr);
  if (j.contains("diag")) s.quad_diag = j.at("diag").get<std::vector<double>>();
  s.param_dim = j.value("param_dim", s.param_dim);
  return s;
}

nlohmann::json DataSpec::to_json() const {
  if (!path.empty()) return {{"path", path}};
  nlohmann::json j = {{"kind", kind}, {"seed", seed}};
  if (kind == "regression2d") {
    j["n"] = n;
    j["sigma_y"] = sigma_y;
  } else {
    j["k"] = k;
    j["n_per_class"] = n_per_class;
    j["scale"] = scale;
    j["radius"] = radius;
  }
  return j;
}

DataSpec DataSpec::from_json(const nlohmann::json& j) {
  DataSpec s;
  s.path = j.value("path", std::string());
  s.kind = j.value("kind", s.kind);
  s.n = j.value("n", s.n);
  s.seed = j.value("seed", s.seed);
  s.sigma_y = j.value("sigma_y", s.sigma_y);
  s.k = j.value("k", s.k);
  s.n_per_class = j.value("n_per_class", s.n_per_class);
  s.scale = j.value("scale", s.scale);
  s.radius = j.value("radius", s.radius);
  return s;
}

namespace {

nlohmann::json solver_to_json(const SolverConfig& c) {
  return {{"eta", c.eta},
          {"tau", c.tau},
          {"momentum", c.momentum},
          {"batch_size", c.batch_size},
          {"max_iters", c.max_iters},
          {"tol", c.tol},
          {"seed", c.seed},
          {"alternating", c.alternating},
          {"ppm_s", c.ppm_s},
          {"inner_tol", c.inner_tol},
          {"rho_est", c.rho_est},
          {"log_full_norms", c.log_full_norms},
          {"threads", c.threads}};
}

SolverConfig solver_from_json(const nlohmann::json& j) {
  SolverConfig c;
  c.eta = j.value("eta", c.eta);
  c.tau = j.value("tau", c.tau);
  c.momentum = j.value("momentum", c.momentum);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.max_iters = j.value("max_iters", c.max_iters);
  c.tol = j.value("tol", c.tol);
  c.seed = j.value("seed", c.seed);
  c.alternating = j.value("alternating", c.alternating);
  c.ppm_s = j.value("ppm_s", c.ppm_s);
  c.inner_tol = j.value("inner_tol", c.inner_tol);
  c.rho_est = j.value("rho_est", c.rho_est);
  c.log_full_norms = j.value("log_full_norms", c.log_full_norms);
  c.threads = j.value("threads", c.threads);
  return c;
}

const char* const kRunControl[] = {"out_dir", "checkpoint_every"};

}  // namespace

void RunConfig::validate() const {
  if (!(gamma > 0.0)) throw ConfigError("gamma must be positive");
  if (checkpoint_every < 0) throw ConfigError("checkpoint_every must be nonnegative");
  if (!(theta0_scale >= 0.0)) throw ConfigError("theta0_scale must be nonnegative");
  solver.validate(0);
  switch (method) {
    case Method::Gda:
      if (solver.momentum != 0.0) throw ConfigError("method gda takes no momentum; use gda-momentum");
      if (solver.alternating) throw ConfigError("method gda is synchronous; use gda-alternating");
      break;
    case Method::GdaMomentum:
      if (!(solver.momentum > 0.0)) throw ConfigError("method gda-momentum requires momentum in (0, 1)");
      break;
    case Method::GdaAlternating:
      if (!solver.alternating) throw ConfigError("method gda-alternating requires alternating = true");
      break;
    case Method::Elim:
      if (solver.momentum != 0.0 || solver.alternating)
        throw ConfigError("method elim takes neither momentum nor alternating");
      break;
    case Method::Ppm:
      ppm::validate(solver, gamma);
      if (solver.momentum != 0.0 || solver.alternating)
        throw ConfigError("method ppm takes neither momentum nor alternating");
      break;
  }
  if (loss.kind == "classifier" && data.path.empty() && data.kind != "blobs")
    throw ConfigError("classifier loss needs labelled (blobs) data");
  if (loss.kind == "quadratic" && loss.quad_diag.empty()) throw ConfigError("quadratic loss needs a diagonal");
  if (loss.kind != "glm" && loss.kind != "classifier" && loss.kind != "quadratic" && loss.kind != "zero")
    throw ConfigError("unknown loss kind '" + loss.kind + "'");
  if (map) {
    if (map->post_fit_epochs < 0) throw ConfigError("map post_fit_epochs must be nonnegative");
    if (map->post_fit_lr < 0.0) throw ConfigError("map post_fit_lr must be nonnegative");
  }
}

void apply_method_defaults(RunConfig& cfg, bool momentum_given) {
  if (cfg.method == Method::GdaAlternating) cfg.solver.alternating = true;
  if (cfg.method == Method::GdaMomentum && !momentum_given && cfg.solver.momentum == 0.0) cfg.solver.momentum = 0.7;
}

nlohmann::json RunConfig::to_json() const {
  nlohmann::json j = {{"method", to_string(method)},
                      {"loss", loss.to_json()},
                      {"data", data.to_json()},
                      {"gamma", gamma},
                      {"solver", solver_to_json(solver)},
                      {"theta0_scale", theta0_scale},
                      {"out_dir", out_dir},
                      {"checkpoint_every", checkpoint_every}};
  if (!theta0.empty()) j["theta0"] = theta0;
  if (map) {
    j["map"] = map->net.to_json();
    j["map"]["post_fit_epochs"] = map->post_fit_epochs;
    j["map"]["post_fit_lr"] = map->post_fit_lr;
  } else {
    j["map"] = nullptr;
  }
  return j;
}

RunConfig RunConfig::from_json(const nlohmann::json& j) {
  try {
    RunConfig c;
    c.method = method_from_string(j.value("method", std::string("gda")));
    if (j.contains("loss")) c.loss = LossSpec::from_json(j.at("loss"));
    if (j.contains("data")) c.data = DataSpec::from_json(j.at("data"));
    c.gamma = j.value("gamma", c.gamma);
    if (j.contains("solver")) c.solver = solver_from_json(j.at("solver"));
    c.theta0_scale = j.value("theta0_scale", c.theta0_scale);
    if (j.contains("theta0")) c.theta0 = j.at("theta0").get<std::vector<double>>();
    c.out_dir = j.value("out_dir", c.out_dir);
    c.checkpoint_every = j.value("checkpoint_every", c.checkpoint_every);
    if (j.contains("map") && !j.at("map").is_null()) {
      MapSpec m;
      nlohmann::json net = j.at("map");
      if (!net.contains("data_dim")) net["data_dim"] = 2;
      m.net = TransportNetConfig::from_json(net);
      m.post_fit_epochs = net.value("post_fit_epochs", Index{0});
      m.post_fit_lr = net.value("post_fit_lr", 0.0);
      c.map = m;
    }
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("bad config: ") + e.what());
  }
}

std::string config_hash(const RunConfig& cfg) {
  nlohmann::json j = cfg.to_json();
  for (const char* key : kRunControl) j.erase(key);
  j["solver"].erase("max_iters");
  j["solver"].erase("threads");
  const std::string s = j.dump();
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 1099511628211ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::unique_ptr<LossModel> make_loss(const LossSpec& spec, Index data_dim, Index num_classes) {
  if (spec.kind == "glm") return std::make_unique<losses::GlmRegressionLoss>(data_dim, spec.sigma_y);
  if (spec.kind == "classifier") {
    std::vector<Index> widths{data_dim};
    widths.insert(widths.end(), spec.hidden.begin(), spec.hidden.end());
    widths.push_back(num_classes);
    return std::make_unique<losses::ClassifierLoss>(nn::Mlp(widths), spec.weight_decay);
  }
  if (spec.kind == "quadratic") {
    Vec diag = Eigen::Map<const Vec>(spec.quad_diag.data(), static_cast<Index>(spec.quad_diag.size()));
    return std::make_unique<losses::QuadraticLoss>(losses::QuadraticLoss::diagonal(spec.param_dim, data_dim, diag));
  }
  if (spec.kind == "zero") return std::make_unique<losses::ZeroLoss>(spec.param_dim, data_dim);
  throw ConfigError("unknown loss kind '" + spec.kind + "'");
}

data::Dataset make_dataset(const DataSpec& spec) {
  if (!spec.path.empty()) return data::load(spec.path);
  if (spec.kind == "regression2d") return data::gen_regression_2d(spec.n, spec.seed, spec.sigma_y);
  if (spec.kind == "blobs")
    return data::gen_blobs(spec.n_per_class, data::circle_centers(spec.k, 2, spec.radius), spec.scale, spec.seed);
  throw ConfigError("unknown data kind '" + spec.kind + "'");
}

Vec initial_theta(const RunConfig& cfg, const LossModel& loss, const data::Dataset& data) {
  if (!cfg.theta0.empty()) {
    if (static_cast<Index>(cfg.theta0.size()) != loss.param_dim())
      throw ConfigError("theta0 has " + std::to_string(cfg.theta0.size()) + " entries, loss expects " +
                        std::to_string(loss.param_dim()));
    return Eigen::Map<const Vec>(cfg.theta0.data(), static_cast<Index>(cfg.theta0.size()));
  }
  if (const auto* clf = dynamic_cast<const losses::ClassifierLoss*>(&loss)) {
    nn::OptimConfig oc;
    oc.lr = cfg.loss.pretrain_lr;
    return losses::pretrain_classifier(*clf, data, cfg.loss.pretrain_steps, oc, cfg.solver.seed);
  }
  return random_theta(loss.param_dim(), cfg.theta0_scale, cfg.solver.seed);
}

nlohmann::json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open '" + path + "'");
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("'" + path + "': " + e.what());
  }
}

void write_json_file(const std::string& path, const nlohmann::json& j) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp);
    if (!out) throw ConfigError("cannot open '" + tmp + "' for writing");
    out << j.dump(2) << '\n';
    if (!out) throw ConfigError("write to '" + tmp + "' failed");
  }
  std::filesystem::rename(tmp, path);
}

}  // namespace wdro::cli
