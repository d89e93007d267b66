#include <doctest.h>

#include "wdro_cli/commands.hpp"
#include "wdro_cli/config.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <sstream>
#include <string>
#include <sys/wait.h>

using namespace wdro;
using namespace wdro::cli;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / "wdro_test_cli" / name;
  fs::remove_all(p);
  fs::create_directories(p.parent_path());
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::size_t count_lines(const fs::path& p) {
  const std::string s = slurp(p);
  return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n'));
}

RunConfig small_glm(const fs::path& out, Index n = 60) {
  RunConfig c;
  c.data.n = n;
  c.data.seed = 1;
  c.out_dir = out.string();
  c.solver.max_iters = 5000;
  return c;
}

int run_binary(const std::string& args) {
  const std::string cmd = std::string(WDRO_BIN) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST_CASE("method names") {
  for (Method m : {Method::Gda, Method::GdaMomentum, Method::GdaAlternating, Method::Elim, Method::Ppm})
    CHECK(method_from_string(to_string(m)) == m);
  CHECK_THROWS_AS(method_from_string("sgd"), ConfigError);
}

TEST_CASE("config json round trip and hash") {
  RunConfig c = small_glm("a");
  c.method = Method::GdaMomentum;
  c.solver.momentum = 0.7;
  c.map = MapSpec{};
  c.map->net.sub_batch = 50;
  const RunConfig back = RunConfig::from_json(nlohmann::json::parse(c.to_json().dump()));
  CHECK(back.to_json() == c.to_json());
  CHECK(config_hash(back) == config_hash(c));
  RunConfig moved = c;
  moved.out_dir = "elsewhere";
  moved.solver.max_iters = 7;
  CHECK(config_hash(moved) == config_hash(c));
  moved.gamma = 1.0;
  CHECK(config_hash(moved) != config_hash(c));
}

TEST_CASE("method specific validation") {
  RunConfig c = small_glm("v");
  CHECK_NOTHROW(c.validate());
  c.solver.momentum = 0.5;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c.method = Method::GdaMomentum;
  CHECK_NOTHROW(c.validate());
  c.method = Method::Ppm;
  c.solver.momentum = 0.0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c.solver.ppm_s = 0.5;
  c.solver.eta = 0.25;
  CHECK_NOTHROW(c.validate());
  c.loss.kind = "hinge";
  CHECK_THROWS_AS(c.validate(), ConfigError);
}

TEST_CASE("method defaults") {
  RunConfig c;
  c.method = Method::GdaMomentum;
  apply_method_defaults(c, false);
  CHECK(c.solver.momentum == 0.7);
  RunConfig a;
  a.method = Method::GdaAlternating;
  apply_method_defaults(a, false);
  CHECK(a.solver.alternating);
}

TEST_CASE("gen-data refuses to overwrite") {
  const fs::path dir = scratch("gen");
  fs::create_directories(dir);
  GenDataOptions o;
  o.spec.kind = "blobs";
  o.spec.n_per_class = 20;
  o.out = (dir / "blobs.csv").string();
  std::ostringstream log;
  CHECK(cmd_gen_data(o, log) == kExitOk);
  CHECK(count_lines(o.out) == 61);
  CHECK_THROWS_AS(cmd_gen_data(o, log), UsageError);
  o.force = true;
  CHECK(cmd_gen_data(o, log) == kExitOk);
  const auto ds = data::load(o.out);
  CHECK(ds.num_classes() == 3);
}

TEST_CASE("solve writes the run directory") {
  const fs::path dir = scratch("solve");
  std::ostringstream log;
  CHECK(cmd_solve(small_glm(dir), {}, log) == kExitOk);
  for (const char* f : {"config.json", "log.csv", "checkpoint.json", "summary.json"}) CHECK(fs::exists(dir / f));
  const auto summary = read_json_file((dir / "summary.json").string());
  CHECK(summary.at("converged").get<bool>());
  CHECK(count_lines(dir / "log.csv") == summary.at("iterations").get<std::size_t>() + 1);
  CHECK_THROWS_AS(cmd_solve(small_glm(dir), {}, log), UsageError);
}

TEST_CASE("zero iterations gives an empty log and not-converged status") {
  const fs::path dir = scratch("zero");
  RunConfig c = small_glm(dir);
  c.solver.max_iters = 0;
  std::ostringstream log;
  CHECK(cmd_solve(c, {}, log) == kExitNotConverged);
  CHECK(count_lines(dir / "log.csv") == 1);
  CHECK_FALSE(read_json_file((dir / "summary.json").string()).at("converged").get<bool>());
  SolveFlags allow;
  allow.force = true;
  allow.allow_max_iters = true;
  CHECK(cmd_solve(c, allow, log) == kExitOk);
}

TEST_CASE("elim counts more gradient evaluations than iterations") {
  const fs::path dir = scratch("elim");
  RunConfig c = small_glm(dir);
  c.method = Method::Elim;
  std::ostringstream log;
  REQUIRE(cmd_solve(c, {}, log) == kExitOk);
  const auto s = read_json_file((dir / "summary.json").string());
  CHECK(s.at("nge_total").get<Index>() > s.at("iterations").get<Index>());
  const std::string header = slurp(dir / "log.csv").substr(0, 200);
  CHECK(header.find("nge_batch_max") != std::string::npos);
}

TEST_CASE("divergence writes a summary and exits 3") {
  const fs::path dir = scratch("div");
  RunConfig c = small_glm(dir);
  c.loss.kind = "quadratic";
  c.loss.quad_diag = {1.0, 10.0, 10.0};
  c.solver.eta = 1.0;
  std::ostringstream log;
  CHECK(cmd_solve(c, {}, log) == kExitDiverged);
  const auto s = read_json_file((dir / "summary.json").string());
  REQUIRE(s.contains("diverged"));
  CHECK(s.at("diverged").contains("iteration"));
}

TEST_CASE("resume reproduces an uninterrupted run bitwise") {
  const fs::path full = scratch("full");
  const fs::path part = scratch("part");
  RunConfig c = small_glm(full);
  c.method = Method::GdaMomentum;
  c.solver.momentum = 0.7;
  c.solver.batch_size = 20;
  c.solver.max_iters = 300;
  c.checkpoint_every = 25;
  c.map = MapSpec{};
  c.map->net.sub_batch = 10;
  std::ostringstream log;
  SolveFlags allow;
  allow.allow_max_iters = true;
  REQUIRE(cmd_solve(c, allow, log) == kExitOk);

  RunConfig first = c;
  first.out_dir = part.string();
  first.solver.max_iters = 120;
  REQUIRE(cmd_solve(first, allow, log) == kExitOk);
  RunConfig rest = c;
  rest.out_dir = part.string();
  SolveFlags resume = allow;
  resume.resume = true;
  REQUIRE(cmd_solve(rest, resume, log) == kExitOk);
  CHECK(slurp(full / "log.csv") == slurp(part / "log.csv"));
  const auto a = read_checkpoint(full.string());
  const auto b = read_checkpoint(part.string());
  CHECK(a.state.v == b.state.v);
  CHECK(a.state.theta == b.state.theta);
  CHECK(a.map->params() == b.map->params());

  RunConfig other = rest;
  other.gamma = 1.0;
  CHECK_THROWS_AS(cmd_solve(other, resume, log), UsageError);
}

TEST_CASE("eval and trajectories") {
  const fs::path dir = scratch("eval");
  RunConfig c = small_glm(dir, 100);
  c.map = MapSpec{};
  std::ostringstream log;
  REQUIRE(cmd_solve(c, {}, log) == kExitOk);
  EvalOptions e;
  e.run_dir = dir.string();
  e.traj_samples = {0, 3};
  REQUIRE(cmd_eval(e, log) == kExitOk);
  const auto rep = read_json_file((dir / "eval.json").string());
  CHECK(rep.at("train_mse").get<double>() >= 0.0);
  CHECK(count_lines(dir / "traj.csv") == 23);

  const fs::path train_file = dir / "train.csv";
  data::save(make_dataset(c.data), train_file);
  EvalOptions same = e;
  same.test_data = train_file.string();
  same.traj_samples.clear();
  same.out = (dir / "same.json").string();
  REQUIRE(cmd_eval(same, log) == kExitOk);
  const auto s = read_json_file(same.out);
  CHECK(s.at("train_mse").get<double>() == s.at("test_mse").get<double>());

  ExportTrajOptions t;
  t.run_dir = dir.string();
  t.samples = {1};
  t.steps = 4;
  t.out = (dir / "t.csv").string();
  REQUIRE(cmd_export_traj(t, log) == kExitOk);
  CHECK(count_lines(t.out) == 6);
}

TEST_CASE("eval without a map is a usage error") {
  const fs::path dir = scratch("nomap");
  std::ostringstream log;
  REQUIRE(cmd_solve(small_glm(dir), {}, log) == kExitOk);
  EvalOptions e;
  e.run_dir = dir.string();
  CHECK_THROWS_AS(cmd_eval(e, log), UsageError);
}

TEST_CASE("probe writes the assumption report") {
  const fs::path dir = scratch("probe");
  fs::create_directories(dir);
  ProbeOptions p;
  p.cfg.loss.kind = "zero";
  p.cfg.data.n = 30;
  p.ranges.smoothness_probes = 50;
  p.out = (dir / "probe.json").string();
  std::ostringstream log;
  REQUIRE(cmd_probe(p, log) == kExitOk);
  const auto rep = read_json_file(p.out);
  CHECK(rep.at("eb_T_ratio_min").get<double>() == doctest::Approx(2.0).epsilon(1e-6));
}

TEST_CASE("the executable reports exit codes") {
  const fs::path dir = scratch("bin");
  const std::string out = " --out " + dir.string();
  CHECK(run_binary("solve --n 40 --max-iters 0" + out) == kExitNotConverged);
  CHECK(run_binary("solve --n 40 --max-iters 0 --force --allow-max-iters" + out) == kExitOk);
  CHECK(run_binary("solve --method ppm --n 40 --force" + out) == kExitError);
  CHECK(run_binary("no-such-command") != kExitOk);
}
