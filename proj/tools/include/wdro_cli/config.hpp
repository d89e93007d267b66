#pragma once

// Resolved run configuration: method, loss, data source, solver settings and
// optional transport map, with JSON round-trip and validation.

#include "wdro/core.hpp"
#include "wdro/data.hpp"
#include "wdro/losses.hpp"
#include "wdro/transport_net.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace wdro::cli {

enum class Method { Gda, GdaMomentum, GdaAlternating, Elim, Ppm };

std::string to_string(Method m);
Method method_from_string(const std::string& s);

struct LossSpec {
  std::string kind = "glm";  ///< glm | classifier | quadratic | zero
  double sigma_y = 0.5;
  // classifier
  std::vector<Index> hidden{16, 16};
  double weight_decay = 1e-2;
  Index pretrain_steps = 2000;
  double pretrain_lr = 1e-2;
  // quadratic: l = 1/2 z^T diag(h) z, z = (theta, v), p = param_dim
  std::vector<double> quad_diag;
  Index param_dim = 1;

  nlohmann::json to_json() const;
  static LossSpec from_json(const nlohmann::json& j);
};

struct DataSpec {
  std::string path;                  ///< load from file when set
  std::string kind = "regression2d"; ///< regression2d | blobs
  Index n = 200;
  std::uint64_t seed = 0;
  double sigma_y = 0.5;
  Index k = 3;
  Index n_per_class = 100;
  double scale = 0.5;
  double radius = 1.7320508075688772;

  nlohmann::json to_json() const;
  static DataSpec from_json(const nlohmann::json& j);
};

struct MapSpec {
  TransportNetConfig net;
  /// Extra full-batch epochs on the final pairs after the solver stops.
  Index post_fit_epochs = 0;
  double post_fit_lr = 0.0;  ///< 0 keeps the training learning rate
};

struct RunConfig {
  Method method = Method::Gda;
  LossSpec loss;
  DataSpec data;
  double gamma = 0.5;
  SolverConfig solver;
  double theta0_scale = 0.5;
  std::vector<double> theta0;  ///< explicit init overrides theta0_scale
  std::optional<MapSpec> map;
  // run control, excluded from the config hash
  std::string out_dir = "run";
  Index checkpoint_every = 0;

  /// Method-specific checks; throws ConfigError.
  void validate() const;

  nlohmann::json to_json() const;
  static RunConfig from_json(const nlohmann::json& j);
};

/// FNV-1a over the config JSON without run-control fields.
std::string config_hash(const RunConfig& cfg);

/// Applies the method's fixed solver flags (alternating, default momentum).
void apply_method_defaults(RunConfig& cfg, bool momentum_given);

std::unique_ptr<LossModel> make_loss(const LossSpec& spec, Index data_dim, Index num_classes);
data::Dataset make_dataset(const DataSpec& spec);

/// theta0 per config; classifier losses are pretrained on the data.
Vec initial_theta(const RunConfig& cfg, const LossModel& loss, const data::Dataset& data);

nlohmann::json read_json_file(const std::string& path);
/// Writes via a temporary file and rename.
void write_json_file(const std::string& path, const nlohmann::json& j);

}  // namespace wdro::cli
