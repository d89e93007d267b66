#pragma once

// Minimal multilayer perceptron with hand-written reverse mode, plus the
// SGD-momentum and Adam optimizers used by the classifier loss and the
// neural transport map.
//
// Parameters live in one flat vector. Layer l occupies a row-major weight
// block (out_l x in_l) followed by its bias (out_l). Hidden layers use SiLU,
// the output layer is linear.

#include "wdro/core.hpp"
#include "wdro/rng.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <string>
#include <vector>

namespace wdro::nn {

double sigmoid(double z);
double silu(double z);
/// d/dz [z * sigmoid(z)] = s + z s (1 - s).
double silu_derivative(double z);

/// Activation record from one forward pass; sufficient for an exact backward.
struct Tape {
  const void* owner = nullptr;
  std::uint64_t revision = 0;
  std::vector<Vec> inputs;  ///< input to each layer (activations of the previous one)
  std::vector<Vec> pre;     ///< pre-activations of each layer
};

struct Gradients {
  Vec params;
  Vec input;
};

class Mlp {
 public:
  Mlp() = default;
  /// widths = {in, hidden..., out}; at least two entries.
  explicit Mlp(std::vector<Index> widths);

  const std::vector<Index>& widths() const { return widths_; }
  Index input_dim() const { return widths_.front(); }
  Index output_dim() const { return widths_.back(); }
  Index num_layers() const { return static_cast<Index>(widths_.size()) - 1; }
  Index num_params() const { return num_params_; }

  const Vec& params() const { return params_; }
  /// Mutable access invalidates outstanding tapes.
  Vec& mutable_params() {
    ++revision_;
    return params_;
  }
  void set_params(const Vec& p);

  /// Uniform He-style fan-in init for every layer; the final layer is
  /// zeroed when zero_final is set. Biases start at zero.
  void init(CounterRng& rng, bool zero_final);

  Vec forward(VecView input, Tape& tape) const;
  Gradients backward(const Tape& tape, VecView output_grad) const;
  Vec predict(VecView input) const;

  /// Stateless variants evaluating the architecture at external parameters.
  Vec forward_with(VecView params, VecView input, Tape& tape) const;
  Gradients backward_with(VecView params, const Tape& tape, VecView output_grad) const;

  Index weight_offset(Index layer) const { return offsets_[static_cast<std::size_t>(layer)]; }
  Index bias_offset(Index layer) const;

  /// {"fc0.weight": [[...], ...], "fc0.bias": [...], ...}
  nlohmann::json to_json() const;
  void load_json(const nlohmann::json& j);

 private:
  void load_json_impl(const nlohmann::json& j);
  Vec forward_impl(VecView params, VecView input, Tape& tape, const void* owner,
                   std::uint64_t revision) const;
  Gradients backward_impl(VecView params, const Tape& tape, VecView output_grad) const;

  std::vector<Index> widths_;
  std::vector<Index> offsets_;
  Index num_params_ = 0;
  Vec params_;
  std::uint64_t revision_ = 1;
};

enum class OptimKind { SgdMomentum, Adam };

struct OptimConfig {
  OptimKind kind = OptimKind::Adam;
  double lr = 1e-3;
  double momentum = 0.0;  ///< SGD-momentum coefficient
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.0;  ///< decoupled: p <- p - lr * wd * p
};

std::string to_string(OptimKind k);
OptimKind optim_kind_from_string(const std::string& s);

class Optimizer {
 public:
  Optimizer() = default;
  Optimizer(OptimConfig cfg, Index num_params);

  void step(Vec& params, VecView grads);

  const OptimConfig& config() const { return cfg_; }
  Index steps() const { return steps_; }

  nlohmann::json to_json() const;
  void load_json(const nlohmann::json& j);

 private:
  OptimConfig cfg_;
  Index steps_ = 0;
  Vec first_;   ///< SGD velocity or Adam first moment
  Vec second_;  ///< Adam second moment
};

nlohmann::json vec_to_json(const Vec& v);
Vec vec_from_json(const nlohmann::json& j);

}  // namespace wdro::nn
