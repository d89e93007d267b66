#pragma once

// Neural transport map T(x) = x + R([x; e_y]) trained by the L2 matching loss
// against particle solutions. With a zero final layer, T starts as the
// identity on every input.

#include "wdro/core.hpp"
#include "wdro/nn.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <span>
#include <vector>

namespace wdro {

/// Teacher pairs (x_i, v_i, y_i) for one batch.
struct TeacherPairs {
  Particles x;
  Particles v;
  std::vector<Label> y;  ///< empty means all zero
  Index size() const { return x.rows(); }
  Label label(Index i) const { return y.empty() ? 0 : y[static_cast<std::size_t>(i)]; }
};

struct TransportNetConfig {
  Index data_dim = 2;
  Index num_classes = 1;
  /// Hidden widths; empty with default_hidden set means two layers of 2d.
  std::vector<Index> hidden;
  bool default_hidden = true;
  /// -1 picks the first hidden width when num_classes > 1, else 0.
  Index embed_width = -1;
  nn::OptimConfig optim{nn::OptimKind::Adam, 1e-4, 0.0, 0.9, 0.999, 1e-8, 1e-5};
  /// Optimizer sub-batch size m'; 0 means the whole batch.
  Index sub_batch = 0;
  /// Passes over each teacher batch per call to matching_update.
  Index epochs_per_batch = 1;
  std::uint64_t seed = 0;

  std::vector<Index> resolved_hidden() const;
  Index resolved_embed_width() const;

  nlohmann::json to_json() const;
  static TransportNetConfig from_json(const nlohmann::json& j);
};

class TransportNet {
 public:
  explicit TransportNet(const TransportNetConfig& cfg);

  const TransportNetConfig& config() const { return cfg_; }
  Index data_dim() const { return cfg_.data_dim; }
  Index num_classes() const { return cfg_.num_classes; }
  Index embed_width() const { return embed_width_; }
  const nn::Mlp& residual_net() const { return residual_; }

  /// x + R([x; e_y]).
  Vec apply(VecView x, Label y) const;

  /// Mean of |T(x_i) - v_i|^2 over the pairs.
  double matching_loss(const TeacherPairs& pairs) const;

  /// Gradient of the mean matching loss over pairs[indices] w.r.t. params().
  Vec matching_grad(const TeacherPairs& pairs, std::span<const Index> indices) const;

  /// Optimizer steps over consecutive disjoint sub-batches of size m'
  /// (ceil(m / m') per epoch). Returns the pre-update mean loss on the batch.
  double matching_update(const TeacherPairs& pairs, Index sub_batch = 0);

  /// Flat parameters: residual net followed by the K x e embedding table (row-major).
  Vec params() const;
  void set_params(const Vec& p);
  Index num_params() const { return residual_.num_params() + embeddings_.size(); }

  const nn::Optimizer& optimizer() const { return optim_; }

  nlohmann::json to_json() const;
  static TransportNet from_json(const nlohmann::json& j);

 private:
  Vec net_input(VecView x, Label y) const;
  void check_label(Label y) const;

  TransportNetConfig cfg_;
  Index embed_width_ = 0;
  nn::Mlp residual_;
  Particles embeddings_;  ///< K x e
  nn::Optimizer optim_;
};

struct GeneralizationReport {
  double train_mse = 0.0;
  double test_mse = 0.0;
  double ratio() const { return train_mse > 0.0 ? test_mse / train_mse : (test_mse > 0.0 ? INFINITY : 1.0); }
};

GeneralizationReport evaluate_generalization(const TransportNet& net, const TeacherPairs& train,
                                             const TeacherPairs& test);

/// How the nearest training neighbour's particle becomes a test target.
enum class NeighborTarget {
  Particle,      ///< target = v_j
  Displacement,  ///< target = x' + (v_j - x_j): transfer the neighbour's trajectory
};

/// Builds oracle targets for test inputs from the nearest same-class training
/// sample (brute force).
TeacherPairs nearest_neighbor_targets(const TeacherPairs& train, const Particles& test_x,
                                      const std::vector<Label>& test_y, NeighborTarget mode);

/// J + 1 points x + (j / J) (T(x) - x), j = 0..J.
Particles interpolation_trajectory(const TransportNet& net, VecView x, Label y, Index steps);

}  // namespace wdro
