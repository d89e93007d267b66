#include "wdro/transport_net.hpp"

#include "wdro/rng.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace wdro {

std::vector<Index> TransportNetConfig::resolved_hidden() const {
  if (default_hidden && hidden.empty()) return {2 * data_dim, 2 * data_dim};
  return hidden;
}

Index TransportNetConfig::resolved_embed_width() const {
  if (num_classes <= 1) return 0;
  if (embed_width >= 0) return embed_width;
  const auto h = resolved_hidden();
  return h.empty() ? data_dim : h.front();
}

nlohmann::json TransportNetConfig::to_json() const {
  return {{"data_dim", data_dim},
          {"num_classes", num_classes},
          {"hidden", resolved_hidden()},
          {"embed_width", resolved_embed_width()},
          {"optimizer", to_string(optim.kind)},
          {"lr", optim.lr},
          {"momentum", optim.momentum},
          {"beta1", optim.beta1},
          {"beta2", optim.beta2},
          {"eps", optim.eps},
          {"weight_decay", optim.weight_decay},
          {"sub_batch", sub_batch},
          {"epochs_per_batch", epochs_per_batch},
          {"seed", seed}};
}

TransportNetConfig TransportNetConfig::from_json(const nlohmann::json& j) {
  TransportNetConfig c;
  c.data_dim = j.at("data_dim").get<Index>();
  c.num_classes = j.value("num_classes", Index{1});
  if (j.contains("hidden")) {
    c.hidden = j.at("hidden").get<std::vector<Index>>();
    c.default_hidden = false;
  }
  c.embed_width = j.value("embed_width", Index{-1});
  c.optim.kind = nn::optim_kind_from_string(j.value("optimizer", std::string("adam")));
  c.optim.lr = j.value("lr", c.optim.lr);
  c.optim.momentum = j.value("momentum", c.optim.momentum);
  c.optim.beta1 = j.value("beta1", c.optim.beta1);
  c.optim.beta2 = j.value("beta2", c.optim.beta2);
  c.optim.eps = j.value("eps", c.optim.eps);
  c.optim.weight_decay = j.value("weight_decay", c.optim.weight_decay);
  c.sub_batch = j.value("sub_batch", Index{0});
  c.epochs_per_batch = j.value("epochs_per_batch", Index{1});
  c.seed = j.value("seed", std::uint64_t{0});
  return c;
}

TransportNet::TransportNet(const TransportNetConfig& cfg) : cfg_(cfg) {
  if (cfg_.data_dim < 1) throw ConfigError("transport net: data_dim must be positive");
  if (cfg_.num_classes < 1) throw ConfigError("transport net: num_classes must be >= 1");
  if (cfg_.sub_batch < 0) throw ConfigError("transport net: sub_batch must be nonnegative");
  if (cfg_.epochs_per_batch < 1) throw ConfigError("transport net: epochs_per_batch must be >= 1");
  embed_width_ = cfg_.resolved_embed_width();
  std::vector<Index> widths{cfg_.data_dim + embed_width_};
  for (Index w : cfg_.resolved_hidden()) widths.push_back(w);
  widths.push_back(cfg_.data_dim);
  residual_ = nn::Mlp(widths);

  CounterRng rng(cfg_.seed, streams::kTransportNet);
  residual_.init(rng, /*zero_final=*/true);
  embeddings_ = Particles::Zero(cfg_.num_classes, embed_width_);
  for (Index k = 0; k < embeddings_.rows(); ++k)
    for (Index j = 0; j < embeddings_.cols(); ++j) embeddings_(k, j) = rng.normal();
  optim_ = nn::Optimizer(cfg_.optim, num_params());
}

void TransportNet::check_label(Label y) const {
  if (static_cast<Index>(y) >= cfg_.num_classes)
    throw UsageError("transport net: class index " + std::to_string(y) + " out of range");
}

Vec TransportNet::net_input(VecView x, Label y) const {
  if (x.size() != cfg_.data_dim) throw ConfigError("transport net: input dimension mismatch");
  check_label(y);
  if (embed_width_ == 0) return x;
  Vec in(cfg_.data_dim + embed_width_);
  in.head(cfg_.data_dim) = x;
  in.tail(embed_width_) = embeddings_.row(static_cast<Index>(y)).transpose();
  return in;
}

Vec TransportNet::apply(VecView x, Label y) const {
  return x + residual_.predict(net_input(x, y));
}

double TransportNet::matching_loss(const TeacherPairs& pairs) const {
  if (pairs.size() == 0) throw UsageError("matching loss on an empty batch");
  double total = 0.0;
  for (Index i = 0; i < pairs.size(); ++i)
    total += (apply(pairs.x.row(i).transpose(), pairs.label(i)) - pairs.v.row(i).transpose()).squaredNorm();
  return total / static_cast<double>(pairs.size());
}

Vec TransportNet::matching_grad(const TeacherPairs& pairs, std::span<const Index> indices) const {
  if (indices.empty()) throw UsageError("matching gradient on an empty batch");
  const Index np = residual_.num_params();
  Vec grad = Vec::Zero(num_params());
  const double scale = 2.0 / static_cast<double>(indices.size());
  nn::Tape tape;
  for (Index i : indices) {
    const Label y = pairs.label(i);
    const Vec in = net_input(pairs.x.row(i).transpose(), y);
    const Vec r = residual_.forward(in, tape);
    const Vec diff = pairs.x.row(i).transpose() + r - pairs.v.row(i).transpose();
    nn::Gradients g = residual_.backward(tape, scale * diff);
    grad.head(np) += g.params;
    if (embed_width_ > 0) {
      grad.segment(np + static_cast<Index>(y) * embed_width_, embed_width_) += g.input.tail(embed_width_);
    }
  }
  return grad;
}

double TransportNet::matching_update(const TeacherPairs& pairs, Index sub_batch) {
  const Index m = pairs.size();
  if (m == 0) throw UsageError("matching update on an empty batch");
  if (sub_batch == 0) sub_batch = cfg_.sub_batch;
  if (sub_batch <= 0 || sub_batch > m) sub_batch = m;
  const double before = matching_loss(pairs);

  std::vector<Index> order(static_cast<std::size_t>(m));
  std::iota(order.begin(), order.end(), Index{0});
  Vec p = params();
  for (Index epoch = 0; epoch < cfg_.epochs_per_batch; ++epoch) {
    for (Index start = 0; start < m; start += sub_batch) {
      const Index len = std::min(sub_batch, m - start);
      const Vec g = matching_grad(pairs, std::span<const Index>(order.data() + start, static_cast<std::size_t>(len)));
      optim_.step(p, g);
      set_params(p);
    }
  }
  return before;
}

Vec TransportNet::params() const {
  Vec p(num_params());
  p.head(residual_.num_params()) = residual_.params();
  p.tail(embeddings_.size()) = Eigen::Map<const Vec>(embeddings_.data(), embeddings_.size());
  return p;
}

void TransportNet::set_params(const Vec& p) {
  if (p.size() != num_params()) throw ConfigError("transport net: parameter size mismatch");
  residual_.set_params(p.head(residual_.num_params()));
  Eigen::Map<Vec>(embeddings_.data(), embeddings_.size()) = p.tail(embeddings_.size());
}

nlohmann::json TransportNet::to_json() const {
  nlohmann::json j;
  j["config"] = cfg_.to_json();
  j["layers"] = residual_.to_json();
  nlohmann::json emb = nlohmann::json::array();
  for (Index k = 0; k < embeddings_.rows(); ++k) {
    nlohmann::json row = nlohmann::json::array();
    for (Index c = 0; c < embeddings_.cols(); ++c) row.push_back(embeddings_(k, c));
    emb.push_back(std::move(row));
  }
  j["layers"]["embedding"] = std::move(emb);
  j["optimizer_state"] = optim_.to_json();
  return j;
}

TransportNet TransportNet::from_json(const nlohmann::json& j) {
  TransportNet net(TransportNetConfig::from_json(j.at("config")));
  net.residual_.load_json(j.at("layers"));
  const auto& emb = j.at("layers").at("embedding");
  if (static_cast<Index>(emb.size()) != net.embeddings_.rows())
    throw ParseError("transport net checkpoint: embedding table has the wrong shape");
  for (Index k = 0; k < net.embeddings_.rows(); ++k) {
    const auto& row = emb.at(static_cast<std::size_t>(k));
    if (static_cast<Index>(row.size()) != net.embeddings_.cols())
      throw ParseError("transport net checkpoint: embedding table has the wrong shape");
    for (Index c = 0; c < net.embeddings_.cols(); ++c) net.embeddings_(k, c) = row.at(static_cast<std::size_t>(c)).get<double>();
  }
  net.optim_.load_json(j.at("optimizer_state"));
  return net;
}

GeneralizationReport evaluate_generalization(const TransportNet& net, const TeacherPairs& train,
                                             const TeacherPairs& test) {
  return {net.matching_loss(train), net.matching_loss(test)};
}

TeacherPairs nearest_neighbor_targets(const TeacherPairs& train, const Particles& test_x,
                                      const std::vector<Label>& test_y, NeighborTarget mode) {
  if (train.size() == 0) throw UsageError("nearest neighbour targets need training pairs");
  TeacherPairs out;
  out.x = test_x;
  out.y = test_y;
  out.v.resize(test_x.rows(), test_x.cols());
  for (Index t = 0; t < test_x.rows(); ++t) {
    const Label y = test_y.empty() ? 0 : test_y[static_cast<std::size_t>(t)];
    Index best = -1;
    double best_d = std::numeric_limits<double>::infinity();
    for (Index i = 0; i < train.size(); ++i) {
      if (train.label(i) != y) continue;
      const double d = (train.x.row(i) - test_x.row(t)).squaredNorm();
      if (d < best_d) {
        best_d = d;
        best = i;
      }
    }
    if (best < 0) throw UsageError("no training sample shares class " + std::to_string(y));
    if (mode == NeighborTarget::Particle || best_d == 0.0) {
      out.v.row(t) = train.v.row(best);
    } else {
      out.v.row(t) = test_x.row(t) + (train.v.row(best) - train.x.row(best));
    }
  }
  return out;
}

Particles interpolation_trajectory(const TransportNet& net, VecView x, Label y, Index steps) {
  if (steps < 1) throw UsageError("trajectory needs at least one step");
  const Vec tx = net.apply(x, y);
  Particles traj(steps + 1, x.size());
  for (Index j = 0; j <= steps; ++j) {
    if (j == steps) {
      traj.row(j) = tx.transpose();
    } else {
      const double a = static_cast<double>(j) / static_cast<double>(steps);
      traj.row(j) = (x + a * (tx - x)).transpose();
    }
  }
  return traj;
}

}  // namespace wdro
