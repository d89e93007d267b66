#include "wdro/nn.hpp"

#include <cmath>

namespace wdro::nn {

double sigmoid(double z) {
  if (z >= 0.0) {
    const double e = std::exp(-z);
    return 1.0 / (1.0 + e);
  }
  const double e = std::exp(z);
  return e / (1.0 + e);
}

double silu(double z) { return z * sigmoid(z); }

double silu_derivative(double z) {
  const double s = sigmoid(z);
  return s + z * s * (1.0 - s);
}

Mlp::Mlp(std::vector<Index> widths) : widths_(std::move(widths)) {
  if (widths_.size() < 2) throw ConfigError("Mlp needs at least input and output widths");
  for (Index w : widths_)
    if (w <= 0) throw ConfigError("Mlp layer widths must be positive");
  Index offset = 0;
  for (std::size_t l = 0; l + 1 < widths_.size(); ++l) {
    offsets_.push_back(offset);
    offset += widths_[l + 1] * widths_[l] + widths_[l + 1];
  }
  num_params_ = offset;
  params_ = Vec::Zero(num_params_);
}

Index Mlp::bias_offset(Index layer) const {
  const auto l = static_cast<std::size_t>(layer);
  return offsets_[l] + widths_[l + 1] * widths_[l];
}

void Mlp::set_params(const Vec& p) {
  if (p.size() != num_params_) throw ConfigError("Mlp::set_params: size mismatch");
  mutable_params() = p;
}

void Mlp::init(CounterRng& rng, bool zero_final) {
  Vec& p = mutable_params();
  p.setZero();
  for (Index l = 0; l < num_layers(); ++l) {
    if (zero_final && l + 1 == num_layers()) break;
    const Index in = widths_[static_cast<std::size_t>(l)];
    const Index out = widths_[static_cast<std::size_t>(l) + 1];
    const double bound = std::sqrt(6.0 / static_cast<double>(in));
    const Index off = weight_offset(l);
    for (Index i = 0; i < out * in; ++i) p[off + i] = rng.uniform(-bound, bound);
  }
}

Vec Mlp::forward(VecView input, Tape& tape) const {
  return forward_impl(params_, input, tape, this, revision_);
}

Gradients Mlp::backward(const Tape& tape, VecView output_grad) const {
  if (tape.owner != this || tape.revision != revision_)
    throw UsageError("Mlp::backward: tape is stale or from another network");
  return backward_impl(params_, tape, output_grad);
}

Vec Mlp::predict(VecView input) const {
  Tape tape;
  return forward(input, tape);
}

Vec Mlp::forward_with(VecView params, VecView input, Tape& tape) const {
  if (params.size() != num_params_) throw ConfigError("Mlp::forward_with: parameter size mismatch");
  return forward_impl(params, input, tape, params.data(), 0);
}

Gradients Mlp::backward_with(VecView params, const Tape& tape, VecView output_grad) const {
  if (tape.owner != params.data() || tape.revision != 0)
    throw UsageError("Mlp::backward_with: tape was recorded with different parameters");
  return backward_impl(params, tape, output_grad);
}

Vec Mlp::forward_impl(VecView params, VecView input, Tape& tape, const void* owner,
                      std::uint64_t revision) const {
  if (input.size() != input_dim())
    throw ConfigError("Mlp::forward: input has dimension " + std::to_string(input.size()) +
                      ", expected " + std::to_string(input_dim()));
  const auto layers = static_cast<std::size_t>(num_layers());
  tape.owner = owner;
  tape.revision = revision;
  tape.inputs.resize(layers);
  tape.pre.resize(layers);

  Vec act = input;
  for (std::size_t l = 0; l < layers; ++l) {
    const Index in = widths_[l];
    const Index out = widths_[l + 1];
    Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> w(
        params.data() + offsets_[l], out, in);
    Eigen::Map<const Vec> b(params.data() + offsets_[l] + out * in, out);
    tape.inputs[l] = act;
    tape.pre[l].noalias() = w * act;
    tape.pre[l] += b;
    if (l + 1 < layers) {
      act = tape.pre[l].unaryExpr([](double z) { return silu(z); });
    } else {
      act = tape.pre[l];
    }
  }
  return act;
}

Gradients Mlp::backward_impl(VecView params, const Tape& tape, VecView output_grad) const {
  const auto layers = static_cast<std::size_t>(num_layers());
  if (tape.pre.size() != layers) throw UsageError("Mlp::backward: tape does not match network");
  if (output_grad.size() != output_dim()) throw ConfigError("Mlp::backward: output_grad size mismatch");

  Gradients g;
  g.params = Vec::Zero(num_params_);
  Vec delta = output_grad;  // gradient w.r.t. pre-activation of layer l
  for (std::size_t l = layers; l-- > 0;) {
    const Index in = widths_[l];
    const Index out = widths_[l + 1];
    if (l + 1 < layers) {
      for (Index i = 0; i < out; ++i) delta[i] *= silu_derivative(tape.pre[l][i]);
    }
    Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> gw(
        g.params.data() + offsets_[l], out, in);
    Eigen::Map<Vec> gb(g.params.data() + offsets_[l] + out * in, out);
    gw.noalias() = delta * tape.inputs[l].transpose();
    gb = delta;
    Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> w(
        params.data() + offsets_[l], out, in);
    Vec next = w.transpose() * delta;
    delta = std::move(next);
  }
  g.input = std::move(delta);
  return g;
}

nlohmann::json Mlp::to_json() const {
  nlohmann::json j = nlohmann::json::object();
  j["widths"] = widths_;
  for (Index l = 0; l < num_layers(); ++l) {
    const Index in = widths_[static_cast<std::size_t>(l)];
    const Index out = widths_[static_cast<std::size_t>(l) + 1];
    nlohmann::json rows = nlohmann::json::array();
    for (Index r = 0; r < out; ++r) {
      nlohmann::json row = nlohmann::json::array();
      for (Index c = 0; c < in; ++c) row.push_back(params_[weight_offset(l) + r * in + c]);
      rows.push_back(std::move(row));
    }
    const std::string name = "fc" + std::to_string(l);
    j[name + ".weight"] = std::move(rows);
    nlohmann::json bias = nlohmann::json::array();
    for (Index r = 0; r < out; ++r) bias.push_back(params_[bias_offset(l) + r]);
    j[name + ".bias"] = std::move(bias);
  }
  return j;
}

void Mlp::load_json(const nlohmann::json& j) {
  try {
    load_json_impl(j);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("checkpoint network: ") + e.what());
  }
}

void Mlp::load_json_impl(const nlohmann::json& j) {
  *this = Mlp(j.at("widths").get<std::vector<Index>>());
  Vec& p = mutable_params();
  for (Index l = 0; l < num_layers(); ++l) {
    const Index in = widths_[static_cast<std::size_t>(l)];
    const Index out = widths_[static_cast<std::size_t>(l) + 1];
    const std::string name = "fc" + std::to_string(l);
    const auto& rows = j.at(name + ".weight");
    const auto& bias = j.at(name + ".bias");
    if (static_cast<Index>(rows.size()) != out || static_cast<Index>(bias.size()) != out)
      throw ParseError("checkpoint layer " + name + " has the wrong shape");
    for (Index r = 0; r < out; ++r) {
      const auto& row = rows.at(static_cast<std::size_t>(r));
      if (static_cast<Index>(row.size()) != in)
        throw ParseError("checkpoint layer " + name + " has the wrong shape");
      for (Index c = 0; c < in; ++c) p[weight_offset(l) + r * in + c] = row.at(static_cast<std::size_t>(c)).get<double>();
      p[bias_offset(l) + r] = bias.at(static_cast<std::size_t>(r)).get<double>();
    }
  }
}

// ---------------------------------------------------------------------------

std::string to_string(OptimKind k) { return k == OptimKind::Adam ? "adam" : "sgd-momentum"; }

OptimKind optim_kind_from_string(const std::string& s) {
  if (s == "adam") return OptimKind::Adam;
  if (s == "sgd-momentum" || s == "sgd") return OptimKind::SgdMomentum;
  throw ConfigError("unknown optimizer '" + s + "'");
}

Optimizer::Optimizer(OptimConfig cfg, Index num_params)
    : cfg_(cfg), first_(Vec::Zero(num_params)), second_(Vec::Zero(num_params)) {
  if (!(cfg_.lr > 0.0)) throw ConfigError("optimizer learning rate must be positive");
  if (cfg_.weight_decay < 0.0) throw ConfigError("weight decay must be nonnegative");
}

void Optimizer::step(Vec& params, VecView grads) {
  if (params.size() != first_.size() || grads.size() != first_.size())
    throw ConfigError("Optimizer::step: shape mismatch");
  ++steps_;
  if (cfg_.weight_decay > 0.0) params -= (cfg_.lr * cfg_.weight_decay) * params;
  if (cfg_.kind == OptimKind::SgdMomentum) {
    if (cfg_.momentum == 0.0) {
      params -= cfg_.lr * grads;
      return;
    }
    first_ = cfg_.momentum * first_ + grads;
    params -= cfg_.lr * first_;
    return;
  }
  first_ = cfg_.beta1 * first_ + (1.0 - cfg_.beta1) * grads;
  second_ = cfg_.beta2 * second_ + (1.0 - cfg_.beta2) * grads.cwiseProduct(grads);
  const double t = static_cast<double>(steps_);
  const double c1 = 1.0 - std::pow(cfg_.beta1, t);
  const double c2 = 1.0 - std::pow(cfg_.beta2, t);
  for (Index i = 0; i < params.size(); ++i) {
    const double mhat = first_[i] / c1;
    const double vhat = second_[i] / c2;
    params[i] -= cfg_.lr * mhat / (std::sqrt(vhat) + cfg_.eps);
  }
}

nlohmann::json vec_to_json(const Vec& v) {
  nlohmann::json a = nlohmann::json::array();
  for (Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

Vec vec_from_json(const nlohmann::json& j) {
  Vec v(static_cast<Index>(j.size()));
  for (Index i = 0; i < v.size(); ++i) v[i] = j.at(static_cast<std::size_t>(i)).get<double>();
  return v;
}

nlohmann::json Optimizer::to_json() const {
  return {{"kind", to_string(cfg_.kind)},
          {"lr", cfg_.lr},
          {"momentum", cfg_.momentum},
          {"beta1", cfg_.beta1},
          {"beta2", cfg_.beta2},
          {"eps", cfg_.eps},
          {"weight_decay", cfg_.weight_decay},
          {"steps", steps_},
          {"first", vec_to_json(first_)},
          {"second", vec_to_json(second_)}};
}

void Optimizer::load_json(const nlohmann::json& j) {
  cfg_.kind = optim_kind_from_string(j.at("kind").get<std::string>());
  cfg_.lr = j.at("lr").get<double>();
  cfg_.momentum = j.at("momentum").get<double>();
  cfg_.beta1 = j.at("beta1").get<double>();
  cfg_.beta2 = j.at("beta2").get<double>();
  cfg_.eps = j.at("eps").get<double>();
  cfg_.weight_decay = j.at("weight_decay").get<double>();
  steps_ = j.at("steps").get<Index>();
  first_ = vec_from_json(j.at("first"));
  second_ = vec_from_json(j.at("second"));
}

}  // namespace wdro::nn
