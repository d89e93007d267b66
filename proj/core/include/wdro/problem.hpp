#pragma once

#include "wdro/core.hpp"
#include "wdro/data.hpp"

namespace wdro {

/// A loss bound to a dataset and a penalty weight. Holds references; the
/// loss and dataset must outlive it.
class Problem {
 public:
  Problem(const LossModel& loss, const data::Dataset& data, double gamma)
      : loss_(&loss), data_(&data) {
    spec_.gamma = gamma;
    spec_.data_dim = loss.data_dim();
    spec_.param_dim = loss.param_dim();
    spec_.num_classes = loss.num_classes();
    spec_.class_proportions = data.num_classes() == loss.num_classes()
                                  ? data.class_proportions()
                                  : std::vector<double>(static_cast<std::size_t>(loss.num_classes()),
                                                        1.0 / static_cast<double>(loss.num_classes()));
    spec_.validate();
    if (data.dim() != loss.data_dim())
      throw ConfigError("dataset dimension " + std::to_string(data.dim()) +
                        " does not match loss data_dim " + std::to_string(loss.data_dim()));
    if (data.num_classes() > loss.num_classes())
      throw ConfigError("dataset has more classes than the loss supports");
  }

  const LossModel& loss() const { return *loss_; }
  const data::Dataset& data() const { return *data_; }
  const ProblemSpec& spec() const { return spec_; }
  double gamma() const { return spec_.gamma; }

 private:
  const LossModel* loss_;
  const data::Dataset* data_;
  ProblemSpec spec_;
};

}  // namespace wdro
