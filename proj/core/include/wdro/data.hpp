#pragma once

#include "wdro/core.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace wdro::data {

/// Generation metadata carried with every dataset and embedded in its file.
struct DatasetMeta {
  std::string kind = "custom";  ///< regression2d | blobs | custom
  std::uint64_t seed = 0;
  Index n = 0;
  Index d = 0;
  Index num_classes = 1;
  double sigma_y = 0.5;  ///< regression response bandwidth
  // blobs
  Index n_per_class = 0;
  double scale = 0.0;
  std::vector<std::vector<double>> centers;

  nlohmann::json to_json() const;
  static DatasetMeta from_json(const nlohmann::json& j);
};

/// Immutable sample set. labels is empty iff num_classes() == 1.
class Dataset {
 public:
  Dataset() = default;
  Dataset(Particles samples, std::vector<Label> labels, DatasetMeta meta);

  Index size() const { return samples_.rows(); }
  Index dim() const { return samples_.cols(); }
  Index num_classes() const { return meta_.num_classes; }
  const Particles& samples() const { return samples_; }
  auto sample(Index i) const { return samples_.row(i).transpose(); }
  const std::vector<Label>& labels() const { return labels_; }
  Label label(Index i) const { return labels_.empty() ? 0 : labels_[static_cast<std::size_t>(i)]; }
  const DatasetMeta& meta() const { return meta_; }

  /// Empirical class proportions p_y.
  std::vector<double> class_proportions() const;

 private:
  Particles samples_;
  std::vector<Label> labels_;
  DatasetMeta meta_;
};

/// n i.i.d. points from Unif([-1, 1]^2).
Dataset gen_regression_2d(Index n, std::uint64_t seed, double sigma_y = 0.5);

/// K isotropic Gaussian blobs, n_per_class points each, labelled by blob.
/// centers is K x d; rows must be distinct.
Dataset gen_blobs(Index n_per_class, const Particles& centers, double scale, std::uint64_t seed);

/// K centers evenly spaced on a circle of the given radius in the first two
/// coordinates (d >= 2).
Particles circle_centers(Index k, Index d, double radius);

/// CSV: first line "# <metadata json>", then one row per sample
/// "x_0,...,x_{d-1}[,label]". Doubles are written in shortest round-trip form.
void save(const Dataset& ds, const std::filesystem::path& path);
Dataset load(const std::filesystem::path& path);

std::string format_double(double x);
double parse_double(std::string_view s, Index line, Index field);

}  // namespace wdro::data
