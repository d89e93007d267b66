#include "wdro/data.hpp"

#include "wdro/rng.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

namespace wdro::data {

nlohmann::json DatasetMeta::to_json() const {
  nlohmann::json j = {{"kind", kind}, {"seed", seed}, {"n", n}, {"d", d}, {"num_classes", num_classes}};
  if (kind == "regression2d") j["sigma_y"] = sigma_y;
  if (kind == "blobs") {
    j["n_per_class"] = n_per_class;
    j["scale"] = scale;
    j["centers"] = centers;
  }
  return j;
}

DatasetMeta DatasetMeta::from_json(const nlohmann::json& j) {
  DatasetMeta m;
  m.kind = j.value("kind", std::string("custom"));
  m.seed = j.value("seed", std::uint64_t{0});
  m.n = j.at("n").get<Index>();
  m.d = j.at("d").get<Index>();
  m.num_classes = j.value("num_classes", Index{1});
  m.sigma_y = j.value("sigma_y", 0.5);
  m.n_per_class = j.value("n_per_class", Index{0});
  m.scale = j.value("scale", 0.0);
  if (j.contains("centers")) m.centers = j.at("centers").get<std::vector<std::vector<double>>>();
  return m;
}

Dataset::Dataset(Particles samples, std::vector<Label> labels, DatasetMeta meta)
    : samples_(std::move(samples)), labels_(std::move(labels)), meta_(std::move(meta)) {
  meta_.n = samples_.rows();
  meta_.d = samples_.cols();
  if (meta_.num_classes < 1) throw ConfigError("dataset: num_classes must be >= 1");
  if (meta_.num_classes == 1 && !labels_.empty())
    throw ConfigError("dataset: labels given for an unconditioned dataset");
  if (meta_.num_classes > 1 && static_cast<Index>(labels_.size()) != samples_.rows())
    throw ConfigError("dataset: expected one label per sample");
  for (Label y : labels_)
    if (static_cast<Index>(y) >= meta_.num_classes) throw ConfigError("dataset: label out of range");
  if (!samples_.allFinite()) throw ConfigError("dataset: non-finite sample");
}

std::vector<double> Dataset::class_proportions() const {
  std::vector<double> p(static_cast<std::size_t>(num_classes()), 0.0);
  if (labels_.empty()) {
    p[0] = 1.0;
    return p;
  }
  for (Label y : labels_) p[y] += 1.0;
  for (double& v : p) v /= static_cast<double>(labels_.size());
  return p;
}

Dataset gen_regression_2d(Index n, std::uint64_t seed, double sigma_y) {
  if (n < 1) throw ConfigError("gen_regression_2d: n must be >= 1");
  CounterRng rng(seed, streams::kData);
  Particles x(n, 2);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < 2; ++j) x(i, j) = rng.uniform(-1.0, 1.0);
  DatasetMeta meta;
  meta.kind = "regression2d";
  meta.seed = seed;
  meta.sigma_y = sigma_y;
  return Dataset(std::move(x), {}, meta);
}

Particles circle_centers(Index k, Index d, double radius) {
  if (d < 2) throw ConfigError("circle_centers: need d >= 2");
  Particles c = Particles::Zero(k, d);
  for (Index i = 0; i < k; ++i) {
    const double a = 2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(k);
    c(i, 0) = radius * std::cos(a);
    c(i, 1) = radius * std::sin(a);
  }
  return c;
}

Dataset gen_blobs(Index n_per_class, const Particles& centers, double scale, std::uint64_t seed) {
  const Index k = centers.rows();
  const Index d = centers.cols();
  if (k < 2) throw ConfigError("gen_blobs: need K >= 2");
  if (n_per_class < 1) throw ConfigError("gen_blobs: n_per_class must be >= 1");
  if (scale < 0.0) throw ConfigError("gen_blobs: scale must be nonnegative");
  for (Index a = 0; a < k; ++a)
    for (Index b = a + 1; b < k; ++b)
      if ((centers.row(a) - centers.row(b)).squaredNorm() == 0.0)
        throw ConfigError("gen_blobs: centers " + std::to_string(a) + " and " + std::to_string(b) +
                          " coincide");

  CounterRng rng(seed, streams::kData);
  Particles x(k * n_per_class, d);
  std::vector<Label> labels;
  labels.reserve(static_cast<std::size_t>(k * n_per_class));
  Index row = 0;
  for (Index c = 0; c < k; ++c) {
    for (Index i = 0; i < n_per_class; ++i, ++row) {
      for (Index j = 0; j < d; ++j) x(row, j) = centers(c, j) + scale * rng.normal();
      labels.push_back(static_cast<Label>(c));
    }
  }
  DatasetMeta meta;
  meta.kind = "blobs";
  meta.seed = seed;
  meta.num_classes = k;
  meta.n_per_class = n_per_class;
  meta.scale = scale;
  for (Index c = 0; c < k; ++c) {
    std::vector<double> row_c(static_cast<std::size_t>(d));
    for (Index j = 0; j < d; ++j) row_c[static_cast<std::size_t>(j)] = centers(c, j);
    meta.centers.push_back(std::move(row_c));
  }
  return Dataset(std::move(x), std::move(labels), meta);
}

std::string format_double(double x) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, res.ptr);
}

double parse_double(std::string_view s, Index line, Index field) {
  double v = 0.0;
  const auto* begin = s.data();
  const auto* end = s.data() + s.size();
  auto res = std::from_chars(begin, end, v);
  if (res.ec != std::errc() || res.ptr != end)
    throw ParseError("line " + std::to_string(line) + ", field " + std::to_string(field) +
                     ": cannot parse '" + std::string(s) + "' as a number");
  if (!std::isfinite(v))
    throw ParseError("line " + std::to_string(line) + " (row " + std::to_string(line - 2) +
                     "), field " + std::to_string(field) + ": non-finite value '" + std::string(s) + "'");
  return v;
}

void save(const Dataset& ds, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot open '" + path.string() + "' for writing");
  out << "# " << ds.meta().to_json().dump() << '\n';
  for (Index i = 0; i < ds.size(); ++i) {
    for (Index j = 0; j < ds.dim(); ++j) {
      if (j > 0) out << ',';
      out << format_double(ds.samples()(i, j));
    }
    if (ds.num_classes() > 1) out << ',' << ds.label(i);
    out << '\n';
  }
  if (!out) throw ConfigError("write to '" + path.string() + "' failed");
}

Dataset load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open '" + path.string() + "'");
  std::string line;
  if (!std::getline(in, line) || line.rfind("# ", 0) != 0)
    throw ParseError("line 1: expected '# <metadata json>' header");
  DatasetMeta meta;
  try {
    meta = DatasetMeta::from_json(nlohmann::json::parse(line.substr(2)));
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("line 1: bad metadata: ") + e.what());
  }
  if (meta.d < 1 || meta.n < 0 || meta.num_classes < 1) throw ParseError("line 1: invalid n, d or num_classes");
  const bool labelled = meta.num_classes > 1;
  const Index fields = meta.d + (labelled ? 1 : 0);

  Particles x(meta.n, meta.d);
  std::vector<Label> labels;
  Index row = 0;
  Index lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    if (row >= meta.n) throw ParseError("line " + std::to_string(lineno) + ": more rows than header n");
    std::vector<std::string_view> parts;
    std::string_view rest(line);
    while (true) {
      const auto comma = rest.find(',');
      parts.push_back(rest.substr(0, comma));
      if (comma == std::string_view::npos) break;
      rest.remove_prefix(comma + 1);
    }
    if (static_cast<Index>(parts.size()) != fields)
      throw ParseError("line " + std::to_string(lineno) + " (row " + std::to_string(row) + "): expected " +
                       std::to_string(fields) + " fields" + (labelled ? " including the label column" : "") +
                       ", got " + std::to_string(parts.size()));
    for (Index j = 0; j < meta.d; ++j)
      x(row, j) = parse_double(parts[static_cast<std::size_t>(j)], lineno, j);
    if (labelled) {
      const auto sv = parts.back();
      Label y = 0;
      auto res = std::from_chars(sv.data(), sv.data() + sv.size(), y);
      if (res.ec != std::errc() || res.ptr != sv.data() + sv.size() ||
          static_cast<Index>(y) >= meta.num_classes)
        throw ParseError("line " + std::to_string(lineno) + ": invalid label '" + std::string(sv) + "'");
      labels.push_back(y);
    }
    ++row;
  }
  if (row != meta.n)
    throw ParseError("expected " + std::to_string(meta.n) + " rows from header, found " + std::to_string(row));
  return Dataset(std::move(x), std::move(labels), meta);
}

}  // namespace wdro::data
