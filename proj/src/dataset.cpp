#include "dfl/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <string>

#include "dfl/linalg.hpp"
#include "dfl/rng.hpp"

namespace dfl {

std::string_view to_string(LossKind kind) {
  switch (kind) {
    case LossKind::quadratic: return "quadratic";
    case LossKind::least_squares: return "least-squares";
    case LossKind::logistic: return "logistic";
    case LossKind::sigmoid_nonconvex: return "sigmoid-nonconvex";
  }
  return "unknown";
}

LossKind parse_loss_kind(std::string_view name) {
  if (name == "quadratic") return LossKind::quadratic;
  if (name == "least-squares") return LossKind::least_squares;
  if (name == "logistic") return LossKind::logistic;
  if (name == "sigmoid-nonconvex") return LossKind::sigmoid_nonconvex;
  throw ConfigError("unknown loss kind '" + std::string(name) + "'");
}

std::string_view to_string(PartitionScheme scheme) {
  return scheme == PartitionScheme::iid ? "iid" : "shard-skew";
}

PartitionScheme parse_partition_scheme(std::string_view name) {
  if (name == "iid") return PartitionScheme::iid;
  if (name == "shard-skew") return PartitionScheme::shard_skew;
  throw ConfigError("unknown partition scheme '" + std::string(name) + "'");
}

void Dataset::validate() const {
  std::vector<std::string> problems;
  if (features.rows() < 1) problems.emplace_back("dataset: need at least one sample");
  if (features.cols() < 1) problems.emplace_back("dataset: need at least one feature");
  if (labels.size() != features.rows()) {
    problems.emplace_back("dataset: " + std::to_string(labels.size()) + " labels for " +
                          std::to_string(features.rows()) + " samples");
  }
  if (classification) {
    for (Index i = 0; i < labels.size(); ++i) {
      if (labels(i) != 1.0 && labels(i) != -1.0) {
        problems.emplace_back("dataset: classification label " + std::to_string(i) +
                              " is not +-1");
        break;
      }
    }
  }
  if (!problems.empty()) throw ConfigError(std::move(problems));
}

Dataset generate_synthetic(LossKind kind, Index n, Index d, std::uint64_t seed, double noise) {
  if (kind == LossKind::quadratic) {
    throw ConfigError("generate_synthetic: quadratic losses are analytic and take no dataset");
  }
  if (n < 1 || d < 1) throw ConfigError("generate_synthetic: need n >= 1 and d >= 1");
  if (!(noise >= 0.0)) throw ConfigError("generate_synthetic: noise must be non-negative");

  Rng rng(seed);
  Dataset data;
  data.hidden = random_normal_vector(d, rng);
  data.features.resize(n, d);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < d; ++j) data.features(i, j) = rng.normal();

  data.labels.resize(n);
  data.classification = kind != LossKind::least_squares;
  for (Index i = 0; i < n; ++i) {
    const double margin = data.features.row(i).dot(data.hidden);
    if (data.classification) {
      const double p = 1.0 / (1.0 + std::exp(-margin));
      data.labels(i) = rng.uniform() < p ? 1.0 : -1.0;
    } else {
      data.labels(i) = margin + noise * rng.normal();
    }
  }
  return data;
}

namespace {

std::vector<std::vector<Index>> deal_contiguous(const std::vector<Index>& order,
                                                std::size_t clients) {
  const std::size_t n = order.size();
  const std::size_t base = n / clients;
  const std::size_t extra = n % clients;
  std::vector<std::vector<Index>> out(clients);
  std::size_t pos = 0;
  for (std::size_t k = 0; k < clients; ++k) {
    const std::size_t len = base + (k < extra ? 1 : 0);
    out[k].assign(order.begin() + static_cast<std::ptrdiff_t>(pos),
                  order.begin() + static_cast<std::ptrdiff_t>(pos + len));
    pos += len;
  }
  return out;
}

}  // namespace

Partition partition(const Dataset& data, std::size_t clients, PartitionScheme scheme,
                    std::uint64_t seed) {
  const auto n = static_cast<std::size_t>(data.n());
  if (clients < 1) throw ConfigError("partition: need at least one client");
  if (clients > n) {
    throw ConfigError("partition: " + std::to_string(clients) + " clients for " +
                      std::to_string(n) + " samples");
  }

  std::vector<Index> order(n);
  std::iota(order.begin(), order.end(), Index{0});
  Rng rng(seed);
  rng.shuffle(order.begin(), order.end());
  if (scheme == PartitionScheme::shard_skew) {
    std::stable_sort(order.begin(), order.end(),
                     [&](Index a, Index b) { return data.labels(a) < data.labels(b); });
  }

  Partition out;
  out.assignment = deal_contiguous(order, clients);
  if (scheme == PartitionScheme::iid) {
    for (auto& rows : out.assignment) std::sort(rows.begin(), rows.end());
  }
  return out;
}

Dataset subset(const Dataset& data, std::span<const Index> rows) {
  Dataset out;
  out.classification = data.classification;
  out.hidden = data.hidden;
  out.features.resize(static_cast<Index>(rows.size()), data.d());
  out.labels.resize(static_cast<Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const Index r = rows[i];
    if (r < 0 || r >= data.n()) throw ShapeError("subset: row index out of range");
    out.features.row(static_cast<Index>(i)) = data.features.row(r);
    out.labels(static_cast<Index>(i)) = data.labels(r);
  }
  return out;
}

Dataset load_dataset(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open dataset file " + path.string());
  Index n = 0;
  Index d = 0;
  if (!(in >> n >> d) || n < 1 || d < 1) {
    throw ConfigError(path.string() + ": header must be 'n d' with positive values");
  }
  Dataset data;
  data.features.resize(n, d);
  data.labels.resize(n);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < d; ++j)
      if (!(in >> data.features(i, j))) {
        throw ConfigError(path.string() + ": truncated feature block at row " +
                          std::to_string(i + 1));
      }
  for (Index i = 0; i < n; ++i)
    if (!(in >> data.labels(i))) {
      throw ConfigError(path.string() + ": expected " + std::to_string(n) + " labels");
    }
  std::string trailing;
  if (in >> trailing) throw ConfigError(path.string() + ": unexpected trailing content");

  data.classification = (data.labels.array().abs() == 1.0).all();
  data.validate();
  return data;
}

void save_dataset(const Dataset& data, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write dataset file " + path.string());
  char buf[40];
  out << data.n() << ' ' << data.d() << '\n';
  for (Index i = 0; i < data.n(); ++i) {
    for (Index j = 0; j < data.d(); ++j) {
      std::snprintf(buf, sizeof buf, "%.17g", data.features(i, j));
      out << (j ? " " : "") << buf;
    }
    out << '\n';
  }
  for (Index i = 0; i < data.n(); ++i) {
    std::snprintf(buf, sizeof buf, "%.17g", data.labels(i));
    out << buf << '\n';
  }
  if (!out) throw IoError("failed writing dataset file " + path.string());
}

}  // namespace dfl
