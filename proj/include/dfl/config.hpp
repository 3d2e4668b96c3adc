#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "dfl/certification.hpp"
#include "dfl/cfa.hpp"
#include "dfl/dataset.hpp"
#include "dfl/delay.hpp"
#include "dfl/topology.hpp"
#include "dfl/types.hpp"

namespace dfl {

enum class Algorithm { consensus, cfa };
enum class MetricsFormat { csv, jsonl };

std::string_view to_string(Algorithm algorithm);
std::string_view to_string(MetricsFormat format);
MetricsFormat parse_metrics_format(std::string_view name);

struct ClientOverride {
  std::optional<double> eta;
  std::optional<int> staleness_bound;
};

/// A fully validated experiment description. See README for the file format.
struct RunConfig {
  Algorithm algorithm = Algorithm::consensus;
  std::uint64_t seed = 1;
  Iteration iterations = 1000;
  std::size_t clients = 0;

  struct Loss {
    LossKind kind = LossKind::quadratic;
    Index dimension = 0;
    Index samples = 0;  // data-backed kinds; 0 means 100 per client
    double noise = 0.1;
    PartitionScheme partition = PartitionScheme::iid;
    std::string dataset;  // load from file instead of generating
    double eigen_min = 0.5;
    double eigen_max = 2.0;
    double center_scale = 3.0;
  } loss;

  TopologyKind topology = TopologyKind::ring;
  double edge_probability = 0.5;
  std::optional<std::uint64_t> topology_seed;

  DelayKind schedule = DelayKind::zero;
  std::vector<int> staleness_bounds;  // one per client after parsing
  int fixed_offset = 0;
  int period = 0;
  std::optional<std::uint64_t> schedule_seed;

  /// eta_k = eta_multiple * M_k unless explicit values are given.
  double eta_multiple = 8.0;
  std::vector<double> eta_values;
  std::map<std::size_t, ClientOverride> overrides;  // keyed by 0-based client

  double epsilon0 = 0.5;
  double tau = 1000.0;
  std::optional<double> learning_rate;  // absolute CFA step
  double learning_rate_scale = 0.5;     // otherwise scale / max_k M_k
  SignConvention sign = SignConvention::attract;

  double radius = 1e6;
  double tol = 1e-7;
  std::size_t window = 50;
  bool stop_on_convergence = true;
  AlphaVariant gate = AlphaVariant::conservative;

  std::string output_path;
  MetricsFormat format = MetricsFormat::jsonl;

  /// Non-fatal findings, e.g. an eta rule that cannot satisfy eta > 7M.
  std::vector<std::string> warnings;

  std::uint64_t effective_topology_seed() const;
  std::uint64_t effective_schedule_seed() const;
  std::uint64_t data_seed() const;
  std::uint64_t partition_seed() const;
};

/// Parses and validates a JSON config. Unknown and duplicate keys are errors;
/// every problem found is reported in one ConfigError.
RunConfig parse_config(const std::filesystem::path& path);
RunConfig parse_config_text(std::string_view text);

}  // namespace dfl
