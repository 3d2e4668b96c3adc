#include "dfl/config.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <regex>
#include <set>
#include <sstream>

#include <json.hpp>

#include "dfl/rng.hpp"

namespace dfl {

using nlohmann::json;

std::string_view to_string(Algorithm algorithm) {
  return algorithm == Algorithm::consensus ? "consensus" : "cfa";
}

std::string_view to_string(MetricsFormat format) {
  return format == MetricsFormat::csv ? "csv" : "jsonl";
}

MetricsFormat parse_metrics_format(std::string_view name) {
  if (name == "csv") return MetricsFormat::csv;
  if (name == "jsonl") return MetricsFormat::jsonl;
  throw ConfigError("unknown metrics format '" + std::string(name) + "'");
}

std::uint64_t RunConfig::effective_topology_seed() const {
  return topology_seed.value_or(derive_seed(seed, 1));
}
std::uint64_t RunConfig::effective_schedule_seed() const {
  return schedule_seed.value_or(derive_seed(seed, 2));
}
std::uint64_t RunConfig::data_seed() const { return derive_seed(seed, 3); }
std::uint64_t RunConfig::partition_seed() const { return derive_seed(seed, 4); }

namespace {

// Walks the document once, recording every problem instead of stopping at the first.
class Reader {
 public:
  std::vector<std::string> problems;

  void allow_only(const json& obj, const std::string& where, std::set<std::string> keys) {
    if (!obj.is_object()) {
      problems.push_back(where + ": expected an object");
      return;
    }
    for (const auto& [key, _] : obj.items()) {
      if (!keys.count(key)) problems.push_back(where + ": unknown key '" + key + "'");
    }
  }

  template <typename Fn>
  void field(const json& obj, const std::string& key, const std::string& where, Fn&& apply) {
    if (!obj.is_object() || !obj.contains(key)) return;
    try {
      apply(obj.at(key));
    } catch (const ConfigError& e) {
      for (const auto& p : e.problems()) problems.push_back(where + key + ": " + p);
    } catch (const json::exception& e) {
      problems.push_back(where + key + ": " + e.what());
    }
  }
};

double as_number(const json& v) {
  if (!v.is_number()) throw ConfigError("expected a number");
  return v.get<double>();
}

std::int64_t as_integer(const json& v) {
  if (!v.is_number_integer()) throw ConfigError("expected an integer");
  return v.get<std::int64_t>();
}

std::uint64_t as_seed(const json& v) {
  if (v.is_number_unsigned()) return v.get<std::uint64_t>();
  if (v.is_number_integer() && v.get<std::int64_t>() >= 0) return v.get<std::uint64_t>();
  throw ConfigError("expected a non-negative integer");
}

std::string as_string(const json& v) {
  if (!v.is_string()) throw ConfigError("expected a string");
  return v.get<std::string>();
}

bool as_bool(const json& v) {
  if (!v.is_boolean()) throw ConfigError("expected true or false");
  return v.get<bool>();
}

// "c*M" -> c, "c/M" -> c.
std::optional<double> parse_rule(const std::string& text, char op) {
  static const std::regex mul(R"(^\s*([0-9]*\.?[0-9]+(?:[eE][-+]?[0-9]+)?)\s*\*\s*M\s*$)");
  static const std::regex div(R"(^\s*([0-9]*\.?[0-9]+(?:[eE][-+]?[0-9]+)?)\s*/\s*M\s*$)");
  std::smatch m;
  if (std::regex_match(text, m, op == '*' ? mul : div)) return std::stod(m[1].str());
  return std::nullopt;
}

json parse_strict(std::string_view text, std::vector<std::string>& problems) {
  // One key set per open object; duplicates are reported with their path depth.
  std::vector<std::set<std::string>> open;
  auto callback = [&](int depth, json::parse_event_t event, json& parsed) {
    switch (event) {
      case json::parse_event_t::object_start:
        open.emplace_back();
        break;
      case json::parse_event_t::object_end:
        if (!open.empty()) open.pop_back();
        break;
      case json::parse_event_t::key: {
        const auto key = parsed.get<std::string>();
        if (!open.empty() && !open.back().insert(key).second) {
          problems.push_back("duplicate key '" + key + "' at depth " + std::to_string(depth));
        }
        break;
      }
      default:
        break;
    }
    return true;
  };
  try {
    return json::parse(text.begin(), text.end(), callback);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("malformed config: ") + e.what());
  }
}

}  // namespace

RunConfig parse_config_text(std::string_view text) {
  std::vector<std::string> dup;
  const json doc = parse_strict(text, dup);
  Reader r;
  r.problems = std::move(dup);
  RunConfig c;

  r.allow_only(doc, "config",
               {"algorithm", "seed", "iterations", "clients", "loss", "topology", "schedule", "eta",
                "cfa", "radius", "detector", "alpha_variant", "output", "client_overrides"});
  if (!doc.is_object()) throw ConfigError(std::move(r.problems));

  r.field(doc, "algorithm", "", [&](const json& v) {
    const auto s = as_string(v);
    if (s == "consensus") c.algorithm = Algorithm::consensus;
    else if (s == "cfa") c.algorithm = Algorithm::cfa;
    else throw ConfigError("expected 'consensus' or 'cfa'");
  });
  r.field(doc, "seed", "", [&](const json& v) { c.seed = as_seed(v); });
  r.field(doc, "iterations", "", [&](const json& v) {
    c.iterations = as_integer(v);
    if (c.iterations < 1) throw ConfigError("must be at least 1");
  });
  if (!doc.contains("clients")) r.problems.emplace_back("clients: required");
  r.field(doc, "clients", "", [&](const json& v) {
    const auto k = as_integer(v);
    if (k < 1) throw ConfigError("must be at least 1");
    c.clients = static_cast<std::size_t>(k);
  });

  if (!doc.contains("loss")) r.problems.emplace_back("loss: required");
  if (doc.contains("loss")) {
    const json& loss = doc.at("loss");
    r.allow_only(loss, "loss",
                 {"kind", "dimension", "samples", "noise", "partition", "dataset",
                  "eigenvalue_range", "center_scale"});
    if (loss.is_object() && !loss.contains("kind")) r.problems.emplace_back("loss.kind: required");
    r.field(loss, "kind", "loss.", [&](const json& v) { c.loss.kind = parse_loss_kind(as_string(v)); });
    r.field(loss, "dimension", "loss.", [&](const json& v) {
      c.loss.dimension = as_integer(v);
      if (c.loss.dimension < 1) throw ConfigError("must be at least 1");
    });
    r.field(loss, "samples", "loss.", [&](const json& v) {
      c.loss.samples = as_integer(v);
      if (c.loss.samples < 1) throw ConfigError("must be at least 1");
    });
    r.field(loss, "noise", "loss.", [&](const json& v) {
      c.loss.noise = as_number(v);
      if (!(c.loss.noise >= 0.0)) throw ConfigError("must be non-negative");
    });
    r.field(loss, "partition", "loss.",
            [&](const json& v) { c.loss.partition = parse_partition_scheme(as_string(v)); });
    r.field(loss, "dataset", "loss.", [&](const json& v) { c.loss.dataset = as_string(v); });
    r.field(loss, "eigenvalue_range", "loss.", [&](const json& v) {
      if (!v.is_array() || v.size() != 2) throw ConfigError("expected [min, max]");
      c.loss.eigen_min = as_number(v[0]);
      c.loss.eigen_max = as_number(v[1]);
      if (!(c.loss.eigen_min >= 0.0 && c.loss.eigen_max >= c.loss.eigen_min)) {
        throw ConfigError("need 0 <= min <= max");
      }
    });
    r.field(loss, "center_scale", "loss.", [&](const json& v) {
      c.loss.center_scale = as_number(v);
      if (!(c.loss.center_scale >= 0.0)) throw ConfigError("must be non-negative");
    });
    if (c.loss.dimension == 0 && c.loss.dataset.empty()) {
      r.problems.emplace_back("loss.dimension: required unless loss.dataset is given");
    }
  }

  if (doc.contains("topology")) {
    const json& topo = doc.at("topology");
    r.allow_only(topo, "topology", {"kind", "p", "seed"});
    r.field(topo, "kind", "topology.", [&](const json& v) { c.topology = parse_topology_kind(as_string(v)); });
    r.field(topo, "p", "topology.", [&](const json& v) {
      c.edge_probability = as_number(v);
      if (!(c.edge_probability > 0.0 && c.edge_probability <= 1.0)) throw ConfigError("must lie in (0, 1]");
    });
    r.field(topo, "seed", "topology.", [&](const json& v) { c.topology_seed = as_seed(v); });
  }

  std::optional<json> bounds_spec;
  if (doc.contains("schedule")) {
    const json& sched = doc.at("schedule");
    r.allow_only(sched, "schedule", {"kind", "T", "offset", "period", "seed"});
    r.field(sched, "kind", "schedule.", [&](const json& v) { c.schedule = parse_delay_kind(as_string(v)); });
    r.field(sched, "T", "schedule.", [&](const json& v) { bounds_spec = v; });
    r.field(sched, "offset", "schedule.", [&](const json& v) {
      c.fixed_offset = static_cast<int>(as_integer(v));
      if (c.fixed_offset < 0) throw ConfigError("must be non-negative");
    });
    r.field(sched, "period", "schedule.", [&](const json& v) {
      c.period = static_cast<int>(as_integer(v));
      if (c.period < 0) throw ConfigError("must be non-negative");
    });
    r.field(sched, "seed", "schedule.", [&](const json& v) { c.schedule_seed = as_seed(v); });
  }
  c.staleness_bounds.assign(c.clients, 0);
  if (bounds_spec) {
    const json& v = *bounds_spec;
    if (v.is_number_integer() && v.get<std::int64_t>() >= 0) {
      c.staleness_bounds.assign(c.clients, static_cast<int>(v.get<std::int64_t>()));
    } else if (v.is_array() && v.size() == c.clients) {
      for (std::size_t k = 0; k < c.clients; ++k) {
        if (!v[k].is_number_integer() || v[k].get<std::int64_t>() < 0) {
          r.problems.push_back("schedule.T[" + std::to_string(k) + "]: expected a non-negative integer");
        } else {
          c.staleness_bounds[k] = static_cast<int>(v[k].get<std::int64_t>());
        }
      }
    } else {
      r.problems.push_back("schedule.T: expected a non-negative integer or one per client");
    }
  }

  r.field(doc, "eta", "", [&](const json& v) {
    if (v.is_string()) {
      const auto rule = parse_rule(v.get<std::string>(), '*');
      if (!rule) throw ConfigError("expected a rule of the form 'c*M'");
      c.eta_multiple = *rule;
    } else if (v.is_number()) {
      c.eta_values.assign(c.clients, as_number(v));
    } else if (v.is_array()) {
      if (v.size() != c.clients) throw ConfigError("expected one value per client");
      for (const auto& e : v) c.eta_values.push_back(as_number(e));
    } else {
      throw ConfigError("expected 'c*M', a number, or an array");
    }
    for (double e : c.eta_values)
      if (!(e > 0.0)) throw ConfigError("eta values must be positive");
  });
  if (c.eta_values.empty()) {
    if (!(c.eta_multiple > 0.0)) {
      r.problems.emplace_back("eta: multiple of M must be positive");
    } else if (c.eta_multiple <= 7.0) {
      char rule[64];
      std::snprintf(rule, sizeof rule, "%g*M", c.eta_multiple);
      c.warnings.push_back(std::string("eta rule ") + rule +
                           " does not satisfy eta > 7M; the run will be UNCERTIFIED");
    }
  }

  if (doc.contains("cfa")) {
    const json& cfa = doc.at("cfa");
    r.allow_only(cfa, "cfa", {"epsilon0", "tau", "learning_rate", "sign"});
    r.field(cfa, "epsilon0", "cfa.", [&](const json& v) {
      c.epsilon0 = as_number(v);
      if (!(c.epsilon0 > 0.0)) throw ConfigError("must be positive");
    });
    r.field(cfa, "tau", "cfa.", [&](const json& v) {
      if (v.is_string() && v.get<std::string>() == "inf") {
        c.tau = std::numeric_limits<double>::infinity();
        return;
      }
      c.tau = as_number(v);
      if (!(c.tau > 0.0)) throw ConfigError("must be positive");
    });
    r.field(cfa, "learning_rate", "cfa.", [&](const json& v) {
      if (v.is_string()) {
        const auto rule = parse_rule(v.get<std::string>(), '/');
        if (!rule || !(*rule > 0.0)) throw ConfigError("expected a positive number or 'c/M'");
        c.learning_rate_scale = *rule;
      } else {
        c.learning_rate = as_number(v);
        if (!(*c.learning_rate > 0.0)) throw ConfigError("must be positive");
      }
    });
    r.field(cfa, "sign", "cfa.", [&](const json& v) { c.sign = parse_sign_convention(as_string(v)); });
  }

  r.field(doc, "radius", "", [&](const json& v) {
    c.radius = as_number(v);
    if (!(c.radius > 0.0) || !std::isfinite(c.radius)) throw ConfigError("must be positive and finite");
  });

  if (doc.contains("detector")) {
    const json& det = doc.at("detector");
    r.allow_only(det, "detector", {"tol", "window", "stop_on_convergence"});
    r.field(det, "tol", "detector.", [&](const json& v) {
      c.tol = as_number(v);
      if (!(c.tol > 0.0)) throw ConfigError("must be positive");
    });
    r.field(det, "window", "detector.", [&](const json& v) {
      const auto w = as_integer(v);
      if (w < 1) throw ConfigError("must be at least 1");
      c.window = static_cast<std::size_t>(w);
    });
    r.field(det, "stop_on_convergence", "detector.", [&](const json& v) { c.stop_on_convergence = as_bool(v); });
  }

  r.field(doc, "alpha_variant", "", [&](const json& v) { c.gate = parse_alpha_variant(as_string(v)); });

  if (doc.contains("output")) {
    const json& out = doc.at("output");
    r.allow_only(out, "output", {"path", "format"});
    r.field(out, "path", "output.", [&](const json& v) { c.output_path = as_string(v); });
    r.field(out, "format", "output.", [&](const json& v) { c.format = parse_metrics_format(as_string(v)); });
  }

  if (doc.contains("client_overrides")) {
    const json& ov = doc.at("client_overrides");
    if (!ov.is_object()) {
      r.problems.emplace_back("client_overrides: expected an object keyed by client number");
    } else {
      for (const auto& [key, body] : ov.items()) {
        const std::string where = "client_overrides." + key;
        std::size_t k = 0;
        try {
          std::size_t used = 0;
          const long parsed = std::stol(key, &used);
          if (used != key.size() || parsed < 1 || static_cast<std::size_t>(parsed) > c.clients) {
            throw std::out_of_range(key);
          }
          k = static_cast<std::size_t>(parsed - 1);
        } catch (const std::exception&) {
          r.problems.push_back(where + ": key must be a client number in 1.." + std::to_string(c.clients));
          continue;
        }
        r.allow_only(body, where, {"eta", "T"});
        ClientOverride o;
        r.field(body, "eta", where + ".", [&](const json& v) {
          o.eta = as_number(v);
          if (!(*o.eta > 0.0)) throw ConfigError("must be positive");
        });
        r.field(body, "T", where + ".", [&](const json& v) {
          const auto t = as_integer(v);
          if (t < 0) throw ConfigError("must be non-negative");
          o.staleness_bound = static_cast<int>(t);
        });
        if (o.staleness_bound && k < c.staleness_bounds.size()) c.staleness_bounds[k] = *o.staleness_bound;
        c.overrides[k] = o;
      }
    }
  }

  // Cross-field checks.
  if (c.algorithm == Algorithm::cfa) {
    if (c.clients < 2) r.problems.emplace_back("cfa: needs at least 2 clients");
  }
  if (c.loss.kind != LossKind::quadratic && c.loss.dataset.empty() && c.loss.samples != 0 &&
      c.clients > 0 && static_cast<std::size_t>(c.loss.samples) < c.clients) {
    r.problems.emplace_back("loss.samples: fewer samples than clients");
  }
  if (c.loss.kind == LossKind::quadratic && !c.loss.dataset.empty()) {
    r.problems.emplace_back("loss.dataset: quadratic losses do not take a dataset");
  }

  if (!r.problems.empty()) throw ConfigError(std::move(r.problems));
  return c;
}

RunConfig parse_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config_text(buf.str());
}

}  // namespace dfl
