#include "dfl/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <deque>
#include <fstream>
#include <limits>
#include <memory>

#include <json.hpp>

#include "dfl/cfa.hpp"
#include "dfl/linalg.hpp"
#include "dfl/rng.hpp"
#include "dfl/topology.hpp"

namespace dfl {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
}

int exit_code_for(const std::exception& error) noexcept {
  if (dynamic_cast<const StalenessViolation*>(&error) || dynamic_cast<const ColdStartError*>(&error)) {
    return kExitStaleness;
  }
  if (dynamic_cast<const NumericalError*>(&error)) return kExitNonFinite;
  if (dynamic_cast<const IoError*>(&error)) return kExitIo;
  return kExitUsage;
}

std::vector<CertificateInput> Problem::certificate_inputs() const {
  std::vector<CertificateInput> out;
  for (std::size_t k = 0; k < models.size(); ++k) {
    out.push_back({etas.at(k), models[k].weighted_lipschitz(), bounds.at(k)});
  }
  return out;
}

Problem build_problem(const RunConfig& config) {
  const std::size_t K = config.clients;
  Problem p;
  if (config.loss.kind == LossKind::quadratic) {
    const Index d = config.loss.dimension;
    Rng rng(config.data_seed());
    for (std::size_t k = 0; k < K; ++k) {
      const Matrix q = random_orthogonal(d, rng);
      Vector spectrum(d);
      for (Index i = 0; i < d; ++i) {
        spectrum[i] = config.loss.eigen_min + (config.loss.eigen_max - config.loss.eigen_min) * rng.uniform();
      }
      Matrix a = q * spectrum.asDiagonal() * q.transpose();
      a = 0.5 * (a + a.transpose()).eval();
      Vector center = config.loss.center_scale * random_normal_vector(d, rng);
      p.models.push_back(LossModel::quadratic(std::move(a), std::move(center), 1.0 / static_cast<double>(K)));
    }
  } else {
    Dataset data = config.loss.dataset.empty()
                       ? generate_synthetic(config.loss.kind,
                                            config.loss.samples > 0 ? config.loss.samples
                                                                    : static_cast<Index>(100 * K),
                                            config.loss.dimension, config.data_seed(), config.loss.noise)
                       : load_dataset(config.loss.dataset);
    if (config.loss.kind != LossKind::least_squares) data.classification = true;
    if (!config.loss.dataset.empty() && config.loss.dimension != 0 && data.d() != config.loss.dimension) {
      throw ConfigError("loss.dimension: dataset has " + std::to_string(data.d()) + " columns");
    }
    const Partition parts = partition(data, K, config.loss.partition, config.partition_seed());
    const double n = static_cast<double>(data.n());
    for (std::size_t k = 0; k < K; ++k) {
      const double weight = static_cast<double>(parts.size_of(k)) / n;
      p.models.push_back(LossModel::from_data(config.loss.kind, subset(data, parts.assignment[k]), weight));
    }
    p.dataset = std::move(data);
  }

  p.bounds = config.staleness_bounds;
  p.bounds.resize(K, 0);
  p.etas.resize(K);
  for (std::size_t k = 0; k < K; ++k) {
    p.etas[k] = config.eta_values.empty() ? config.eta_multiple * p.models[k].weighted_lipschitz()
                                          : config.eta_values[k];
    if (auto it = config.overrides.find(k); it != config.overrides.end() && it->second.eta) {
      p.etas[k] = *it->second.eta;
    }
    if (!(p.etas[k] > 0.0)) {
      throw ConfigError("eta for client " + std::to_string(k + 1) + " is not positive (M_k = 0?)");
    }
  }
  return p;
}

DelaySchedule build_schedule(const RunConfig& config, const std::vector<int>& bounds) {
  return DelaySchedule(config.schedule, bounds, config.effective_schedule_seed(), config.fixed_offset,
                       config.period);
}

namespace {

class Sink {
 public:
  explicit Sink(const RunConfig& config) {
    if (!config.output_path.empty()) writer_.emplace(config.output_path, config.format);
  }
  void write(const TraceRow& row) {
    if (writer_) writer_->write(row);
  }

 private:
  std::optional<MetricsWriter> writer_;
};

void finish_row(const TraceRow& row, RunResult& out, Sink& sink, ConvergenceDetector& detector) {
  if (!row_finite(row)) {
    throw NumericalError("non-finite value in trace row " + std::to_string(row.t));
  }
  sink.write(row);
  out.trace.push_back(row);
  detector.observe(row.t, {row.dwk_max, row.dw});
}

void run_consensus(const RunConfig& config, const Problem& problem, RunResult& out) {
  const auto inputs = problem.certificate_inputs();
  out.summary.alpha = check_assumption3(inputs, config.gate);
  out.summary.certified = out.summary.alpha->all_pass();

  std::vector<double> lipschitz;
  for (const auto& in : inputs) lipschitz.push_back(in.lipschitz);
  out.summary.lemma4_bound = lemma4_lower_bound(lipschitz, config.radius);

  auto clients = initial_clients(problem.models, problem.etas, problem.bounds);
  const Index d = clients.front().w.size();
  ConsensusEngine engine(std::move(clients), Vector::Zero(d), config.radius,
                         build_schedule(config, problem.bounds));
  const double l1 = engine.lagrangian();
  out.summary.initial_lagrangian = l1;
  Lemma3Monitor lemma3(l1, inputs);
  ConvergenceDetector detector(config.tol, config.window);
  Sink sink(config);

  int max_bound = 0;
  for (const auto& in : inputs) max_bound = std::max(max_bound, in.staleness_bound);
  std::deque<double> dw_sq_recent;
  double previous_l = l1;

  auto& s = out.summary;
  s.min_slack_lemma1 = s.min_slack_lemma3 = s.min_relative_slack_lemma3 = s.min_lemma4_margin = kInf;
  s.max_relative_increase = -kInf;

  for (Iteration i = 0; i < config.iterations; ++i) {
    const StepRecord rec = engine.step();
    dw_sq_recent.push_front(rec.dw * rec.dw);
    if (dw_sq_recent.size() > static_cast<std::size_t>(max_bound) + 1) dw_sq_recent.pop_back();
    const std::vector<double> window(dw_sq_recent.begin(), dw_sq_recent.end());
    std::vector<double> dlambda_sq, dwk_sq;
    for (double v : rec.dlambda) dlambda_sq.push_back(v * v);
    for (double v : rec.dwk) dwk_sq.push_back(v * v);

    const MonitorSlack m1 = lemma1_monitor(rec.t, window, dlambda_sq, inputs);
    const MonitorSlack m3 = lemma3.observe(rec.t, {dwk_sq, rec.dw * rec.dw, rec.lagrangian});

    TraceRow row;
    row.t = rec.t;
    row.lagrangian = rec.lagrangian;
    row.dw = rec.dw;
    row.dwk_max = rec.dwk_max();
    row.dlambda_max = rec.dlambda_max();
    row.consensus_gap = rec.consensus_gap;
    row.objective = rec.objective;
    row.slack_lemma1 = m1.slack;
    row.slack_lemma3 = m3.slack;
    row.lemma4_margin = rec.lagrangian - s.lemma4_bound;
    finish_row(row, out, sink, detector);

    s.min_slack_lemma1 = std::min(s.min_slack_lemma1, m1.slack);
    s.min_slack_lemma3 = std::min(s.min_slack_lemma3, m3.slack);
    s.min_relative_slack_lemma3 = std::min(s.min_relative_slack_lemma3, m3.slack / lemma3.scale());
    s.min_lemma4_margin = std::min(s.min_lemma4_margin, row.lemma4_margin);
    s.max_dual_identity_residual = std::max(s.max_dual_identity_residual, rec.dual_identity_residual);
    s.max_relative_increase =
        std::max(s.max_relative_increase, (rec.lagrangian - previous_l) / (1.0 + std::abs(previous_l)));
    previous_l = rec.lagrangian;
    s.final_objective = rec.objective;
    s.final_consensus_gap = rec.consensus_gap;
    if (detector.fired() && config.stop_on_convergence) break;
  }
  s.convergence = detector.report();
  out.final_w = engine.w();
  for (const auto& c : engine.clients()) out.final_client_w.push_back(c.w);
}

void run_cfa(const RunConfig& config, const Problem& problem, RunResult& out) {
  double max_m = 0.0;
  for (const auto& m : problem.models) max_m = std::max(max_m, m.lipschitz_constant());
  double lr = 0.0;
  if (config.learning_rate) {
    lr = *config.learning_rate;
  } else {
    if (!(max_m > 0.0)) throw ConfigError("cfa.learning_rate: c/M rule needs M > 0");
    lr = config.learning_rate_scale / max_m;
  }
  TopologySpec spec;
  spec.kind = config.topology;
  spec.edge_probability = config.edge_probability;
  spec.seed = config.effective_topology_seed();
  CfaEngine engine(problem.models, build_topology(spec, config.clients),
                   build_schedule(config, problem.bounds), lr, MixingSchedule{config.epsilon0, config.tau},
                   config.sign);
  ConvergenceDetector detector(config.tol, config.window);
  Sink sink(config);
  auto& s = out.summary;
  s.initial_lagrangian = 0.0;
  for (const auto& m : problem.models) s.initial_lagrangian += m.weighted_value(Vector::Zero(m.dimension()));

  for (Iteration i = 0; i < config.iterations; ++i) {
    const CfaStepRecord rec = engine.step();
    TraceRow row;
    row.t = rec.t;
    row.lagrangian = rec.local_objective;
    row.dw = rec.dw;
    row.dwk_max = rec.dwk_max();
    row.consensus_gap = rec.consensus_gap;
    row.objective = rec.objective;
    finish_row(row, out, sink, detector);
    s.final_objective = rec.objective;
    s.final_consensus_gap = rec.consensus_gap;
    if (detector.fired() && config.stop_on_convergence) break;
  }
  s.convergence = detector.report();
  out.final_w = engine.average();
  out.final_client_w = engine.client_models();
}

void write_summary(const RunConfig& config, const RunResult& result) {
  if (config.output_path.empty() || config.output_path == "-") return;
  const std::string path = config.output_path + ".summary.json";
  std::ofstream f(path);
  if (!f) throw IoError("cannot open summary file " + path);
  f << summary_json(result) << '\n';
  if (!f) throw IoError("cannot write summary file " + path);
}

}  // namespace

RunResult run_experiment(const RunConfig& config) {
  RunResult out;
  out.summary.algorithm = std::string(to_string(config.algorithm));
  out.summary.warnings = config.warnings;
  const auto start = std::chrono::steady_clock::now();
  try {
    const Problem problem = build_problem(config);
    if (config.algorithm == Algorithm::consensus) {
      run_consensus(config, problem, out);
    } else {
      run_cfa(config, problem, out);
    }
  } catch (const std::exception& e) {
    out.exit_code = exit_code_for(e);
    out.error = e.what();
  }
  out.summary.iterations_run = static_cast<Iteration>(out.trace.size());
  out.summary.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  if (out.exit_code != kExitIo) {
    try {
      write_summary(config, out);
    } catch (const IoError& e) {
      out.exit_code = kExitIo;
      out.error = e.what();
    }
  }
  return out;
}

std::string summary_json(const RunResult& result, int indent) {
  using nlohmann::json;
  const auto& s = result.summary;
  auto finite_or_null = [](double v) { return std::isfinite(v) ? json(v) : json(nullptr); };
  json j;
  j["algorithm"] = s.algorithm;
  j["exit_code"] = result.exit_code;
  if (!result.error.empty()) j["error"] = result.error;
  j["certified"] = s.certified;
  if (s.alpha) {
    json a;
    a["gate"] = std::string(to_string(s.alpha->gate));
    a["alpha_paper"] = s.alpha->alpha_paper;
    a["alpha_conservative"] = s.alpha->alpha_conservative;
    a["margin"] = s.alpha->margin;
    a["pass"] = s.alpha->pass;
    a["all_pass"] = s.alpha->all_pass();
    j["alpha_report"] = a;
  } else {
    j["alpha_report"] = nullptr;
  }
  json c;
  c["converged_at"] = s.convergence.converged_at ? json(*s.convergence.converged_at) : json(nullptr);
  c["tol"] = s.convergence.tol;
  c["window"] = s.convergence.window;
  c["final_dwk_max"] = s.convergence.final_dwk_max;
  c["final_dw"] = s.convergence.final_dw;
  j["convergence"] = c;
  j["iterations_run"] = s.iterations_run;
  j["initial_lagrangian"] = s.initial_lagrangian;
  j["lemma4_bound"] = finite_or_null(s.lemma4_bound);
  j["min_slack_lemma1"] = finite_or_null(s.min_slack_lemma1);
  j["min_slack_lemma3"] = finite_or_null(s.min_slack_lemma3);
  j["min_relative_slack_lemma3"] = finite_or_null(s.min_relative_slack_lemma3);
  j["min_lemma4_margin"] = finite_or_null(s.min_lemma4_margin);
  j["max_dual_identity_residual"] = s.max_dual_identity_residual;
  j["max_relative_lagrangian_increase"] = finite_or_null(s.max_relative_increase);
  j["final_objective"] = s.final_objective;
  j["final_consensus_gap"] = s.final_consensus_gap;
  j["wall_seconds"] = s.wall_seconds;
  j["warnings"] = s.warnings;
  return j.dump(indent);
}

DeviationReport compare_with_oracle(std::span<const Vector> a, std::span<const Vector> b, double tol) {
  if (a.size() != b.size()) {
    throw UsageError("trajectory lengths differ (" + std::to_string(a.size()) + " vs " +
                     std::to_string(b.size()) + ")");
  }
  DeviationReport r;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i].size() != b[i].size()) {
      throw UsageError("row " + std::to_string(i + 1) + " widths differ");
    }
    double worst = 0.0;
    Index at = 0;
    for (Index j = 0; j < a[i].size(); ++j) {
      double dev = std::abs(a[i][j] - b[i][j]);
      if (std::isnan(dev)) dev = (std::isnan(a[i][j]) && std::isnan(b[i][j])) ? 0.0 : kInf;
      if (dev > worst) {
        worst = dev;
        at = j;
      }
    }
    r.per_iteration.push_back(worst);
    r.per_iteration_argmax.push_back(at);
    if (r.iteration == 0 || worst > r.max_deviation) {
      r.max_deviation = worst;
      r.iteration = i + 1;
      r.coordinate = at;
    }
  }
  r.within_tolerance = r.max_deviation <= tol;
  return r;
}

}  // namespace dfl
