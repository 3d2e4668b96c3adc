#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dfl/certification.hpp"
#include "dfl/config.hpp"
#include "dfl/consensus.hpp"
#include "dfl/delay.hpp"
#include "dfl/loss.hpp"
#include "dfl/metrics.hpp"

namespace dfl {

enum ExitCode : int {
  kExitOk = 0,
  kExitUsage = 1,
  kExitCertification = 2,
  kExitStaleness = 3,
  kExitNonFinite = 4,
  kExitIo = 5,
};

/// Maps a library exception onto the CLI exit-code contract.
int exit_code_for(const std::exception& error) noexcept;

/// The concrete optimization problem a config describes.
struct Problem {
  std::vector<LossModel> models;  // weights sum to one
  std::vector<double> etas;
  std::vector<int> bounds;
  std::optional<Dataset> dataset;

  std::vector<CertificateInput> certificate_inputs() const;
};

/// Deterministic in (config, seed). Quadratic clients get A_k = Q diag(l) Q^T with
/// l uniform in the configured eigenvalue range and centers center_scale * N(0, I).
Problem build_problem(const RunConfig& config);

DelaySchedule build_schedule(const RunConfig& config, const std::vector<int>& bounds);

struct RunSummary {
  std::string algorithm;
  std::optional<AlphaReport> alpha;
  bool certified = false;
  ConvergenceReport convergence;
  Iteration iterations_run = 0;
  double initial_lagrangian = 0.0;
  double lemma4_bound = 0.0;
  double min_slack_lemma1 = 0.0;
  double min_slack_lemma3 = 0.0;
  /// min over rows of slack_lemma3 / (1 + |L|).
  double min_relative_slack_lemma3 = 0.0;
  double min_lemma4_margin = 0.0;
  double max_dual_identity_residual = 0.0;
  /// max over rows of (L^{t+1} - L^t) / (1 + |L^t|); <= 0 for a monotone run.
  double max_relative_increase = 0.0;
  double final_objective = 0.0;
  double final_consensus_gap = 0.0;
  double wall_seconds = 0.0;
  std::vector<std::string> warnings;
};

struct RunResult {
  int exit_code = kExitOk;
  std::string error;
  std::vector<TraceRow> trace;
  RunSummary summary;
  Vector final_w;                       // consensus variable, or CFA average
  std::vector<Vector> final_client_w;
};

/// Runs the configured experiment. Metrics go to config.output_path ("-" for
/// stdout, empty for none) and a summary to "<output_path>.summary.json".
/// Library errors are caught and reported through exit_code.
RunResult run_experiment(const RunConfig& config);

std::string summary_json(const RunResult& result, int indent = 2);

struct DeviationReport {
  double max_deviation = 0.0;
  std::size_t iteration = 0;  // 1-based row of the maximum
  Index coordinate = 0;       // 0-based
  std::vector<double> per_iteration;
  std::vector<Index> per_iteration_argmax;
  bool within_tolerance = true;
};

/// Per-row max |a - b| over coordinates. Throws UsageError on length or width mismatch.
DeviationReport compare_with_oracle(std::span<const Vector> a, std::span<const Vector> b,
                                    double tol);

}  // namespace dfl
