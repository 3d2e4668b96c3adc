#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "dfl/loss.hpp"
#include "dfl/types.hpp"

namespace dfl {

/// Two readings of the step-size/delay certificate alpha_k.
///
///   paper:        eta - 2 (1/eta - 7M/(2 eta^2)) M^2 (T+1)^2 + M T^2
///   conservative: eta/2 - (1/eta + 7M/(2 eta^2)) M^2 (T+1)^2 - M T^2 / 2
///
/// The conservative form is the coefficient that actually appears in the
/// cumulative descent bound checked by Lemma3Monitor, and it gates certification
/// by default.
enum class AlphaVariant { paper, conservative };

std::string_view to_string(AlphaVariant variant);
AlphaVariant parse_alpha_variant(std::string_view name);

/// Throws DomainError for eta <= 0, M < 0 or T < 0.
double compute_alpha(double eta, double lipschitz, int staleness_bound, AlphaVariant variant);

struct CertificateInput {
  double eta = 0.0;
  double lipschitz = 0.0;
  int staleness_bound = 0;
};

struct AlphaReport {
  AlphaVariant gate = AlphaVariant::conservative;
  std::vector<double> alpha_paper;
  std::vector<double> alpha_conservative;
  std::vector<double> margin;  // eta_k - 7 M_k
  std::vector<bool> pass;      // gated alpha_k > 0 and eta_k > 7 M_k

  bool all_pass() const;
};

AlphaReport check_assumption3(std::span<const CertificateInput> clients,
                              AlphaVariant gate = AlphaVariant::conservative);

enum class Monitor { lemma1, lemma3, lemma4 };

std::string_view to_string(Monitor monitor);

/// Bound minus observed value; slack >= 0 means the inequality held.
struct MonitorSlack {
  Iteration t = 0;
  Monitor monitor = Monitor::lemma1;
  double slack = 0.0;
  std::vector<double> per_client;
  bool applicable = true;
};

/// Dual-variable bound at row t:
///   M_k^2 (T_k+1) sum_{m=0}^{T_k} ||w^{t+1-m} - w^{t-m}||^2 - ||lambda_k^{t+1} - lambda_k^t||^2.
///
/// `dw_sq_recent[m]` holds ||w^{t+1-m} - w^{t-m}||^2, most recent first. Only
/// differences that exist (t - m >= 1) are passed; earlier ones are zero since
/// no version precedes t = 1. The result is not applicable when fewer than
/// min(T_k + 1, t) entries are supplied. `slack` is the minimum over clients.
MonitorSlack lemma1_monitor(Iteration t, std::span<const double> dw_sq_recent,
                            std::span<const double> dlambda_sq,
                            std::span<const CertificateInput> clients);

/// One row of input for the cumulative descent bound.
struct DescentStep {
  std::vector<double> dwk_sq;  // ||w_k^{i+1} - w_k^i||^2
  double dw_sq = 0.0;          // ||w^{i+1} - w^i||^2
  double lagrangian = 0.0;     // L at state i+1
};

/// Cumulative descent bound
///   [L^1 - sum_i sum_k (eta_k - 7M_k)/2 ||dw_k^i||^2 - sum_i sum_k alpha_k ||dw^i||^2] - L^{t+1}
/// with the conservative alpha_k, accumulated row by row.
class Lemma3Monitor {
 public:
  Lemma3Monitor(double initial_lagrangian, std::vector<CertificateInput> clients);

  MonitorSlack observe(Iteration t, const DescentStep& step);

  /// Relative tolerance scale 1 + |L| for the most recent observation.
  double scale() const noexcept { return 1.0 + std::abs(last_lagrangian_); }

 private:
  double initial_;
  std::vector<CertificateInput> clients_;
  std::vector<double> primal_coeff_;
  double consensus_coeff_ = 0.0;
  double accumulated_ = 0.0;
  double last_lagrangian_ = 0.0;
};

/// Slack for the last row of a full trace (same arithmetic as Lemma3Monitor).
MonitorSlack lemma3_monitor(double initial_lagrangian, std::span<const DescentStep> trace,
                            std::span<const CertificateInput> clients);

/// -(2R)^2 * sum_k M_k / 2.
double lemma4_lower_bound(std::span<const double> lipschitz, double radius);

struct ResidualRow {
  double dwk_max = 0.0;
  double dw = 0.0;
};

struct ConvergenceReport {
  std::optional<Iteration> converged_at;
  double tol = 0.0;
  std::size_t window = 0;
  double final_dwk_max = 0.0;
  double final_dw = 0.0;
};

/// Fires at the first row t such that rows t-window+1..t all have both
/// residuals <= tol. Rows are numbered from 1.
class ConvergenceDetector {
 public:
  ConvergenceDetector(double tol, std::size_t window);

  /// Returns true on the row where the detector first fires.
  bool observe(Iteration t, const ResidualRow& row);
  const ConvergenceReport& report() const noexcept { return report_; }
  bool fired() const noexcept { return report_.converged_at.has_value(); }

 private:
  ConvergenceReport report_;
  std::size_t run_ = 0;
};

ConvergenceReport theorem1_detector(std::span<const ResidualRow> trace, double tol,
                                    std::size_t window);

/// max over sampled pairs (x, y) of ||grad F(x) - grad F(y)|| / ||x - y||.
/// Pairs mix scales: x ~ N(0, s^2 I), y = x + r u with r spanning 1e-3..10.
double estimate_lipschitz_empirical(const LossModel& model, std::size_t trials,
                                    std::uint64_t seed);

}  // namespace dfl
