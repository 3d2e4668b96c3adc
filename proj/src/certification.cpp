#include "dfl/certification.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "dfl/linalg.hpp"
#include "dfl/rng.hpp"

namespace dfl {

std::string_view to_string(AlphaVariant variant) {
  return variant == AlphaVariant::paper ? "paper" : "conservative";
}

AlphaVariant parse_alpha_variant(std::string_view name) {
  if (name == "paper") return AlphaVariant::paper;
  if (name == "conservative") return AlphaVariant::conservative;
  throw ConfigError("unknown alpha variant '" + std::string(name) + "'");
}

std::string_view to_string(Monitor monitor) {
  switch (monitor) {
    case Monitor::lemma1: return "lemma1";
    case Monitor::lemma3: return "lemma3";
    case Monitor::lemma4: return "lemma4";
  }
  return "unknown";
}

double compute_alpha(double eta, double lipschitz, int staleness_bound, AlphaVariant variant) {
  if (!(eta > 0.0)) throw DomainError("compute_alpha: eta must be positive");
  if (!(lipschitz >= 0.0)) throw DomainError("compute_alpha: M must be non-negative");
  if (staleness_bound < 0) throw DomainError("compute_alpha: T must be non-negative");

  const double m = lipschitz;
  const double t = staleness_bound;
  const double window = (t + 1.0) * (t + 1.0);
  const double curvature = 7.0 * m / (2.0 * eta * eta);
  if (variant == AlphaVariant::paper) {
    return eta - 2.0 * (1.0 / eta - curvature) * m * m * window + m * t * t;
  }
  return eta / 2.0 - (1.0 / eta + curvature) * m * m * window - m * t * t / 2.0;
}

bool AlphaReport::all_pass() const {
  return std::all_of(pass.begin(), pass.end(), [](bool p) { return p; });
}

AlphaReport check_assumption3(std::span<const CertificateInput> clients, AlphaVariant gate) {
  AlphaReport r;
  r.gate = gate;
  for (const CertificateInput& c : clients) {
    const double paper = compute_alpha(c.eta, c.lipschitz, c.staleness_bound, AlphaVariant::paper);
    const double conservative =
        compute_alpha(c.eta, c.lipschitz, c.staleness_bound, AlphaVariant::conservative);
    const double gated = gate == AlphaVariant::paper ? paper : conservative;
    r.alpha_paper.push_back(paper);
    r.alpha_conservative.push_back(conservative);
    r.margin.push_back(c.eta - 7.0 * c.lipschitz);
    r.pass.push_back(gated > 0.0 && c.eta > 7.0 * c.lipschitz);
  }
  return r;
}

MonitorSlack lemma1_monitor(Iteration t, std::span<const double> dw_sq_recent,
                            std::span<const double> dlambda_sq,
                            std::span<const CertificateInput> clients) {
  MonitorSlack out;
  out.t = t;
  out.monitor = Monitor::lemma1;
  if (dlambda_sq.size() != clients.size()) {
    throw ShapeError("lemma1_monitor: one dual movement per client required");
  }
  out.slack = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < clients.size(); ++k) {
    const auto terms = static_cast<std::size_t>(clients[k].staleness_bound) + 1;
    const auto needed = std::min<std::size_t>(terms, static_cast<std::size_t>(std::max<Iteration>(t, 0)));
    if (dw_sq_recent.size() < needed) {
      out.applicable = false;
      out.per_client.clear();
      out.slack = 0.0;
      return out;
    }
    double window = 0.0;
    for (std::size_t m = 0; m < std::min(terms, dw_sq_recent.size()); ++m) window += dw_sq_recent[m];
    const double mk = clients[k].lipschitz;
    const double slack = mk * mk * static_cast<double>(terms) * window - dlambda_sq[k];
    out.per_client.push_back(slack);
    out.slack = std::min(out.slack, slack);
  }
  if (clients.empty()) out.slack = 0.0;
  return out;
}

Lemma3Monitor::Lemma3Monitor(double initial_lagrangian, std::vector<CertificateInput> clients)
    : initial_(initial_lagrangian),
      clients_(std::move(clients)),
      last_lagrangian_(initial_lagrangian) {
  for (const CertificateInput& c : clients_) {
    primal_coeff_.push_back((c.eta - 7.0 * c.lipschitz) / 2.0);
    consensus_coeff_ +=
        compute_alpha(c.eta, c.lipschitz, c.staleness_bound, AlphaVariant::conservative);
  }
}

MonitorSlack Lemma3Monitor::observe(Iteration t, const DescentStep& step) {
  if (step.dwk_sq.size() != clients_.size()) {
    throw ShapeError("lemma3 monitor: one primal movement per client required");
  }
  double row = 0.0;
  for (std::size_t k = 0; k < clients_.size(); ++k) row += primal_coeff_[k] * step.dwk_sq[k];
  row += consensus_coeff_ * step.dw_sq;
  accumulated_ += row;
  last_lagrangian_ = step.lagrangian;

  MonitorSlack out;
  out.t = t;
  out.monitor = Monitor::lemma3;
  out.slack = (initial_ - accumulated_) - step.lagrangian;
  return out;
}

MonitorSlack lemma3_monitor(double initial_lagrangian, std::span<const DescentStep> trace,
                            std::span<const CertificateInput> clients) {
  Lemma3Monitor monitor(initial_lagrangian, {clients.begin(), clients.end()});
  MonitorSlack last;
  last.monitor = Monitor::lemma3;
  Iteration t = 0;
  for (const DescentStep& step : trace) last = monitor.observe(++t, step);
  return last;
}

double lemma4_lower_bound(std::span<const double> lipschitz, double radius) {
  const double diameter = 2.0 * radius;
  const double sum = std::accumulate(lipschitz.begin(), lipschitz.end(), 0.0);
  return -diameter * diameter * sum / 2.0;
}

ConvergenceDetector::ConvergenceDetector(double tol, std::size_t window) {
  if (!(tol > 0.0)) throw ConfigError("convergence detector: tol must be positive");
  if (window < 1) throw ConfigError("convergence detector: window must be at least 1");
  report_.tol = tol;
  report_.window = window;
}

bool ConvergenceDetector::observe(Iteration t, const ResidualRow& row) {
  report_.final_dwk_max = row.dwk_max;
  report_.final_dw = row.dw;
  run_ = (row.dwk_max <= report_.tol && row.dw <= report_.tol) ? run_ + 1 : 0;
  if (!report_.converged_at && run_ >= report_.window) {
    report_.converged_at = t;
    return true;
  }
  return false;
}

ConvergenceReport theorem1_detector(std::span<const ResidualRow> trace, double tol,
                                    std::size_t window) {
  ConvergenceDetector detector(tol, window);
  Iteration t = 0;
  for (const ResidualRow& row : trace) detector.observe(++t, row);
  return detector.report();
}

double estimate_lipschitz_empirical(const LossModel& model, std::size_t trials,
                                    std::uint64_t seed) {
  if (trials < 1) throw ConfigError("estimate_lipschitz_empirical: need at least one trial");
  static constexpr double kOffsets[] = {10.0, 1.0, 1e-1, 1e-2, 1e-3};
  static constexpr double kSpreads[] = {0.1, 1.0, 3.0};

  Rng rng(seed);
  const Index d = model.dimension();
  double best = 0.0;
  for (std::size_t i = 0; i < trials; ++i) {
    const double spread = kSpreads[i % std::size(kSpreads)];
    const double offset = kOffsets[(i / std::size(kSpreads)) % std::size(kOffsets)];
    Vector x = random_normal_vector(d, rng) * spread;
    if (model.kind() == LossKind::quadratic) x += model.center();
    Vector dir = random_normal_vector(d, rng);
    const double norm = dir.norm();
    if (norm == 0.0) continue;
    const Vector y = x + dir * (offset / norm);
    const double dist = (x - y).norm();
    if (dist == 0.0) continue;
    best = std::max(best, (model.gradient(x) - model.gradient(y)).norm() / dist);
  }
  return best;
}

}  // namespace dfl
