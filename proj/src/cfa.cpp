#include "dfl/cfa.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace dfl {

std::string_view to_string(SignConvention sign) {
  return sign == SignConvention::attract ? "attract" : "paper-literal";
}

SignConvention parse_sign_convention(std::string_view name) {
  if (name == "attract") return SignConvention::attract;
  if (name == "paper-literal") return SignConvention::paper_literal;
  throw ConfigError("unknown sign convention '" + std::string(name) + "'");
}

Vector cfa_aggregate(const Vector& own, double own_size, std::span<const CfaNeighbor> neighbors,
                     double epsilon, SignConvention sign) {
  if (neighbors.empty()) throw ConfigError("cfa_aggregate: client has no in-neighbors");
  double total = own_size;
  for (const CfaNeighbor& nb : neighbors) {
    require_same_dimension(nb.w, own, "cfa_aggregate");
    total += nb.size;
  }
  Vector pull = Vector::Zero(own.size());
  for (const CfaNeighbor& nb : neighbors) pull += (nb.size / total) * (own - nb.w);
  return sign == SignConvention::attract ? Vector(own - epsilon * pull)
                                         : Vector(own + epsilon * pull);
}

Vector cfa_local_step(const Vector& psi, const Vector& grad, double eta) {
  require_same_dimension(psi, grad, "cfa_local_step");
  if (!(eta > 0.0)) throw ConfigError("cfa_local_step: learning rate must be positive");
  return psi - eta * grad;
}

double MixingSchedule::at(Iteration t) const {
  return epsilon0 / (1.0 + static_cast<double>(t) / tau);
}

double CfaStepRecord::dwk_max() const {
  return dwk.empty() ? 0.0 : *std::max_element(dwk.begin(), dwk.end());
}

CfaEngine::CfaEngine(std::vector<LossModel> models, Topology topology, DelaySchedule schedule,
                     double learning_rate, MixingSchedule mixing, SignConvention sign)
    : models_(std::move(models)),
      topology_(std::move(topology)),
      schedule_(std::move(schedule)),
      learning_rate_(learning_rate),
      mixing_(mixing),
      sign_(sign) {
  const std::size_t K = models_.size();
  if (K == 0) throw ConfigError("cfa engine: no clients");
  if (topology_.clients() != K || schedule_.clients() != K) {
    throw ConfigError("cfa engine: topology, schedule and models disagree on client count");
  }
  if (!(learning_rate_ > 0.0)) throw ConfigError("cfa engine: learning rate must be positive");
  if (!(mixing_.epsilon0 >= 0.0) || !(mixing_.tau > 0.0)) {
    throw ConfigError("cfa engine: epsilon0 must be non-negative and tau positive");
  }
  for (std::size_t k = 0; k < K; ++k) {
    if (topology_.in_neighbors(k).empty()) {
      throw ConfigError("cfa engine: client " + std::to_string(k + 1) + " has no in-neighbors");
    }
    if (models_[k].dimension() != models_.front().dimension()) {
      throw ShapeError("cfa engine: client models have different dimensions");
    }
  }

  const auto capacity = static_cast<std::size_t>(schedule_.max_bound()) + 1;
  w_.assign(K, Vector::Zero(models_.front().dimension()));
  history_.assign(K, VersionCache(capacity));
  for (std::size_t k = 0; k < K; ++k) history_[k].push(t_, w_[k]);
}

Vector CfaEngine::average() const {
  double total = 0.0;
  Vector avg = Vector::Zero(w_.front().size());
  for (std::size_t k = 0; k < w_.size(); ++k) {
    avg += models_[k].weight() * w_[k];
    total += models_[k].weight();
  }
  return avg / total;
}

CfaStepRecord CfaEngine::step() {
  const std::size_t K = models_.size();
  CfaStepRecord rec;
  rec.t = t_;
  rec.epsilon = mixing_.at(t_);

  std::vector<Vector> next(K);
  std::vector<CfaNeighbor> gathered;
  for (std::size_t k = 0; k < K; ++k) {
    const Iteration index = schedule_.version_index(k, t_);
    gathered.clear();
    for (std::size_t p : topology_.in_neighbors(k)) {
      if (index > received_.held_index(k, p)) {
        received_.deliver(k, p, index, history_[p].fetch(index));
      }
      auto version = received_.latest_available(k, p, t_, schedule_.bound(k));
      gathered.push_back({std::move(version.w), models_[p].weight()});
    }
    const Vector psi = cfa_aggregate(w_[k], models_[k].weight(), gathered, rec.epsilon, sign_);
    next[k] = cfa_local_step(psi, models_[k].gradient(w_[k]), learning_rate_);
    if (!next[k].allFinite()) {
      throw NumericalError("non-finite CFA model for client " + std::to_string(k + 1) +
                           " at t=" + std::to_string(t_ + 1));
    }
  }

  const Vector avg_before = average();
  rec.dwk.resize(K);
  for (std::size_t k = 0; k < K; ++k) {
    rec.dwk[k] = (next[k] - w_[k]).norm();
    w_[k] = std::move(next[k]);
  }
  ++t_;
  for (std::size_t k = 0; k < K; ++k) history_[k].push(t_, w_[k]);

  const Vector avg = average();
  rec.dw = (avg - avg_before).norm();
  for (std::size_t k = 0; k < K; ++k) {
    rec.consensus_gap = std::max(rec.consensus_gap, (w_[k] - avg).norm());
    rec.local_objective += models_[k].weighted_value(w_[k]);
    rec.objective += models_[k].weighted_value(avg);
  }
  return rec;
}

}  // namespace dfl
