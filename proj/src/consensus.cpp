#include "dfl/consensus.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "dfl/linalg.hpp"

namespace dfl {

void ClientState::validate() const {
  if (!loss) throw ConfigError("client state has no loss model");
  if (!(eta > 0.0)) throw ConfigError("client eta must be positive");
  if (!(lipschitz >= 0.0)) throw ConfigError("client Lipschitz constant must be non-negative");
  if (staleness_bound < 0) throw ConfigError("client staleness bound must be non-negative");
  if (w.size() != loss->dimension() || lambda.size() != loss->dimension()) {
    throw ShapeError("client state: w, lambda and loss dimensions disagree");
  }
}

Vector consensus_global_update(std::span<const ClientState> clients, double radius) {
  if (clients.empty()) throw ConfigError("global update: no clients");
  const Index d = clients.front().w.size();
  Vector numerator = Vector::Zero(d);
  double eta_sum = 0.0;
  for (const ClientState& c : clients) {
    require_same_dimension(c.w, numerator, "consensus_global_update");
    require_same_dimension(c.lambda, numerator, "consensus_global_update");
    numerator += c.lambda + c.eta * c.w;
    eta_sum += c.eta;
  }
  return project_to_ball(numerator / eta_sum, radius);
}

Vector primal_step_from_gradient(const ClientState& client, const Vector& w_new,
                                 const Vector& stale_gradient) {
  require_same_dimension(w_new, client.lambda, "primal_step");
  require_same_dimension(stale_gradient, client.lambda, "primal_step");
  return w_new - (client.lambda + stale_gradient) / client.eta;
}

Vector primal_step(const ClientState& client, const Vector& w_new, const Vector& w_stale) {
  return primal_step_from_gradient(client, w_new, client.loss->weighted_gradient(w_stale));
}

Vector dual_update(const ClientState& client, const Vector& w_k_new, const Vector& w_new) {
  require_same_dimension(w_k_new, w_new, "dual_update");
  require_same_dimension(w_k_new, client.lambda, "dual_update");
  return client.lambda + client.eta * (w_k_new - w_new);
}

double lagrangian_value(std::span<const ClientState> clients, const Vector& w) {
  double total = 0.0;
  for (const ClientState& c : clients) {
    require_same_dimension(c.w, w, "lagrangian_value");
    require_same_dimension(c.lambda, w, "lagrangian_value");
    const Vector gap = c.w - w;
    total += c.loss->weighted_value(c.w) + c.lambda.dot(gap) + 0.5 * c.eta * gap.squaredNorm();
  }
  return total;
}

std::vector<ClientState> initial_clients(std::span<const LossModel> models,
                                         std::span<const double> etas,
                                         std::span<const int> bounds) {
  if (models.size() != etas.size() || models.size() != bounds.size()) {
    throw ConfigError("initial_clients: models, etas and bounds must have one entry per client");
  }
  std::vector<ClientState> out;
  out.reserve(models.size());
  for (std::size_t k = 0; k < models.size(); ++k) {
    ClientState c;
    c.loss = std::make_shared<const LossModel>(models[k]);
    const Vector zero = Vector::Zero(models[k].dimension());
    c.w = zero;
    c.lambda = -c.loss->weighted_gradient(zero);
    c.eta = etas[k];
    c.lipschitz = models[k].weighted_lipschitz();
    c.staleness_bound = bounds[k];
    c.validate();
    out.push_back(std::move(c));
  }
  return out;
}

double StepRecord::dwk_max() const {
  return dwk.empty() ? 0.0 : *std::max_element(dwk.begin(), dwk.end());
}

double StepRecord::dlambda_max() const {
  return dlambda.empty() ? 0.0 : *std::max_element(dlambda.begin(), dlambda.end());
}

namespace {

// max_k T_k + 1 versions are enough for every fetch a valid schedule can request.
std::size_t retained_versions(const std::vector<ClientState>& clients,
                              const DelaySchedule& schedule) {
  int bound = schedule.max_bound();
  for (const ClientState& c : clients) bound = std::max(bound, c.staleness_bound);
  return static_cast<std::size_t>(bound) + 1;
}

}  // namespace

ConsensusEngine::ConsensusEngine(std::vector<ClientState> clients, Vector w_initial,
                                 double radius, DelaySchedule schedule)
    : clients_(std::move(clients)),
      w_(std::move(w_initial)),
      radius_(radius),
      schedule_(std::move(schedule)),
      cache_(retained_versions(clients_, schedule_)) {
  if (clients_.empty()) throw ConfigError("consensus engine: no clients");
  if (schedule_.clients() != clients_.size()) {
    throw ConfigError("consensus engine: schedule covers " + std::to_string(schedule_.clients()) +
                      " clients, expected " + std::to_string(clients_.size()));
  }
  if (!(radius_ > 0.0)) throw ConfigError("feasible-set radius must be positive");
  for (const ClientState& c : clients_) {
    c.validate();
    require_same_dimension(c.w, w_, "consensus engine");
  }
  if (w_.norm() > radius_) throw ConfigError("initial w lies outside the feasible ball");
  cache_.push(t_, w_);
}

StepRecord ConsensusEngine::step() {
  const Iteration next = t_ + 1;
  const std::size_t K = clients_.size();

  StepRecord rec;
  rec.t = t_;
  rec.version_used.resize(K);
  for (std::size_t k = 0; k < K; ++k) {
    const Iteration index = schedule_.version_index(k, next);
    const Iteration age = next - index;
    if (age < 0 || age > clients_[k].staleness_bound) {
      throw StalenessViolation("client " + std::to_string(k + 1) + " would use w^" +
                               std::to_string(index) + " at t=" + std::to_string(next) +
                               " (staleness " + std::to_string(age) + " > T=" +
                               std::to_string(clients_[k].staleness_bound) + ")");
    }
    rec.version_used[k] = index;
  }

  Vector w_next = consensus_global_update(clients_, radius_);
  if (!w_next.allFinite()) throw NumericalError("non-finite consensus vector at t=" + std::to_string(next));
  cache_.push(next, w_next);

  std::vector<Vector> wk_next(K);
  std::vector<Vector> lambda_next(K);
  rec.dwk.resize(K);
  rec.dlambda.resize(K);
  for (std::size_t k = 0; k < K; ++k) {
    const ClientState& c = clients_[k];
    const Vector stale_gradient = c.loss->weighted_gradient(cache_.fetch(rec.version_used[k]));
    wk_next[k] = primal_step_from_gradient(c, w_next, stale_gradient);
    lambda_next[k] = dual_update(c, wk_next[k], w_next);
    if (!wk_next[k].allFinite() || !lambda_next[k].allFinite()) {
      throw NumericalError("non-finite state for client " + std::to_string(k + 1) +
                           " at t=" + std::to_string(next));
    }
    rec.dwk[k] = (wk_next[k] - c.w).norm();
    rec.dlambda[k] = (lambda_next[k] - c.lambda).norm();
    rec.dual_identity_residual =
        std::max(rec.dual_identity_residual, (lambda_next[k] + stale_gradient).norm());
  }

  rec.dw = (w_next - w_).norm();
  for (std::size_t k = 0; k < K; ++k) {
    clients_[k].w = std::move(wk_next[k]);
    clients_[k].lambda = std::move(lambda_next[k]);
  }
  w_ = std::move(w_next);
  t_ = next;

  rec.lagrangian = lagrangian_value(clients_, w_);
  for (const ClientState& c : clients_) {
    rec.consensus_gap = std::max(rec.consensus_gap, (c.w - w_).norm());
    rec.objective += c.loss->weighted_value(w_);
  }
  return rec;
}

Vector flatten_state(const ConsensusEngine& engine) {
  const Index d = engine.w().size();
  const auto K = static_cast<Index>(engine.clients().size());
  Vector out(d * (1 + 2 * K));
  out.head(d) = engine.w();
  for (Index k = 0; k < K; ++k) {
    const ClientState& c = engine.clients()[static_cast<std::size_t>(k)];
    out.segment(d * (1 + k), d) = c.w;
    out.segment(d * (1 + K + k), d) = c.lambda;
  }
  return out;
}

Trajectory record_trajectory(ConsensusEngine& engine, Iteration iterations) {
  Trajectory out;
  out.reserve(static_cast<std::size_t>(iterations));
  for (Iteration i = 0; i < iterations; ++i) {
    engine.step();
    out.push_back(flatten_state(engine));
  }
  return out;
}

Trajectory run_sync_reference(std::vector<ClientState> clients, Vector w_initial, double radius,
                              Iteration iterations) {
  const std::size_t K = clients.size();
  ConsensusEngine engine(std::move(clients), std::move(w_initial), radius, DelaySchedule::zero(K));
  return record_trajectory(engine, iterations);
}

}  // namespace dfl
