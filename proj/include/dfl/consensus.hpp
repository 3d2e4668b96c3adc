#pragma once

#include <memory>
#include <span>
#include <vector>

#include "dfl/delay.hpp"
#include "dfl/loss.hpp"
#include "dfl/types.hpp"
#include "dfl/version_cache.hpp"

namespace dfl {

/// Per-client primal/dual state of the augmented-Lagrangian consensus method.
/// `loss` is evaluated as G_k = weight * F_k; `lipschitz` is G_k's constant.
struct ClientState {
  Vector w;
  Vector lambda;
  double eta = 1.0;
  double lipschitz = 0.0;
  int staleness_bound = 0;
  std::shared_ptr<const LossModel> loss;

  void validate() const;
};

/// Minimizer over w of the augmented Lagrangian for fixed {w_k, lambda_k},
/// projected onto the ball of radius `radius`:
///   P_W[ sum_k (lambda_k + eta_k w_k) / sum_k eta_k ].
Vector consensus_global_update(std::span<const ClientState> clients, double radius);

/// Closed-form client step w_new - (lambda_k + grad G_k(w_stale)) / eta_k.
Vector primal_step(const ClientState& client, const Vector& w_new, const Vector& w_stale);
Vector primal_step_from_gradient(const ClientState& client, const Vector& w_new,
                                 const Vector& stale_gradient);

/// lambda_k + eta_k (w_k_new - w_new).
Vector dual_update(const ClientState& client, const Vector& w_k_new, const Vector& w_new);

/// sum_k [ G_k(w_k) + <lambda_k, w_k - w> + eta_k/2 ||w_k - w||^2 ].
double lagrangian_value(std::span<const ClientState> clients, const Vector& w);

/// w^1 = 0, w_k^1 = 0, lambda_k^1 = -grad G_k(w^1); M_k is taken from the model.
std::vector<ClientState> initial_clients(std::span<const LossModel> models,
                                         std::span<const double> etas,
                                         std::span<const int> bounds);

/// Everything observed while moving from state t to state t+1.
struct StepRecord {
  Iteration t = 0;
  double lagrangian = 0.0;  // L at state t+1
  double dw = 0.0;          // ||w^{t+1} - w^t||
  std::vector<double> dwk;  // ||w_k^{t+1} - w_k^t||
  std::vector<double> dlambda;
  std::vector<Iteration> version_used;  // [t+1](k)
  double consensus_gap = 0.0;           // max_k ||w_k^{t+1} - w^{t+1}||
  double objective = 0.0;               // sum_k G_k(w^{t+1})
  /// max_k ||lambda_k^{t+1} + grad G_k(w^{[t+1](k)})||
  double dual_identity_residual = 0.0;

  double dwk_max() const;
  double dlambda_max() const;
};

/// Asynchronous augmented-Lagrangian consensus iteration.
///
/// Each step: (1) global update, pushed into the version cache; (2) every
/// client fetches w^{[t+1](k)} and takes the closed-form primal step; (3) dual
/// update. Client steps read only the t-snapshot. A version older than the
/// client's bound raises StalenessViolation before any state is modified.
class ConsensusEngine {
 public:
  ConsensusEngine(std::vector<ClientState> clients, Vector w_initial, double radius,
                  DelaySchedule schedule);

  StepRecord step();

  Iteration t() const noexcept { return t_; }
  const Vector& w() const noexcept { return w_; }
  const std::vector<ClientState>& clients() const noexcept { return clients_; }
  double radius() const noexcept { return radius_; }
  const DelaySchedule& schedule() const noexcept { return schedule_; }
  double lagrangian() const { return lagrangian_value(clients_, w_); }

 private:
  std::vector<ClientState> clients_;
  Vector w_;
  double radius_;
  DelaySchedule schedule_;
  VersionCache cache_;
  Iteration t_ = 1;
};

/// One flattened snapshot per iteration: [w, w_1..w_K, lambda_1..lambda_K].
using Trajectory = std::vector<Vector>;

Vector flatten_state(const ConsensusEngine& engine);

/// Runs `iterations` steps and records the state after each one.
Trajectory record_trajectory(ConsensusEngine& engine, Iteration iterations);

/// The same engine with every staleness forced to zero.
Trajectory run_sync_reference(std::vector<ClientState> clients, Vector w_initial, double radius,
                              Iteration iterations);

}  // namespace dfl
