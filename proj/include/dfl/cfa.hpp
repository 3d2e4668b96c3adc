#pragma once

#include <limits>
#include <span>
#include <string_view>
#include <vector>

#include "dfl/delay.hpp"
#include "dfl/loss.hpp"
#include "dfl/topology.hpp"
#include "dfl/types.hpp"
#include "dfl/version_cache.hpp"

namespace dfl {

/// attract: psi = w_k - eps * sum_p omega_p (w_k - w_p), pulls clients together.
/// paper_literal: psi = w_k + eps * sum_p omega_p (w_k - w_p), the mixing rule
/// with the inner sign exactly as it is usually printed; it pushes clients apart.
enum class SignConvention { attract, paper_literal };

std::string_view to_string(SignConvention sign);
SignConvention parse_sign_convention(std::string_view name);

struct CfaNeighbor {
  Vector w;
  double size;  // |D_p| or any quantity proportional to it
};

/// Neighbor mixing. omega_p = size_p / (own_size + sum of neighbor sizes).
Vector cfa_aggregate(const Vector& own, double own_size, std::span<const CfaNeighbor> neighbors,
                     double epsilon, SignConvention sign = SignConvention::attract);

/// psi - eta * grad.
Vector cfa_local_step(const Vector& psi, const Vector& grad, double eta);

/// eps_t = eps0 / (1 + t / tau). tau = infinity gives a constant rate.
struct MixingSchedule {
  double epsilon0 = 0.5;
  double tau = std::numeric_limits<double>::infinity();

  double at(Iteration t) const;
};

struct CfaStepRecord {
  Iteration t = 0;
  double epsilon = 0.0;
  std::vector<double> dwk;
  double local_objective = 0.0;  // sum_k weight_k F_k(w_k^{t+1})
  double dw = 0.0;               // movement of the weighted average model
  double consensus_gap = 0.0;    // max_k ||w_k - w_avg||
  double objective = 0.0;        // global objective at the weighted average

  double dwk_max() const;
};

/// Consensus-based federated averaging over a directed topology.
///
/// At iteration t each client takes, for every in-neighbor p, version
/// [t](k) of w_p when it is newer than the one already held, and otherwise
/// reuses the held version (whose age must stay within T_k). Then it mixes and
/// takes a full local gradient step on its unweighted F_k.
class CfaEngine {
 public:
  CfaEngine(std::vector<LossModel> models, Topology topology, DelaySchedule schedule,
            double learning_rate, MixingSchedule mixing,
            SignConvention sign = SignConvention::attract);

  CfaStepRecord step();

  Iteration t() const noexcept { return t_; }
  const std::vector<Vector>& client_models() const noexcept { return w_; }
  const std::vector<LossModel>& losses() const noexcept { return models_; }
  /// Data-weighted average of the client models.
  Vector average() const;

 private:
  std::vector<LossModel> models_;
  Topology topology_;
  DelaySchedule schedule_;
  double learning_rate_;
  MixingSchedule mixing_;
  SignConvention sign_;
  std::vector<Vector> w_;
  std::vector<VersionCache> history_;
  NeighborCache received_;
  Iteration t_ = 1;
};

}  // namespace dfl
