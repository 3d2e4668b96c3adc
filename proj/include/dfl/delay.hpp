#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

#include "dfl/types.hpp"

namespace dfl {

enum class DelayKind { zero, fixed, periodic, uniform_random };

std::string_view to_string(DelayKind kind);
DelayKind parse_delay_kind(std::string_view name);

/// Which parameter version each client uses at each iteration.
///
/// `version_index(k, t)` is the index [t](k) of the version client k consumes
/// at iteration t; `staleness(k, t) = t - [t](k)`. The index never precedes the
/// initial version (index 1). A schedule is only *valid* when every staleness
/// stays within the client's bound; invalid schedules are representable so that
/// violations can be detected and reported.
///
/// zero:            staleness 0.
/// fixed:           staleness `offset` for every client.
/// periodic:        staleness (t + k) mod period_k, period_k = `period` or T_k + 1.
/// uniform-random:  staleness uniform on {0..T_k}, a pure function of (seed, k, t).
///
/// Indices need not be monotone in t.
class DelaySchedule {
 public:
  DelaySchedule(DelayKind kind, std::vector<int> bounds, std::uint64_t seed = 0, int offset = 0,
                int period = 0);

  static DelaySchedule zero(std::size_t clients) {
    return DelaySchedule(DelayKind::zero, std::vector<int>(clients, 0));
  }

  DelayKind kind() const noexcept { return kind_; }
  std::size_t clients() const noexcept { return bounds_.size(); }
  int bound(std::size_t k) const { return bounds_.at(k); }
  const std::vector<int>& bounds() const noexcept { return bounds_; }
  int max_bound() const noexcept;

  Iteration version_index(std::size_t k, Iteration t) const;
  Iteration staleness(std::size_t k, Iteration t) const { return t - version_index(k, t); }

 private:
  DelayKind kind_;
  std::vector<int> bounds_;
  std::uint64_t seed_;
  int offset_;
  int period_;
};

struct ScheduleViolation {
  std::size_t client;
  Iteration t;
  Iteration index;
  int bound;
};

/// Every (k, t) with 1 <= t <= horizon whose staleness falls outside [0, T_k].
std::vector<ScheduleViolation> validate_schedule(const DelaySchedule& schedule, Iteration horizon,
                                                 std::size_t clients);

}  // namespace dfl
