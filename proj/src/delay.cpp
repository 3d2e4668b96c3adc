#include "dfl/delay.hpp"

#include <algorithm>
#include <string>

#include "dfl/rng.hpp"

namespace dfl {

std::string_view to_string(DelayKind kind) {
  switch (kind) {
    case DelayKind::zero: return "zero";
    case DelayKind::fixed: return "fixed";
    case DelayKind::periodic: return "periodic";
    case DelayKind::uniform_random: return "uniform-random";
  }
  return "unknown";
}

DelayKind parse_delay_kind(std::string_view name) {
  if (name == "zero") return DelayKind::zero;
  if (name == "fixed") return DelayKind::fixed;
  if (name == "periodic") return DelayKind::periodic;
  if (name == "uniform-random") return DelayKind::uniform_random;
  throw ConfigError("unknown schedule kind '" + std::string(name) + "'");
}

DelaySchedule::DelaySchedule(DelayKind kind, std::vector<int> bounds, std::uint64_t seed,
                             int offset, int period)
    : kind_(kind), bounds_(std::move(bounds)), seed_(seed), offset_(offset), period_(period) {
  if (bounds_.empty()) throw ConfigError("delay schedule: no clients");
  for (std::size_t k = 0; k < bounds_.size(); ++k) {
    if (bounds_[k] < 0) {
      throw ConfigError("delay schedule: T for client " + std::to_string(k + 1) +
                        " is negative");
    }
  }
  if (offset_ < 0) throw ConfigError("delay schedule: fixed offset must be non-negative");
  if (period_ < 0) throw ConfigError("delay schedule: period must be non-negative");
}

int DelaySchedule::max_bound() const noexcept {
  return *std::max_element(bounds_.begin(), bounds_.end());
}

Iteration DelaySchedule::version_index(std::size_t k, Iteration t) const {
  const int bound = bounds_.at(k);
  Iteration s = 0;
  switch (kind_) {
    case DelayKind::zero:
      s = 0;
      break;
    case DelayKind::fixed:
      s = offset_;
      break;
    case DelayKind::periodic: {
      const Iteration period = period_ > 0 ? period_ : bound + 1;
      s = (t + static_cast<Iteration>(k)) % period;
      break;
    }
    case DelayKind::uniform_random:
      s = static_cast<Iteration>(hashed_below(seed_, k, static_cast<std::uint64_t>(t),
                                              static_cast<std::uint64_t>(bound) + 1));
      break;
  }
  return std::max<Iteration>(1, t - s);
}

std::vector<ScheduleViolation> validate_schedule(const DelaySchedule& schedule, Iteration horizon,
                                                 std::size_t clients) {
  std::vector<ScheduleViolation> out;
  const std::size_t n = std::min(clients, schedule.clients());
  for (Iteration t = 1; t <= horizon; ++t) {
    for (std::size_t k = 0; k < n; ++k) {
      const Iteration index = schedule.version_index(k, t);
      const Iteration s = t - index;
      if (s < 0 || s > schedule.bound(k) || index < 1) {
        out.push_back({k, t, index, schedule.bound(k)});
      }
    }
  }
  return out;
}

}  // namespace dfl
