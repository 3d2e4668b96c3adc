#include "dfl/version_cache.hpp"

#include <stdexcept>
#include <string>

namespace dfl {

VersionCache::VersionCache(std::size_t capacity) : capacity_(capacity) {
  if (capacity_ == 0) throw ConfigError("version cache capacity must be at least 1");
}

void VersionCache::push(Iteration t, Vector w) {
  if (!entries_.empty() && t != entries_.back().first + 1) {
    throw std::logic_error("version cache: non-contiguous push of t=" + std::to_string(t) +
                           " after t=" + std::to_string(entries_.back().first));
  }
  entries_.emplace_back(t, std::move(w));
  if (entries_.size() > capacity_) entries_.pop_front();
}

bool VersionCache::contains(Iteration index) const noexcept {
  return !entries_.empty() && index >= entries_.front().first && index <= entries_.back().first;
}

const Vector& VersionCache::fetch(Iteration index) const {
  if (!contains(index)) {
    std::string held = entries_.empty()
                           ? std::string("nothing")
                           : std::to_string(entries_.front().first) + ".." +
                                 std::to_string(entries_.back().first);
    throw StalenessViolation("version " + std::to_string(index) +
                             " is not retained (cache holds " + held + ")");
  }
  return entries_[static_cast<std::size_t>(index - entries_.front().first)].second;
}

Iteration VersionCache::latest_index() const {
  if (entries_.empty()) throw std::logic_error("version cache is empty");
  return entries_.back().first;
}

void NeighborCache::deliver(std::size_t k, std::size_t p, Iteration index, const Vector& w) {
  auto [it, inserted] = latest_.try_emplace({k, p}, index, w);
  if (!inserted && index > it->second.first) it->second = {index, w};
}

NeighborCache::Version NeighborCache::latest_available(std::size_t k, std::size_t p, Iteration t,
                                                       int bound) const {
  const auto it = latest_.find({k, p});
  if (it == latest_.end()) {
    throw ColdStartError("client " + std::to_string(k + 1) + " never received from neighbor " +
                         std::to_string(p + 1));
  }
  const Iteration age = t - it->second.first;
  if (age > bound) {
    throw StalenessViolation("client " + std::to_string(k + 1) + " holds neighbor " +
                             std::to_string(p + 1) + " at age " + std::to_string(age) +
                             " > bound " + std::to_string(bound) + " (t=" + std::to_string(t) +
                             ")");
  }
  return {it->second.second, age};
}

Iteration NeighborCache::held_index(std::size_t k, std::size_t p) const noexcept {
  const auto it = latest_.find({k, p});
  return it == latest_.end() ? 0 : it->second.first;
}

}  // namespace dfl
