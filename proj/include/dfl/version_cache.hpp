#pragma once

#include <deque>
#include <map>
#include <utility>

#include "dfl/types.hpp"

namespace dfl {

/// Ring of the most recent `capacity` parameter versions, keyed by iteration.
///
/// Pushes must be contiguous (t = last + 1). Fetching an evicted or
/// never-pushed index throws StalenessViolation: with capacity max_k T_k + 1
/// that can only happen if the delay bound was breached.
class VersionCache {
 public:
  explicit VersionCache(std::size_t capacity);

  void push(Iteration t, Vector w);
  const Vector& fetch(Iteration index) const;
  bool contains(Iteration index) const noexcept;

  std::size_t capacity() const noexcept { return capacity_; }
  std::size_t size() const noexcept { return entries_.size(); }
  bool empty() const noexcept { return entries_.empty(); }
  Iteration latest_index() const;

 private:
  std::size_t capacity_;
  std::deque<std::pair<Iteration, Vector>> entries_;
};

/// Latest version of each neighbor a client has received (the reuse rule).
class NeighborCache {
 public:
  struct Version {
    Vector w;
    Iteration age;
  };

  /// Records `w` as neighbor p's version `index` at client k, unless a newer one is held.
  void deliver(std::size_t k, std::size_t p, Iteration index, const Vector& w);

  /// Most recent w_p held by k at iteration t. Throws ColdStartError if nothing
  /// was ever received and StalenessViolation if its age exceeds `bound`.
  Version latest_available(std::size_t k, std::size_t p, Iteration t, int bound) const;

  /// Index of the held version, or 0 if none.
  Iteration held_index(std::size_t k, std::size_t p) const noexcept;

 private:
  std::map<std::pair<std::size_t, std::size_t>, std::pair<Iteration, Vector>> latest_;
};

}  // namespace dfl
