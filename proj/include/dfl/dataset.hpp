#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string_view>
#include <vector>

#include "dfl/types.hpp"

namespace dfl {

enum class LossKind { quadratic, least_squares, logistic, sigmoid_nonconvex };

std::string_view to_string(LossKind kind);
LossKind parse_loss_kind(std::string_view name);

/// n samples of dimension d with regression targets or +-1 class labels.
struct Dataset {
  Matrix features;  // n x d
  Vector labels;    // n
  bool classification = false;
  /// Ground-truth vector the generator used; empty for datasets loaded from disk.
  Vector hidden;

  Index n() const { return features.rows(); }
  Index d() const { return features.cols(); }

  /// Throws ConfigError when the shape or label-domain invariants do not hold.
  void validate() const;
};

/// Features are i.i.d. standard normal. Regression targets are <x, w*> plus
/// `noise`-scaled Gaussian noise; class labels are drawn as +1 with
/// probability sigmoid(<x, w*>).
Dataset generate_synthetic(LossKind kind, Index n, Index d, std::uint64_t seed,
                           double noise = 0.1);

enum class PartitionScheme { iid, shard_skew };

std::string_view to_string(PartitionScheme scheme);
PartitionScheme parse_partition_scheme(std::string_view name);

/// Disjoint cover of the sample indices {0..n-1} by K clients.
struct Partition {
  std::vector<std::vector<Index>> assignment;

  std::size_t clients() const { return assignment.size(); }
  std::size_t size_of(std::size_t k) const { return assignment.at(k).size(); }
};

/// iid: random equal-size split (sizes differ by at most one, larger shards first).
/// shard_skew: stable sort by label after a seeded shuffle, then contiguous shards.
Partition partition(const Dataset& data, std::size_t clients, PartitionScheme scheme,
                    std::uint64_t seed);

Dataset subset(const Dataset& data, std::span<const Index> rows);

/// Plain-text matrix format: "n d", then n rows of d numbers, then n labels.
Dataset load_dataset(const std::filesystem::path& path);
void save_dataset(const Dataset& data, const std::filesystem::path& path);

}  // namespace dfl
