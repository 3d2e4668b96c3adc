#pragma once

#include <cstdint>
#include <ostream>
#include <string_view>
#include <utility>
#include <vector>

namespace dfl {

enum class TopologyKind { ring, complete, erdos_renyi };

std::string_view to_string(TopologyKind kind);
TopologyKind parse_topology_kind(std::string_view name);

struct TopologySpec {
  TopologyKind kind = TopologyKind::ring;
  double edge_probability = 0.5;  // erdos-renyi only
  std::uint64_t seed = 0;
};

/// Directed edge p -> k: client k receives parameters from client p.
struct Edge {
  std::size_t from;
  std::size_t to;
  auto operator<=>(const Edge&) const = default;
};

/// Directed interaction graph over clients 0..K-1.
///
/// `in_neighbors(k)` is the open neighborhood (every p with p -> k, never k
/// itself); `closed_neighborhood(k)` additionally contains k.
class Topology {
 public:
  Topology(std::size_t clients, std::vector<Edge> edges, bool connectivity_required = true);

  std::size_t clients() const noexcept { return clients_; }
  const std::vector<Edge>& edges() const noexcept { return edges_; }
  const std::vector<std::size_t>& in_neighbors(std::size_t k) const { return in_.at(k); }
  std::vector<std::size_t> closed_neighborhood(std::size_t k) const;
  bool has_edge(std::size_t from, std::size_t to) const;

  /// True if the graph with edge directions ignored is connected.
  bool weakly_connected() const;

 private:
  std::size_t clients_;
  std::vector<Edge> edges_;
  std::vector<std::vector<std::size_t>> in_;
};

/// ring: k receives from k-1 and k+1 (mod K). complete: every ordered pair.
/// erdos-renyi: each ordered pair independently with probability p, resampled
/// until weakly connected (bounded retries).
Topology build_topology(const TopologySpec& spec, std::size_t clients,
                        bool connectivity_required = true);

/// One "p k" line per edge, 1-based.
void write_edge_list(const Topology& topology, std::ostream& out);

}  // namespace dfl
