#include "dfl/topology.hpp"

#include <algorithm>
#include <queue>
#include <string>

#include "dfl/rng.hpp"
#include "dfl/types.hpp"

namespace dfl {

namespace {
constexpr int kMaxConnectivityRetries = 1000;
}

std::string_view to_string(TopologyKind kind) {
  switch (kind) {
    case TopologyKind::ring: return "ring";
    case TopologyKind::complete: return "complete";
    case TopologyKind::erdos_renyi: return "erdos-renyi";
  }
  return "unknown";
}

TopologyKind parse_topology_kind(std::string_view name) {
  if (name == "ring") return TopologyKind::ring;
  if (name == "complete") return TopologyKind::complete;
  if (name == "erdos-renyi") return TopologyKind::erdos_renyi;
  throw ConfigError("unknown topology kind '" + std::string(name) + "'");
}

Topology::Topology(std::size_t clients, std::vector<Edge> edges, bool connectivity_required)
    : clients_(clients), edges_(std::move(edges)), in_(clients) {
  std::sort(edges_.begin(), edges_.end());
  edges_.erase(std::unique(edges_.begin(), edges_.end()), edges_.end());
  for (const Edge& e : edges_) {
    if (e.from >= clients_ || e.to >= clients_) {
      throw TopologyError("edge (" + std::to_string(e.from + 1) + " -> " +
                          std::to_string(e.to + 1) + ") references an unknown client");
    }
    if (e.from == e.to) {
      throw TopologyError("self-loop on client " + std::to_string(e.from + 1));
    }
    in_[e.to].push_back(e.from);
  }
  for (auto& nb : in_) std::sort(nb.begin(), nb.end());

  if (connectivity_required && !weakly_connected()) {
    throw TopologyError("interaction graph is not weakly connected");
  }
}

std::vector<std::size_t> Topology::closed_neighborhood(std::size_t k) const {
  std::vector<std::size_t> out = in_.at(k);
  out.insert(std::upper_bound(out.begin(), out.end(), k), k);
  return out;
}

bool Topology::has_edge(std::size_t from, std::size_t to) const {
  return std::binary_search(edges_.begin(), edges_.end(), Edge{from, to});
}

bool Topology::weakly_connected() const {
  if (clients_ <= 1) return true;
  std::vector<std::vector<std::size_t>> undirected(clients_);
  for (const Edge& e : edges_) {
    undirected[e.from].push_back(e.to);
    undirected[e.to].push_back(e.from);
  }
  std::vector<bool> seen(clients_, false);
  std::queue<std::size_t> frontier;
  frontier.push(0);
  seen[0] = true;
  std::size_t reached = 1;
  while (!frontier.empty()) {
    const std::size_t v = frontier.front();
    frontier.pop();
    for (std::size_t u : undirected[v]) {
      if (!seen[u]) {
        seen[u] = true;
        ++reached;
        frontier.push(u);
      }
    }
  }
  return reached == clients_;
}

Topology build_topology(const TopologySpec& spec, std::size_t clients,
                        bool connectivity_required) {
  if (clients < 2) throw ConfigError("topology: need at least 2 clients");

  std::vector<Edge> edges;
  switch (spec.kind) {
    case TopologyKind::ring:
      for (std::size_t k = 0; k < clients; ++k) {
        edges.push_back({(k + clients - 1) % clients, k});
        edges.push_back({(k + 1) % clients, k});
      }
      return Topology(clients, std::move(edges), connectivity_required);
    case TopologyKind::complete:
      for (std::size_t k = 0; k < clients; ++k)
        for (std::size_t p = 0; p < clients; ++p)
          if (p != k) edges.push_back({p, k});
      return Topology(clients, std::move(edges), connectivity_required);
    case TopologyKind::erdos_renyi: {
      const double prob = spec.edge_probability;
      if (!(prob > 0.0 && prob <= 1.0)) {
        throw ConfigError("erdos-renyi: edge probability must lie in (0, 1]");
      }
      Rng rng(spec.seed);
      for (int attempt = 0; attempt < kMaxConnectivityRetries; ++attempt) {
        edges.clear();
        for (std::size_t p = 0; p < clients; ++p)
          for (std::size_t k = 0; k < clients; ++k)
            if (p != k && rng.uniform() < prob) edges.push_back({p, k});
        Topology candidate(clients, edges, false);
        if (!connectivity_required || candidate.weakly_connected()) return candidate;
      }
      throw TopologyError("erdos-renyi: no weakly connected graph after " +
                          std::to_string(kMaxConnectivityRetries) + " draws");
    }
  }
  throw ConfigError("unknown topology kind");
}

void write_edge_list(const Topology& topology, std::ostream& out) {
  for (const Edge& e : topology.edges()) out << e.from + 1 << ' ' << e.to + 1 << '\n';
}

}  // namespace dfl
