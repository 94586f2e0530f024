#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <utility>
#include <vector>

namespace ani {

using NodeId = std::uint32_t;
using Edge = std::pair<NodeId, NodeId>;

// CSR neighbor lists. Used both for the symmetric graph and for directed
// out-link lists that feed exposure counts.
class Adjacency {
 public:
  Adjacency() : offsets_{0} {}

  // Builds from directed arcs; drops self-loops and duplicates, sorts each list.
  // Throws InputError on ids >= n.
  static Adjacency from_arcs(std::span<const Edge> arcs, std::size_t n, std::size_t* self_loops = nullptr);

  std::size_t size() const noexcept { return offsets_.size() - 1; }
  std::size_t arc_count() const noexcept { return targets_.size(); }
  std::span<const NodeId> neighbors(NodeId i) const noexcept {
    return {targets_.data() + offsets_[i], targets_.data() + offsets_[i + 1]};
  }
  std::size_t degree(NodeId i) const noexcept { return offsets_[i + 1] - offsets_[i]; }
  bool has_arc(NodeId i, NodeId j) const noexcept;

 private:
  std::vector<std::size_t> offsets_;
  std::vector<NodeId> targets_;
};

struct BuildReport {
  std::size_t self_loops_removed = 0;
  std::size_t duplicates_removed = 0;
};

// Immutable simple undirected graph: symmetric sorted neighbor lists, no
// self-loops, node ids 0..n-1.
class Graph {
 public:
  Graph() = default;

  // symmetrize = true treats every pair as an undirected edge. With false the
  // pairs are directed arcs that must already come in both directions.
  static Graph from_edges(std::span<const Edge> edges, std::size_t n, bool symmetrize = true,
                          BuildReport* report = nullptr);
  static Graph empty(std::size_t n);

  std::size_t size() const noexcept { return adj_.size(); }
  std::size_t edge_count() const noexcept { return adj_.arc_count() / 2; }
  std::span<const NodeId> neighbors(NodeId i) const noexcept { return adj_.neighbors(i); }
  std::size_t degree(NodeId i) const noexcept { return adj_.degree(i); }
  bool has_edge(NodeId i, NodeId j) const noexcept { return adj_.has_arc(i, j); }
  double average_degree() const noexcept {
    return size() == 0 ? 0.0 : 2.0 * static_cast<double>(edge_count()) / static_cast<double>(size());
  }
  const Adjacency& links() const noexcept { return adj_; }
  std::vector<Edge> edges() const;

 private:
  explicit Graph(Adjacency adj) : adj_(std::move(adj)) {}
  Adjacency adj_;
};

Graph build_graph(std::span<const Edge> edges, std::size_t n, bool symmetrize = true, BuildReport* report = nullptr);

struct Reached {
  NodeId node;
  std::uint32_t distance;
  friend bool operator==(const Reached&, const Reached&) = default;
};

// Reusable scratch for repeated capped BFS; one per thread.
class BfsWorkspace {
 public:
  explicit BfsWorkspace(std::size_t n = 0) : dist_(n, kUnseen) {}

  // Nodes within `cap` of `source` in BFS order, source first at distance 0.
  std::span<const Reached> run(const Adjacency& adj, NodeId source, std::uint32_t cap);

 private:
  static constexpr std::uint32_t kUnseen = UINT32_MAX;
  std::vector<std::uint32_t> dist_;
  std::vector<Reached> out_;
};

std::vector<Reached> capped_bfs(const Graph& g, NodeId source, std::uint32_t cap);

struct GraphSummary {
  double avg_degree = 0.0;
  double apl = 0.0;
  std::uint32_t diameter = 0;
  std::size_t largest_component_size = 1;
  double largest_component_fraction = 0.0;
};

// Node lists of connected components in order of their lowest node id.
std::vector<std::vector<NodeId>> connected_components(const Graph& g);

// APL and diameter over ordered pairs i != j of the largest component
// (ties go to the component holding the lowest node id).
GraphSummary summary(const Graph& g, std::size_t threads = 1);

class NeighborhoodProfile {
 public:
  NeighborhoodProfile(std::vector<double> boundary_mean, std::vector<std::vector<double>> moments)
      : boundary_mean_(std::move(boundary_mean)), moments_(std::move(moments)) {}

  // n^-1 sum_i |{j : l(i,j) = s}|
  std::span<const double> boundary_mean() const noexcept { return boundary_mean_; }
  // n^-1 sum_i |{j : l(i,j) <= s}|^k, for 0 <= s <= s_max and 0 <= k <= k_max.
  double moment(std::size_t s, std::size_t k) const { return moments_.at(s).at(k); }
  std::size_t s_max() const noexcept { return boundary_mean_.size() - 1; }
  std::size_t k_max() const noexcept { return moments_.front().size() - 1; }

 private:
  std::vector<double> boundary_mean_;
  std::vector<std::vector<double>> moments_;
};

NeighborhoodProfile neighborhood_profile(const Graph& g, std::uint32_t s_max, std::uint32_t k_max);

}  // namespace ani
