#include "ani/graph.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <string>

#include "ani/errors.hpp"
#include "ani/parallel.hpp"

namespace ani {

Adjacency Adjacency::from_arcs(std::span<const Edge> arcs, std::size_t n, std::size_t* self_loops) {
  std::size_t loops = 0;
  std::vector<std::size_t> counts(n + 1, 0);
  for (const auto& [u, v] : arcs) {
    if (u >= n || v >= n) {
      throw InputError("node id " + std::to_string(std::max(u, v)) + " out of range for n = " + std::to_string(n));
    }
    if (u == v) {
      ++loops;
      continue;
    }
    ++counts[u + 1];
  }
  for (std::size_t i = 0; i < n; ++i) counts[i + 1] += counts[i];

  std::vector<NodeId> targets(counts[n]);
  std::vector<std::size_t> fill(counts.begin(), counts.end() - 1);
  for (const auto& [u, v] : arcs) {
    if (u != v) targets[fill[u]++] = v;
  }

  Adjacency adj;
  adj.offsets_.assign(n + 1, 0);
  adj.targets_.reserve(targets.size());
  for (std::size_t i = 0; i < n; ++i) {
    auto first = targets.begin() + static_cast<std::ptrdiff_t>(counts[i]);
    auto last = targets.begin() + static_cast<std::ptrdiff_t>(counts[i + 1]);
    std::sort(first, last);
    last = std::unique(first, last);
    adj.targets_.insert(adj.targets_.end(), first, last);
    adj.offsets_[i + 1] = adj.targets_.size();
  }
  if (self_loops) *self_loops = loops;
  return adj;
}

bool Adjacency::has_arc(NodeId i, NodeId j) const noexcept {
  const auto nb = neighbors(i);
  return std::binary_search(nb.begin(), nb.end(), j);
}

Graph Graph::from_edges(std::span<const Edge> edges, std::size_t n, bool symmetrize, BuildReport* report) {
  std::vector<Edge> arcs;
  arcs.reserve(edges.size() * (symmetrize ? 2 : 1));
  for (const auto& e : edges) {
    arcs.push_back(e);
    if (symmetrize) arcs.emplace_back(e.second, e.first);
  }
  std::size_t loops = 0;
  Adjacency adj = Adjacency::from_arcs(arcs, n, &loops);

  if (!symmetrize) {
    for (NodeId i = 0; i < n; ++i) {
      for (NodeId j : adj.neighbors(i)) {
        if (!adj.has_arc(j, i)) {
          throw InputError("arc " + std::to_string(i) + "->" + std::to_string(j) +
                           " has no reverse; build with symmetrization");
        }
      }
    }
  }
  if (report) {
    // Counts are in units of input pairs.
    const std::size_t loop_pairs = symmetrize ? loops / 2 : loops;
    const std::size_t offered_arcs = arcs.size() - loops;
    report->self_loops_removed = loop_pairs;
    report->duplicates_removed = (offered_arcs - adj.arc_count()) / (symmetrize ? 2 : 1);
  }
  return Graph(std::move(adj));
}

Graph Graph::empty(std::size_t n) { return from_edges({}, n); }

std::vector<Edge> Graph::edges() const {
  std::vector<Edge> out;
  out.reserve(edge_count());
  for (NodeId i = 0; i < size(); ++i) {
    for (NodeId j : neighbors(i)) {
      if (i < j) out.emplace_back(i, j);
    }
  }
  return out;
}

Graph build_graph(std::span<const Edge> edges, std::size_t n, bool symmetrize, BuildReport* report) {
  return Graph::from_edges(edges, n, symmetrize, report);
}

std::span<const Reached> BfsWorkspace::run(const Adjacency& adj, NodeId source, std::uint32_t cap) {
  if (dist_.size() < adj.size()) dist_.assign(adj.size(), kUnseen);
  for (const auto& r : out_) dist_[r.node] = kUnseen;
  out_.clear();

  dist_[source] = 0;
  out_.push_back({source, 0});
  for (std::size_t head = 0; head < out_.size(); ++head) {
    const Reached cur = out_[head];
    if (cur.distance == cap) break;
    for (NodeId v : adj.neighbors(cur.node)) {
      if (dist_[v] == kUnseen) {
        dist_[v] = cur.distance + 1;
        out_.push_back({v, cur.distance + 1});
      }
    }
  }
  return out_;
}

std::vector<Reached> capped_bfs(const Graph& g, NodeId source, std::uint32_t cap) {
  if (source >= g.size()) throw InputError("capped_bfs: source out of range");
  BfsWorkspace ws(g.size());
  const auto r = ws.run(g.links(), source, cap);
  return {r.begin(), r.end()};
}

std::vector<std::vector<NodeId>> connected_components(const Graph& g) {
  std::vector<std::vector<NodeId>> comps;
  std::vector<bool> seen(g.size(), false);
  for (NodeId s = 0; s < g.size(); ++s) {
    if (seen[s]) continue;
    std::vector<NodeId> comp{s};
    seen[s] = true;
    for (std::size_t head = 0; head < comp.size(); ++head) {
      for (NodeId v : g.neighbors(comp[head])) {
        if (!seen[v]) {
          seen[v] = true;
          comp.push_back(v);
        }
      }
    }
    std::sort(comp.begin(), comp.end());
    comps.push_back(std::move(comp));
  }
  return comps;
}

namespace {

struct BatchTotals {
  std::uint64_t distance_sum = 0;
  std::uint64_t pairs = 0;
  std::uint32_t eccentricity = 0;
};

// Word-parallel BFS: 64 sources advance together, one bit per source.
BatchTotals bit_parallel_bfs(const Graph& g, std::span<const NodeId> comp, std::span<const NodeId> sources) {
  const std::size_t n = g.size();
  std::vector<std::uint64_t> visited(n, 0), frontier(n, 0), next(n, 0);
  for (std::size_t k = 0; k < sources.size(); ++k) {
    visited[sources[k]] |= std::uint64_t{1} << k;
    frontier[sources[k]] |= std::uint64_t{1} << k;
  }
  BatchTotals t;
  for (std::uint32_t level = 1;; ++level) {
    bool any = false;
    for (NodeId v : comp) {
      std::uint64_t acc = 0;
      for (NodeId u : g.neighbors(v)) acc |= frontier[u];
      acc &= ~visited[v];
      next[v] = acc;
      if (acc) {
        any = true;
        const auto c = static_cast<std::uint64_t>(std::popcount(acc));
        t.pairs += c;
        t.distance_sum += c * level;
      }
    }
    if (!any) break;
    t.eccentricity = level;
    for (NodeId v : comp) {
      visited[v] |= next[v];
      frontier[v] = next[v];
    }
  }
  return t;
}

}  // namespace

GraphSummary summary(const Graph& g, std::size_t threads) {
  GraphSummary s;
  const std::size_t n = g.size();
  if (n == 0) return s;
  s.avg_degree = g.average_degree();

  const auto comps = connected_components(g);
  std::size_t best = 0;
  for (std::size_t c = 1; c < comps.size(); ++c) {
    if (comps[c].size() > comps[best].size()) best = c;
  }
  const auto& comp = comps[best];
  s.largest_component_size = comp.size();
  s.largest_component_fraction = static_cast<double>(comp.size()) / static_cast<double>(n);
  if (comp.size() < 2) return s;

  const std::size_t batches = (comp.size() + 63) / 64;
  std::vector<BatchTotals> totals(batches);
  parallel_for(batches, threads, [&](std::size_t b) {
    const std::size_t lo = b * 64;
    const std::size_t hi = std::min(comp.size(), lo + 64);
    totals[b] = bit_parallel_bfs(g, comp, std::span<const NodeId>(comp).subspan(lo, hi - lo));
  });
  std::uint64_t dist_sum = 0, pairs = 0;
  for (const auto& t : totals) {
    dist_sum += t.distance_sum;
    pairs += t.pairs;
    s.diameter = std::max(s.diameter, t.eccentricity);
  }
  s.apl = static_cast<double>(dist_sum) / static_cast<double>(pairs);
  return s;
}

NeighborhoodProfile neighborhood_profile(const Graph& g, std::uint32_t s_max, std::uint32_t k_max) {
  const std::size_t n = g.size();
  std::vector<double> boundary(s_max + 1, 0.0);
  std::vector<std::vector<double>> moments(s_max + 1, std::vector<double>(k_max + 1, 0.0));
  if (n == 0) return {std::move(boundary), std::move(moments)};

  BfsWorkspace ws(n);
  std::vector<std::uint64_t> shell(s_max + 1);
  for (NodeId i = 0; i < n; ++i) {
    std::fill(shell.begin(), shell.end(), 0);
    for (const auto& r : ws.run(g.links(), i, s_max)) ++shell[r.distance];
    std::uint64_t cum = 0;
    for (std::uint32_t s = 0; s <= s_max; ++s) {
      boundary[s] += static_cast<double>(shell[s]);
      cum += shell[s];
      double power = 1.0;
      for (std::uint32_t k = 0; k <= k_max; ++k) {
        moments[s][k] += power;
        power *= static_cast<double>(cum);
      }
    }
  }
  const double inv = 1.0 / static_cast<double>(n);
  for (auto& b : boundary) b *= inv;
  for (auto& row : moments) {
    for (auto& m : row) m *= inv;
  }
  return {std::move(boundary), std::move(moments)};
}

}  // namespace ani
