#include "ani/netgen.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "ani/errors.hpp"
#include "ani/rng.hpp"

namespace ani {

Graph configuration_model(std::span<const std::uint32_t> degrees, std::uint64_t seed, ConfigModelReport* report) {
  const std::size_t n = degrees.size();
  std::vector<std::uint32_t> deg(degrees.begin(), degrees.end());
  ConfigModelReport rep;

  std::uint64_t total = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (n > 0 && deg[i] >= n) {
      throw InputError("degree " + std::to_string(deg[i]) + " at node " + std::to_string(i) + " must be < n");
    }
    total += deg[i];
  }
  if (total % 2 == 1) {
    // Pad the last node that can still take another stub.
    for (std::size_t i = n; i-- > 0;) {
      if (deg[i] + 1 < n) {
        ++deg[i];
        ++total;
        rep.padded = true;
        rep.padded_node = i;
        break;
      }
    }
    if (!rep.padded) throw InputError("odd degree sum cannot be padded");
  }

  std::vector<NodeId> stubs;
  stubs.reserve(total);
  for (std::size_t i = 0; i < n; ++i) stubs.insert(stubs.end(), deg[i], static_cast<NodeId>(i));
  Rng rng = make_rng(seed);
  std::shuffle(stubs.begin(), stubs.end(), rng);

  std::vector<Edge> edges;
  edges.reserve(stubs.size() / 2);
  for (std::size_t k = 0; k + 1 < stubs.size(); k += 2) {
    if (stubs[k] == stubs[k + 1]) {
      ++rep.self_loops_erased;
      continue;
    }
    edges.emplace_back(stubs[k], stubs[k + 1]);
  }
  BuildReport build;
  Graph g = Graph::from_edges(edges, n, true, &build);
  rep.multi_edges_erased = build.duplicates_removed;
  if (report) *report = rep;
  return g;
}

double rgg_radius(std::size_t n, double kappa, RadiusRule rule) {
  const double base = kappa / (std::numbers::pi * static_cast<double>(n));
  return rule == RadiusRule::ExpectedDegree ? std::sqrt(base) : base * base;
}

Graph geometric_graph(const RggPlacement& placement) {
  const auto& pos = placement.positions;
  const std::size_t n = pos.size();
  const double r = placement.radius;
  const double r2 = r * r;

  const std::size_t cells = r > 0 ? std::clamp<std::size_t>(static_cast<std::size_t>(1.0 / r), 1, 4096) : 1;
  auto cell_of = [&](double x) {
    return std::min(cells - 1, static_cast<std::size_t>(x * static_cast<double>(cells)));
  };
  std::vector<std::vector<NodeId>> grid(cells * cells);
  for (NodeId i = 0; i < n; ++i) grid[cell_of(pos[i][0]) * cells + cell_of(pos[i][1])].push_back(i);

  // Cell width >= r, so all partners of i sit in the 3x3 block around its cell.
  std::vector<Edge> edges;
  for (NodeId i = 0; i < n; ++i) {
    const std::size_t cx = cell_of(pos[i][0]), cy = cell_of(pos[i][1]);
    for (std::size_t x = cx > 0 ? cx - 1 : 0; x <= std::min(cells - 1, cx + 1); ++x) {
      for (std::size_t y = cy > 0 ? cy - 1 : 0; y <= std::min(cells - 1, cy + 1); ++y) {
        for (NodeId j : grid[x * cells + y]) {
          if (j <= i) continue;
          const double dx = pos[i][0] - pos[j][0], dy = pos[i][1] - pos[j][1];
          if (dx * dx + dy * dy <= r2) edges.emplace_back(i, j);
        }
      }
    }
  }
  return Graph::from_edges(edges, n);
}

RggResult rgg(std::size_t n, double kappa, std::uint64_t seed, RadiusRule rule) {
  if (n < 1) throw InputError("rgg: n must be >= 1");
  if (!(kappa > 0)) throw InputError("rgg: kappa must be > 0");
  Rng rng = make_rng(seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  RggPlacement placement;
  placement.radius = rgg_radius(n, kappa, rule);
  placement.positions.resize(n);
  for (auto& p : placement.positions) {
    p[0] = unif(rng);
    p[1] = unif(rng);
  }
  Graph g = geometric_graph(placement);
  return {std::move(g), std::move(placement)};
}

}  // namespace ani
