#include <doctest.h>

#include <map>
#include <random>

#include "ani/errors.hpp"
#include "ani/graph.hpp"
#include "oracles.hpp"

using namespace ani;

namespace {

std::map<NodeId, std::uint32_t> as_map(const std::vector<Reached>& r) {
  std::map<NodeId, std::uint32_t> m;
  for (auto x : r) m[x.node] = x.distance;
  return m;
}

}  // namespace

TEST_SUITE("graph") {

TEST_CASE("build_graph dedups and strips self-loops") {
  BuildReport rep;
  const std::vector<Edge> e{{0, 1}, {1, 0}, {1, 1}};
  const Graph g = build_graph(e, 2, true, &rep);
  CHECK(g.edge_count() == 1);
  CHECK(g.has_edge(0, 1));
  CHECK(g.has_edge(1, 0));
  CHECK(rep.self_loops_removed == 1);
  CHECK(rep.duplicates_removed == 1);
}

TEST_CASE("empty edge list") {
  const Graph g = build_graph({}, 3);
  CHECK(g.size() == 3);
  CHECK(g.edge_count() == 0);
  CHECK(g.average_degree() == 0.0);
}

TEST_CASE("directed cycle symmetrizes to a triangle") {
  const std::vector<Edge> e{{0, 1}, {1, 2}, {2, 0}};
  const Graph g = build_graph(e, 3, true);
  CHECK(g.edge_count() == 3);
  for (NodeId i = 0; i < 3; ++i) CHECK(g.degree(i) == 2);
}

TEST_CASE("asymmetric arcs without symmetrize are rejected") {
  const std::vector<Edge> e{{0, 1}};
  CHECK_THROWS_AS(build_graph(e, 2, false), InputError);
  const std::vector<Edge> both{{0, 1}, {1, 0}};
  CHECK(build_graph(both, 2, false).edge_count() == 1);
}

TEST_CASE("node id out of range") {
  const std::vector<Edge> e{{0, 3}};
  CHECK_THROWS_AS(build_graph(e, 3), InputError);
}

TEST_CASE("neighbor lists sorted and symmetric") {
  std::mt19937_64 rng(11);
  const Graph g = oracle::erdos_renyi(40, 0.15, rng);
  for (NodeId i = 0; i < g.size(); ++i) {
    const auto nb = g.neighbors(i);
    CHECK(std::is_sorted(nb.begin(), nb.end()));
    CHECK(std::adjacent_find(nb.begin(), nb.end()) == nb.end());
    for (auto j : nb) {
      CHECK(j != i);
      CHECK(g.has_edge(j, i));
    }
  }
}

TEST_CASE("capped_bfs examples") {
  const Graph p = oracle::path(3);
  CHECK(as_map(capped_bfs(p, 0, 1)) == std::map<NodeId, std::uint32_t>{{0, 0}, {1, 1}});
  CHECK(as_map(capped_bfs(p, 0, 5)) == std::map<NodeId, std::uint32_t>{{0, 0}, {1, 1}, {2, 2}});
  const Graph iso = build_graph({}, 4);
  CHECK(as_map(capped_bfs(iso, 2, 3)) == std::map<NodeId, std::uint32_t>{{2, 0}});
  CHECK(capped_bfs(p, 1, 0).size() == 1);
}

TEST_CASE("capped_bfs matches Floyd-Warshall, symmetric, triangle inequality") {
  std::mt19937_64 rng(3);
  for (int rep = 0; rep < 30; ++rep) {
    const std::size_t n = 5 + rep % 46;
    const Graph g = oracle::erdos_renyi(n, 2.5 / static_cast<double>(n), rng);
    const auto fw = oracle::floyd_warshall(g);
    for (std::uint32_t cap : {0u, 1u, 2u, 4u, 100u}) {
      for (NodeId s = 0; s < n; ++s) {
        const auto m = as_map(capped_bfs(g, s, cap));
        for (NodeId j = 0; j < n; ++j) {
          const bool within = fw[s][j] <= cap;
          REQUIRE(m.count(j) == (within ? 1u : 0u));
          if (within) REQUIRE(m.at(j) == fw[s][j]);
        }
      }
    }
    for (NodeId i = 0; i < n; ++i)
      for (NodeId j = 0; j < n; ++j) {
        CHECK(fw[i][j] == fw[j][i]);
        for (NodeId k = 0; k < n; ++k)
          if (fw[i][k] != oracle::kInf && fw[k][j] != oracle::kInf) CHECK(fw[i][j] <= fw[i][k] + fw[k][j]);
      }
  }
}

TEST_CASE("BfsWorkspace reuse gives the same answers") {
  std::mt19937_64 rng(8);
  const Graph g = oracle::erdos_renyi(60, 0.05, rng);
  BfsWorkspace ws(g.size());
  for (NodeId s = 0; s < g.size(); ++s) {
    const auto r = ws.run(g.links(), s, 3);
    const std::vector<Reached> copy(r.begin(), r.end());
    CHECK(copy == capped_bfs(g, s, 3));
  }
}

TEST_CASE("summary examples") {
  const Graph p = oracle::path(3);
  auto s = summary(p);
  CHECK(s.apl == doctest::Approx(4.0 / 3.0).epsilon(1e-15));
  CHECK(s.diameter == 2);
  CHECK(s.avg_degree == doctest::Approx(4.0 / 3.0).epsilon(1e-15));
  CHECK(s.largest_component_size == 3);
  CHECK(s.largest_component_fraction == 1.0);

  std::vector<Edge> k4;
  for (NodeId i = 0; i < 4; ++i)
    for (NodeId j = i + 1; j < 4; ++j) k4.emplace_back(i, j);
  s = summary(build_graph(k4, 4));
  CHECK(s.apl == 1.0);
  CHECK(s.diameter == 1);
  CHECK(s.avg_degree == 3.0);

  const std::vector<Edge> two{{0, 1}, {2, 3}};
  s = summary(build_graph(two, 4));
  CHECK(s.largest_component_size == 2);
  CHECK(s.apl == 1.0);
  CHECK(s.largest_component_fraction == 0.5);

  s = summary(build_graph({}, 5));
  CHECK(s.apl == 0.0);
  CHECK(s.diameter == 0);
  CHECK(s.largest_component_size == 1);
}

TEST_CASE("summary APL equals full distance matrix, any thread count") {
  std::mt19937_64 rng(5);
  for (int rep = 0; rep < 6; ++rep) {
    const std::size_t n = 50 + 30 * rep;
    const Graph g = oracle::erdos_renyi(n, 1.6 / static_cast<double>(n), rng);
    const auto fw = oracle::floyd_warshall(g);
    const auto comps = connected_components(g);
    std::size_t best = 0;
    for (std::size_t c = 1; c < comps.size(); ++c)
      if (comps[c].size() > comps[best].size()) best = c;
    double sum = 0;
    std::uint32_t diam = 0;
    for (auto i : comps[best])
      for (auto j : comps[best])
        if (i != j) sum += fw[i][j], diam = std::max(diam, fw[i][j]);
    const double m = static_cast<double>(comps[best].size());
    const auto s1 = summary(g, 1);
    const auto s3 = summary(g, 3);
    CHECK(std::abs(s1.apl - sum / (m * (m - 1))) < 1e-12);
    CHECK(s1.diameter == diam);
    CHECK(s1.apl <= s1.diameter);
    CHECK(s1.apl == s3.apl);
    CHECK(s1.diameter == s3.diameter);
    CHECK(s1.avg_degree == doctest::Approx(2.0 * g.edge_count() / static_cast<double>(n)));
  }
}

TEST_CASE("neighborhood_profile examples") {
  const auto prof = neighborhood_profile(oracle::path(3), 2, 2);
  CHECK(prof.boundary_mean()[0] == 1.0);
  CHECK(prof.boundary_mean()[1] == doctest::Approx(4.0 / 3.0));
  CHECK(prof.moment(1, 2) == doctest::Approx(17.0 / 3.0));
  const auto empty = neighborhood_profile(build_graph({}, 5), 3, 1);
  for (std::size_t s = 1; s <= 3; ++s) CHECK(empty.boundary_mean()[s] == 0.0);
}

TEST_CASE("neighborhood_profile invariants against Floyd-Warshall") {
  std::mt19937_64 rng(9);
  const Graph g = oracle::erdos_renyi(45, 0.08, rng);
  const auto fw = oracle::floyd_warshall(g);
  const std::uint32_t s_max = 5, k_max = 3;
  const auto prof = neighborhood_profile(g, s_max, k_max);
  double total = 0;
  for (std::uint32_t s = 0; s <= s_max; ++s) {
    double bsum = 0, moment[4] = {0, 0, 0, 0};
    for (NodeId i = 0; i < g.size(); ++i) {
      double ball = 0;
      for (NodeId j = 0; j < g.size(); ++j) {
        bsum += fw[i][j] == s;
        ball += fw[i][j] <= s;
      }
      for (std::uint32_t k = 0; k <= k_max; ++k) moment[k] += std::pow(ball, k);
    }
    CHECK(prof.boundary_mean()[s] == doctest::Approx(bsum / 45.0).epsilon(1e-14));
    for (std::uint32_t k = 0; k <= k_max; ++k) CHECK(prof.moment(s, k) == doctest::Approx(moment[k] / 45.0).epsilon(1e-14));
    total += prof.boundary_mean()[s];
    CHECK(prof.moment(s, 1) == doctest::Approx(total).epsilon(1e-14));
    if (s > 0)
      for (std::uint32_t k = 0; k <= k_max; ++k) CHECK(prof.moment(s, k) >= prof.moment(s - 1, k));
    for (std::uint32_t k = 1; k <= k_max; ++k) CHECK(prof.moment(s, k) >= prof.moment(s, k - 1));
  }
  CHECK(total <= 45.0);
}

}  // TEST_SUITE
