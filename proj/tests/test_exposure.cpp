#include <doctest.h>

#include <random>

#include "ani/errors.hpp"
#include "ani/exposure.hpp"
#include "oracles.hpp"

using namespace ani;

TEST_SUITE("exposure") {

TEST_CASE("radius and support") {
  CHECK(exposure_radius(ExposureSpec::own_treatment()) == 0);
  CHECK(exposure_radius(ExposureSpec::any_treated_neighbor()) == 1);
  CHECK(exposure_radius(ExposureSpec::fraction_binned({0, 0.5, 1})) == 1);
  CHECK(ExposureSpec::any_treated_neighbor().support() == std::vector<ExposureValue>{0, 1});
  CHECK(ExposureSpec::fraction_binned({0, 0.25, 0.5, 1}).support() == std::vector<ExposureValue>{0, 1, 2});
}

TEST_CASE("parse and print") {
  CHECK(ExposureSpec::parse("own").kind() == ExposureSpec::Kind::OwnTreatment);
  CHECK(ExposureSpec::parse("any-nbr").kind() == ExposureSpec::Kind::AnyTreatedNeighbor);
  const auto f = ExposureSpec::parse("frac-nbr:0,0.5,1");
  CHECK(f.kind() == ExposureSpec::Kind::FractionTreatedNeighborsBinned);
  CHECK(f.bin_edges().size() == 3);
  CHECK(ExposureSpec::parse(f.to_string()).to_string() == f.to_string());
  CHECK_THROWS_AS(ExposureSpec::parse("nbr"), InputError);
  CHECK_THROWS_AS(ExposureSpec::parse("frac-nbr:0.5,0.2"), InputError);
}

TEST_CASE("star center sees a treated leaf") {
  const Graph g = oracle::star(3);
  const Assignment d{0, 0, 1, 0};
  const auto t = compute_exposures(ExposureSpec::any_treated_neighbor(), d, g);
  CHECK(t[0] == 1);
  CHECK(t[1] == 0);
  CHECK(t[2] == 0);
}

TEST_CASE("all untreated gives zero any-nbr exposure") {
  std::mt19937_64 rng(1);
  const Graph g = oracle::erdos_renyi(20, 0.3, rng);
  const Assignment d(20, 0);
  for (auto v : compute_exposures(ExposureSpec::any_treated_neighbor(), d, g)) CHECK(v == 0);
}

TEST_CASE("triangle fraction bins") {
  const std::vector<Edge> tri{{0, 1}, {1, 2}, {0, 2}};
  const Graph g = build_graph(tri, 3);
  const auto spec = ExposureSpec::fraction_binned({0, 0.5, 1});
  const Assignment d{1, 0, 0};
  const auto t = compute_exposures(spec, d, g);
  CHECK(spec.bin_of(0.5) == 1);
  CHECK(t[1] == 1);
  CHECK(t[2] == 1);
  CHECK(t[0] == 0);
  CHECK(spec.bin_of(1.0) == 1);
  CHECK(spec.bin_of(0.0) == 0);
}

TEST_CASE("isolated units fall in the lowest bin") {
  const Graph g = build_graph({}, 2);
  const Assignment d{1, 1};
  for (auto v : compute_exposures(ExposureSpec::fraction_binned({0, 0.5, 1}), d, g)) CHECK(v == 0);
}

TEST_CASE("directed out-links drive counts") {
  const std::vector<Edge> arcs{{0, 1}};
  const auto links = Adjacency::from_arcs(arcs, 2);
  const Assignment d{0, 1};
  const auto t = compute_exposures(ExposureSpec::any_treated_neighbor(), d, links);
  CHECK(t[0] == 1);
  CHECK(t[1] == 0);
}

TEST_CASE("locality: treatments outside the K-ball never change T_i") {
  std::mt19937_64 rng(7);
  const std::vector<ExposureSpec> specs{ExposureSpec::own_treatment(), ExposureSpec::any_treated_neighbor(),
                                        ExposureSpec::fraction_binned({0, 0.3, 0.7, 1})};
  for (int rep = 0; rep < 6; ++rep) {
    const std::size_t n = 6 + rep % 5;
    const Graph g = oracle::erdos_renyi(n, 0.35, rng);
    const auto fw = oracle::floyd_warshall(g);
    for (const auto& spec : specs) {
      for (std::size_t m = 0; m < (std::size_t{1} << n); ++m) {
        Assignment d(n);
        for (std::size_t k = 0; k < n; ++k) d[k] = (m >> k) & 1;
        const auto base = compute_exposures(spec, d, g);
        for (auto v : base) CHECK(spec.in_support(v));
        for (std::size_t j = 0; j < n; ++j) {
          Assignment flip = d;
          flip[j] ^= 1;
          const auto t = compute_exposures(spec, flip, g);
          for (std::size_t i = 0; i < n; ++i)
            if (fw[i][j] > spec.radius()) REQUIRE(t[i] == base[i]);
        }
      }
    }
  }
}

}  // TEST_SUITE
