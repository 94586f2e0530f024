#include <doctest.h>

#include <random>
#include <sstream>

#include "ani/errors.hpp"
#include "ani/io.hpp"
#include "oracles.hpp"

using namespace ani;

TEST_SUITE("io") {

TEST_CASE("edge list parsing") {
  std::istringstream in("# comment\n0 1\n\n  1 2  \n# nodes 5\n");
  const auto e = read_edge_list(in);
  CHECK(e.n == 5);
  CHECK(e.edges == std::vector<Edge>{{0, 1}, {1, 2}});
  std::istringstream bad("0 1 2\n");
  CHECK_THROWS_AS(read_edge_list(bad), InputError);
  std::istringstream neg("0 -1\n");
  CHECK_THROWS_AS(read_edge_list(neg), InputError);
  std::istringstream word("a b\n");
  CHECK_THROWS_AS(read_edge_list(word), InputError);
  CHECK_THROWS_AS(read_edge_list_file("/nonexistent/edges.txt"), InputError);
}

TEST_CASE("edge list round trip keeps isolated nodes") {
  std::mt19937_64 rng(1);
  const Graph g = oracle::erdos_renyi(30, 0.05, rng);
  std::ostringstream out;
  write_edge_list(out, build_graph({}, 3));
  std::istringstream iso(out.str());
  CHECK(read_edge_list(iso).n == 3);
  std::ostringstream os;
  write_edge_list(os, g);
  std::istringstream is(os.str());
  const auto e = read_edge_list(is);
  const Graph h = build_graph(e.edges, e.n);
  CHECK(h.size() == 30);
  CHECK(h.edges() == g.edges());
}

TEST_CASE("degree files") {
  std::istringstream in("# header\n3\n2\n\n1\n");
  CHECK(read_degrees(in) == std::vector<std::uint32_t>{3, 2, 1});
  std::istringstream bad("3\n2.5\n");
  CHECK_THROWS_AS(read_degrees(bad), InputError);
  const auto d = read_degrees_file(std::string(ANI_DATA_DIR) + "/calibration/degrees_805.txt");
  CHECK(d.size() == 805);
}

TEST_CASE("units CSV") {
  std::istringstream in("id,outcome,treatment,eligible,block\n1,2.5,1,1,0\n0,-1,,0,\n2,0,0,1,0\n");
  const auto u = read_units_csv(in);
  REQUIRE(u.size() == 3);
  CHECK(u.outcome == std::vector<double>{-1, 2.5, 0});
  CHECK(!u.treatment[0].has_value());
  CHECK(*u.treatment[1] == 1);
  CHECK(u.eligible == std::vector<bool>{false, true, true});
  CHECK(!u.block[0].has_value());
  CHECK(*u.block[2] == 0);

  std::ostringstream os;
  write_units_csv(os, u);
  std::istringstream back(os.str());
  const auto v = read_units_csv(back);
  CHECK(v.outcome == u.outcome);
  CHECK(v.treatment == u.treatment);
  CHECK(v.block == u.block);

  auto fails = [](const std::string& text) {
    std::istringstream s(text);
    CHECK_THROWS_AS(read_units_csv(s), InputError);
  };
  fails("");
  fails("id,y,d,e,b\n");
  fails("id,outcome,treatment,eligible,block\n0,1,2,1,\n");
  fails("id,outcome,treatment,eligible,block\n0,x,1,1,\n");
  fails("id,outcome,treatment,eligible,block\n0,1,1,1\n");
  fails("id,outcome,treatment,eligible,block\n0,1,1,1,\n0,1,1,1,\n");
  fails("id,outcome,treatment,eligible,block\n0,1,1,1,\n2,1,1,1,\n");
}

TEST_CASE("design from units") {
  std::istringstream plain("id,outcome,treatment,eligible,block\n0,0,1,1,\n1,0,0,0,\n2,0,0,1,\n");
  const auto b = design_from_units(read_units_csv(plain), 0.3);
  CHECK(b.is_bernoulli());
  CHECK(b.treat_probability(0) == 0.3);
  CHECK(b.treat_probability(1) == 0.0);

  std::istringstream blocked(
      "id,outcome,treatment,eligible,block\n0,0,1,1,4\n1,0,0,1,4\n2,0,1,1,4\n3,0,0,1,7\n4,0,1,1,7\n5,0,,0,\n");
  const auto d = design_from_units(read_units_csv(blocked), 0.5);
  REQUIRE(d.is_blocks());
  REQUIRE(d.block_list().size() == 2);
  CHECK(d.block_list()[0].treated == 2);
  CHECK(d.block_list()[1].treated == 1);
  CHECK(d.treat_probability(0) == doctest::Approx(2.0 / 3.0));
  CHECK(d.treat_probability(5) == 0.0);

  std::istringstream orphan("id,outcome,treatment,eligible,block\n0,0,1,1,0\n1,0,0,1,\n");
  CHECK_THROWS_AS(design_from_units(read_units_csv(orphan), 0.5), InputError);
}

}  // TEST_SUITE
