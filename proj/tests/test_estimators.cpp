#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "ani/errors.hpp"
#include "ani/estimators.hpp"
#include "instances.hpp"
#include "oracles.hpp"

using namespace ani;

namespace {

PropensityTable flat_table(std::size_t n, double p1) {
  std::vector<double> pi;
  for (std::size_t i = 0; i < n; ++i) pi.insert(pi.end(), {1.0 - p1, p1});
  return PropensityTable(n, {0, 1}, pi, PropensityMethod::exact());
}

// Aronow-Samii sigma^2 straight from the printed display, with pair propensities from enumeration.
double as_oracle(const inst::Case& c, const inst::Enumerated& e, const std::vector<double>& y,
                 const std::vector<int>& tv, int t, int t0) {
  const auto T = inst::exposure_fn(c.g, c.exposure);
  auto pij = [&](NodeId i, NodeId j, int a, int b) {
    double s = 0;
    for (const auto& w : c.draws) s += w.prob * (T(w.d, i) == a && T(w.d, j) == b);
    return s;
  };
  const auto& u = e.units;
  const double n = static_cast<double>(u.size());
  auto V = [&](int a) {
    double s = 0;
    for (auto i : u) {
      const double pi = e.pi[i][a];
      const double yi = y[i] * (tv[i] == a);
      s += yi * yi / pi * (1 - pi) / pi;
      for (auto j : u) {
        if (j == i) continue;
        const double yj = y[j] * (tv[j] == a);
        const double pj = e.pi[j][a], pp = pij(i, j, a, a);
        if (pp != 0) s += yi * yj / pp * (pp - pi * pj) / (pi * pj);
        else s += yi * yi / (2 * pi) + yj * yj / (2 * pj);
      }
    }
    return s / n;
  };
  double C = 0;
  for (auto i : u)
    for (auto j : u) {
      const double yi = y[i] * (tv[i] == t), yj = y[j] * (tv[j] == t0);
      const double pi = e.pi[i][t], pj = e.pi[j][t0], pp = pij(i, j, t, t0);
      if (j != i && pp != 0) C -= yi * yj / pp * (pp - pi * pj) / (pi * pj);
      if (pp == 0) C += yi * yi / (2 * pi) + yj * yj / (2 * pj);
    }
  return V(t) + V(t0) + 2 * C / n;
}

}  // namespace

TEST_SUITE("estimators") {

TEST_CASE("ipw point example") {
  const auto pi = flat_table(2, 0.5);
  const Sample s = make_sample({0, 1}, {1.0, 0.0}, {1, 0}, pi);
  const auto r = ipw_point(s, 1, 0);
  CHECK(r.mu_t == 1.0);
  CHECK(r.mu_t0 == 0.0);
  CHECK(r.tau == 1.0);
  CHECK(r.n == 2);
  CHECK(r.n_eff_t == 1);
  CHECK(r.n_eff_t0 == 1);
  CHECK(r.z == std::vector<double>{2.0, 0.0});
  CHECK(ipw_scores(s, 1) == std::vector<double>{2.0, 0.0});
}

TEST_CASE("overlap violation names the unit") {
  std::vector<double> pi{0.5, 0.5, 0.0, 1.0, 0.5, 0.5};
  const PropensityTable table(3, {0, 1}, pi, PropensityMethod::exact());
  const Sample s = make_sample({0, 1, 2}, {1, 1, 1}, {1, 1, 0}, table);
  try {
    ipw_point(s, 1, 0);
    FAIL("expected OverlapError");
  } catch (const OverlapError& e) {
    CHECK(e.unit() == 1);
  }
}

TEST_CASE("constant outcomes give an unbiased zero contrast") {
  std::mt19937_64 rng(1);
  for (int rep = 0; rep < 6; ++rep) {
    const auto c = inst::make(rng, 7, rep % 2, ExposureSpec::any_treated_neighbor(), false);
    const auto model = OutcomeModel::custom(7, [](std::span<const std::uint8_t> d) { return std::vector<double>(d.size(), 2.5); });
    const auto e = inst::enumerate(c, model, 1, 0);
    double mean = 0;
    for (std::size_t k = 0; k < c.draws.size(); ++k)
      for (double z : e.z[k]) mean += c.draws[k].prob * z / static_cast<double>(e.units.size());
    CHECK(std::abs(mean) < 1e-12);
  }
}

TEST_CASE("variance helper") {
  const auto v = make_variance(4.0, 1.0, 16);
  CHECK(v.se == 0.5);
  CHECK(v.ci_lo == doctest::Approx(1.0 - 0.98));
  CHECK(v.ci_hi == doctest::Approx(1.0 + 0.98));
  CHECK(v.psd);
  const auto neg = make_variance(-1.0, 0.0, 4);
  CHECK(!neg.psd);
  CHECK(std::isnan(neg.se));
  CHECK(std::isnan(neg.ci_lo));
  CHECK(to_json(neg)["se"].is_null());
}

TEST_CASE("HAC small cases") {
  const Graph edge = oracle::path(2);
  const std::vector<NodeId> both{0, 1};
  const std::vector<double> x{-1.0, 1.0};
  CHECK(hac_quadratic(edge, both, x, 1) == 0.0);
  CHECK(hac_quadratic(edge, both, x, 0) == 1.0);

  // Z = (1, 3) through the full pipeline
  const auto pi = flat_table(2, 0.5);
  const Sample s = make_sample({0, 1}, {0.5, 1.5}, {1, 1}, pi);
  const auto r = ipw_point(s, 1, 0);
  CHECK(r.z == std::vector<double>{1.0, 3.0});
  CHECK(hac_variance(s, r, edge, 1).sigma2 == 0.0);
  CHECK(hac_variance(s, r, edge, 0).sigma2 == 1.0);
}

TEST_CASE("HAC equals the dense oracle, any thread count and labelling") {
  std::mt19937_64 rng(2);
  std::normal_distribution<double> z;
  for (int rep = 0; rep < 30; ++rep) {
    const std::size_t n = 5 + rep * 2;
    const Graph g = oracle::erdos_renyi(n, 3.0 / static_cast<double>(n), rng);
    const auto fw = oracle::floyd_warshall(g);
    std::vector<NodeId> units;
    for (NodeId i = 0; i < n; ++i)
      if (rng() % 3) units.push_back(i);
    if (units.empty()) units.push_back(0);
    std::vector<double> x(units.size());
    for (auto& v : x) v = z(rng);
    // relabelled copy
    std::vector<NodeId> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    std::vector<Edge> pe;
    for (const auto& [a, b] : g.edges()) pe.emplace_back(perm[a], perm[b]);
    const Graph h = build_graph(pe, n);
    std::vector<NodeId> pu;
    for (auto u : units) pu.push_back(perm[u]);
    for (std::uint32_t b : {0u, 1u, 2u, 3u, 50u}) {
      const double ref = oracle::hac_dense(fw, units, x, b);
      CHECK(std::abs(hac_quadratic(g, units, x, b, 1) - ref) < 1e-12);
      CHECK(hac_quadratic(g, units, x, b, 1) == hac_quadratic(g, units, x, b, 4));
      CHECK(std::abs(hac_quadratic(h, pu, x, b, 1) - ref) < 1e-12);
    }
  }
}

TEST_CASE("HAC variance centres Z and single-arm scores") {
  std::mt19937_64 rng(3);
  const auto c = inst::make(rng, 12, false, ExposureSpec::any_treated_neighbor(), true);
  const auto fw = oracle::floyd_warshall(c.g);
  const auto pi = propensity(c.design, c.exposure, c.g.links());
  const auto d = sample_assignment(c.design, 4);
  std::normal_distribution<double> z;
  std::vector<double> y(12);
  for (auto& v : y) v = z(rng);
  const auto units = units_with_eligible_neighbor(c.design, c.g.links());
  const auto tv = compute_exposures(c.exposure, d, c.g.links());
  const Sample s = make_sample(units, y, tv, pi);
  const auto r = ipw_point(s, 1, 0);
  for (std::uint32_t b : {0u, 1u, 2u}) {
    std::vector<double> xc, x1, x0;
    double m1 = 0, m0 = 0;
    for (auto i : units) {
      m1 += (tv[i] == 1) * y[i] / pi.pi(i, 1);
      m0 += (tv[i] == 0) * y[i] / pi.pi(i, 0);
    }
    m1 /= static_cast<double>(units.size());
    m0 /= static_cast<double>(units.size());
    for (std::size_t p = 0; p < units.size(); ++p) {
      const auto i = units[p];
      const double s1 = (tv[i] == 1) * y[i] / pi.pi(i, 1), s0 = (tv[i] == 0) * y[i] / pi.pi(i, 0);
      xc.push_back(s1 - s0 - (m1 - m0));
      x1.push_back(s1 - m1);
      x0.push_back(s0 - m0);
    }
    CHECK(std::abs(hac_variance(s, r, c.g, b).sigma2 - oracle::hac_dense(fw, units, xc, b)) < 1e-12);
    CHECK(std::abs(hac_variance(s, r, c.g, b, HacTarget::MuT).sigma2 - oracle::hac_dense(fw, units, x1, b)) < 1e-12);
    CHECK(std::abs(hac_variance(s, r, c.g, b, HacTarget::MuT0).sigma2 - oracle::hac_dense(fw, units, x0, b)) < 1e-12);
  }
  double sv = 0;
  for (double v : r.z) sv += (v - r.tau) * (v - r.tau);
  CHECK(hac_variance(s, r, c.g, 0).sigma2 == doctest::Approx(sv / static_cast<double>(units.size())).epsilon(1e-13));
}

TEST_CASE("bandwidth rule worked values") {
  auto at = [](double apl, double deg, std::size_t n, std::uint32_t k, bool literal = false) {
    GraphSummary s;
    s.apl = apl;
    s.avg_degree = deg;
    return bandwidth_rule(s, n, k, literal);
  };
  const auto a = at(3.37, 7.96, 3306, 1);
  CHECK(a.b == 2);
  CHECK(a.regime == "exponential");
  CHECK(a.b_tilde == doctest::Approx(1.685));
  CHECK(a.threshold == doctest::Approx(2 * std::log(3306.0) / std::log(7.96)));
  const auto b = at(18.444, 8.0, 1456, 1);
  CHECK(b.b == 3);
  CHECK(b.regime == "polynomial");
  CHECK(b.b_tilde == doctest::Approx(std::cbrt(18.444)));
  CHECK(at(3.471, 8.0, 805, 1).b == 2);
  CHECK(at(3.37, 7.96, 3306, 1, true).regime == "polynomial");
  const auto deg = at(2.0, 1.0, 10, 1);
  CHECK(deg.regime == "degenerate");
  CHECK(deg.b == 2);
  CHECK(!deg.warning.empty());
  CHECK(at(2.0, 3.0, 1, 0).b == 1);
  CHECK(at(5.0, 8.0, 1000, 0).b == 3);  // 2.5 rounds half up
  for (double apl : {2.0, 3.5, 9.0, 30.0})
    for (std::uint32_t k = 0; k < 4; ++k) CHECK(at(apl, 6.0, 900, k).b <= at(apl, 6.0, 900, k + 1).b);
}

TEST_CASE("units with an eligible neighbour") {
  const Graph g = oracle::path(5);
  const std::vector<NodeId> e{2};
  CHECK(units_with_eligible_neighbor(Design::bernoulli(5, e, 0.5), g.links()) == std::vector<NodeId>{1, 3});
  CHECK(all_units(3) == std::vector<NodeId>{0, 1, 2});
}

TEST_CASE("AS without interference") {
  const std::size_t n = 6;
  const Graph g = build_graph({}, n);
  std::vector<NodeId> all(n);
  std::iota(all.begin(), all.end(), 0);
  const auto design = Design::bernoulli(n, all, 0.5);
  const auto spec = ExposureSpec::own_treatment();
  const auto pi = propensity(design, spec, g.links());
  const std::vector<double> y{1, -2, 3, 0.5, 4, -1};
  const Assignment d{1, 0, 1, 1, 0, 0};
  const Sample s = make_sample(all, y, compute_exposures(spec, d, g.links()), pi);
  const auto r = ipw_point(s, 1, 0);
  const auto pairs = pairwise_propensity(design, spec, g.links(), all, 1, 0);
  double sq = 0, sq1 = 0;
  for (std::size_t i = 0; i < n; ++i) sq += y[i] * y[i], sq1 += d[i] * y[i] * y[i];
  // V(1) = 2 n^-1 sum Y^2 1(1), V(0) likewise; the diagonal surrogate adds n^-1 sum Y^2 to C
  CHECK(as_variance(s, r, pairs).sigma2 == doctest::Approx(2 * sq / n + 2 * sq / n).epsilon(1e-14));
  CHECK(sq1 > 0);
}

TEST_CASE("AS single unit") {
  const Graph g = build_graph({}, 1);
  const std::vector<NodeId> one{0};
  const auto design = Design::bernoulli(1, one, 0.5);
  const auto spec = ExposureSpec::own_treatment();
  const auto pi = propensity(design, spec, g.links());
  const Sample s = make_sample({0}, {3.0}, {1}, pi);
  const auto r = ipw_point(s, 1, 0);
  const auto pairs = pairwise_propensity(design, spec, g.links(), one, 1, 0);
  // V(1) = 9 * 2 * 1, V(0) = 0, C = diagonal surrogate 9 / (2 * 0.5)
  CHECK(as_variance(s, r, pairs).sigma2 == doctest::Approx(18.0 + 2 * 9.0));
}

TEST_CASE("AS equals the printed formula on every assignment") {
  std::mt19937_64 rng(4);
  for (int rep = 0; rep < 12; ++rep) {
    const auto spec = rep % 3 == 0 ? ExposureSpec::own_treatment() : ExposureSpec::any_treated_neighbor();
    const auto c = inst::make(rng, 6 + rep % 3, rep % 2, spec, false);
    const auto model = inst::table_model(c, rng, false);
    const auto e = inst::enumerate(c, model, 1, 0);
    if (e.units.empty()) continue;
    const auto pi = propensity(c.design, spec, c.g.links());
    const auto pairs = pairwise_propensity(c.design, spec, c.g.links(), e.units, 1, 0);
    for (std::size_t k = 0; k < c.draws.size(); ++k) {
      std::vector<ExposureValue> tv(e.t[k].begin(), e.t[k].end());
      const Sample s = make_sample(e.units, e.y[k], tv, pi);
      const auto r = ipw_point(s, 1, 0);
      REQUIRE(std::abs(as_variance(s, r, pairs).sigma2 - as_oracle(c, e, e.y[k], e.t[k], 1, 0)) < 1e-10);
    }
  }
}

TEST_CASE("AS expectation identity and exact bias terms") {
  std::mt19937_64 rng(5);
  int checked = 0;
  for (int rep = 0; rep < 16; ++rep) {
    const auto spec = rep % 4 == 0 ? ExposureSpec::own_treatment() : ExposureSpec::any_treated_neighbor();
    const auto c = inst::make(rng, 5 + rep % 2, rep % 2, spec, false, 6);
    const auto model = inst::table_model(c, rng, false);
    const auto e = inst::enumerate(c, model, 1, 0);
    if (e.units.size() < 2) continue;
    const auto pi = propensity(c.design, spec, c.g.links());
    const auto pairs = pairwise_propensity(c.design, spec, c.g.links(), e.units, 1, 0);
    const double m = static_cast<double>(e.units.size());
    double eas = 0, var = 0;
    for (std::size_t k = 0; k < c.draws.size(); ++k) {
      std::vector<ExposureValue> tv(e.t[k].begin(), e.t[k].end());
      const Sample s = make_sample(e.units, e.y[k], tv, pi);
      const auto r = ipw_point(s, 1, 0);
      eas += c.draws[k].prob * as_variance(s, r, pairs).sigma2;
      var += c.draws[k].prob * m * (r.tau - e.tau) * (r.tau - e.tau);
    }
    // R_AS from potential outcomes and enumerated pair zeros
    const auto T = inst::exposure_fn(c.g, c.exposure);
    auto zero = [&](NodeId i, NodeId j, int a, int b) {
      for (const auto& w : c.draws)
        if (T(w.d, i) == a && T(w.d, j) == b) return false;
      return true;
    };
    double ras = 0;
    for (auto i : e.units) {
      const double yi1 = *model.potential(i, 1), yi0 = *model.potential(i, 0);
      ras += (yi1 - yi0) * (yi1 - yi0);
      for (auto j : e.units) {
        if (j == i) continue;
        const double yj1 = *model.potential(j, 1), yj0 = *model.potential(j, 0);
        ras += 0.5 * ((yi1 + yj1) * (yi1 + yj1) * zero(i, j, 1, 1) + 2 * (yi1 - yj0) * (yi1 - yj0) * zero(i, j, 1, 0) +
                      (yi0 + yj0) * (yi0 + yj0) * zero(i, j, 0, 0));
      }
    }
    ras /= m;
    CHECK(std::abs(eas - var - ras) < 1e-10);
    const auto ex = exact_estimands(model, c.design, spec, c.g, 1, 0, 2 * spec.radius());
    REQUIRE(ex.r_n_as.has_value());
    REQUIRE(ex.expected_as.has_value());
    CHECK(std::abs(*ex.r_n_as - ras) < 1e-10);
    CHECK(std::abs(*ex.expected_as - eas) < 1e-10);
    CHECK(std::abs(ex.true_variance - var) < 1e-10);
    ++checked;
  }
  CHECK(checked >= 8);
}

TEST_CASE("exact estimands: own treatment, Y = d") {
  const Graph g = oracle::path(4);
  const std::vector<NodeId> all{0, 1, 2, 3};
  const auto model = OutcomeModel::custom(4, [](std::span<const std::uint8_t> d) {
    return std::vector<double>(d.begin(), d.end());
  });
  const auto ex = exact_estimands(model, Design::bernoulli(4, all, 0.3), ExposureSpec::own_treatment(), g, 1, 0, 0);
  for (std::size_t p = 0; p < 4; ++p) {
    CHECK(ex.mu_t[p] == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(ex.mu_t0[p] == 0.0);
  }
  CHECK(ex.tau == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(ex.expected_tau == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(ex.assignments == 16);
  CHECK(ex.r_n == doctest::Approx(0.0));
}

TEST_CASE("exact estimands: 5-node path, linear-in-means") {
  const Graph g = oracle::path(5);
  const std::vector<NodeId> all{0, 1, 2, 3, 4};
  const auto design = Design::bernoulli(5, all, 0.5);
  const auto spec = ExposureSpec::any_treated_neighbor();
  const auto model = ModelSpec{ModelSpec::Kind::LinearInMeans, -1, 0.5, 1, 1}.build(g, {});
  const auto ex = exact_estimands(model, design, spec, g, 1, 0, 2);
  CHECK(ex.assignments == 32);
  inst::Case c{g, design, spec, oracle::enumerate_bernoulli(5, all, 0.5)};
  const auto e = inst::enumerate(c, model, 1, 0);
  double mean = 0;
  for (std::size_t k = 0; k < c.draws.size(); ++k) {
    double tau = 0;
    for (double z : e.z[k]) tau += z;
    mean += c.draws[k].prob * tau / static_cast<double>(e.units.size());
  }
  CHECK(std::abs(mean - ex.tau) < 1e-12);
  CHECK(std::abs(e.tau - ex.tau) < 1e-12);
  CHECK(!ex.r_n_as.has_value());
}

TEST_CASE("exact estimands exclude units without overlap") {
  const Graph g = oracle::path(4);
  const std::vector<NodeId> e{1};
  const auto model = OutcomeModel::custom(4, [](std::span<const std::uint8_t> d) {
    return std::vector<double>(d.size(), 1.0);
  });
  const auto ex = exact_estimands(model, Design::bernoulli(4, e, 0.5), ExposureSpec::any_treated_neighbor(), g, 1, 0, 2);
  CHECK(ex.excluded == std::vector<NodeId>{1, 3});
  CHECK(ex.units == std::vector<NodeId>{0, 2});
  std::vector<NodeId> many(22);
  std::iota(many.begin(), many.end(), 0);
  const Graph big = oracle::path(22);
  const auto m2 = OutcomeModel::custom(22, [](std::span<const std::uint8_t> d) { return std::vector<double>(d.size(), 1.0); });
  CHECK_THROWS_AS(exact_estimands(m2, Design::bernoulli(22, many, 0.5), ExposureSpec::own_treatment(), big, 1, 0, 0),
                  CapacityError);
}

TEST_CASE("bias decomposition and homogeneous effects") {
  std::mt19937_64 rng(6);
  for (int rep = 0; rep < 10; ++rep) {
    const auto spec = rep % 3 == 0 ? ExposureSpec::own_treatment() : ExposureSpec::any_treated_neighbor();
    const bool homogeneous = rep % 2 == 0;
    const auto c = inst::make(rng, 6 + rep % 3, rep % 4 >= 2, spec, true);
    const auto model = inst::table_model(c, rng, homogeneous);
    const auto fw = oracle::floyd_warshall(c.g);
    std::uint32_t diam = 0;
    for (const auto& row : fw)
      for (auto v : row) diam = std::max(diam, v);
    const auto ex = exact_estimands(model, c.design, spec, c.g, 1, 0, diam);
    const auto e = inst::enumerate(c, model, 1, 0);
    REQUIRE(ex.units == e.units);
    double ehac = 0;
    for (std::size_t k = 0; k < c.draws.size(); ++k) {
      double tau = 0;
      for (double z : e.z[k]) tau += z;
      tau /= static_cast<double>(e.units.size());
      std::vector<double> x;
      for (double z : e.z[k]) x.push_back(z - tau);
      ehac += c.draws[k].prob * oracle::hac_dense(fw, e.units, x, diam);
    }
    CHECK(std::abs(ex.expected_hac - ehac) < 1e-10);
    CHECK(std::abs(ehac - ex.true_variance - ex.r_n - ex.cross_term) < 1e-10);
    CHECK(std::abs(ex.hac_star - ex.true_variance) < 1e-10);
    std::vector<double> dev;
    for (double v : e.tau_i) dev.push_back(v - e.tau);
    CHECK(std::abs(ex.r_n - oracle::hac_dense(fw, e.units, dev, diam)) < 1e-12);
    CHECK(std::abs(r_n_term(c.g, e.units, e.tau_i, diam) - ex.r_n) < 1e-12);
    // b covers the diameter, so the centred quadratic form vanishes draw by draw
    CHECK(std::abs(ex.expected_hac) < 1e-10);
    if (homogeneous) CHECK(ex.r_n == 0.0);
  }
}

TEST_CASE("report serialization") {
  const auto pi = flat_table(2, 0.5);
  const Sample s = make_sample({0, 1}, {1.0 / 3.0, 0.0}, {1, 0}, pi);
  auto r = ipw_point(s, 1, 0);
  r.variance["hac"] = make_variance(0.25, r.tau, 2);
  r.variance["naive"] = make_variance(-1.0, r.tau, 2);
  const auto j = to_json(r);
  for (const char* key : {"mu_t", "mu_t0", "tau", "n", "n_eff_t", "n_eff_t0", "variance"}) CHECK(j.contains(key));
  CHECK(j["mu_t"].get<double>() == 0.333333333333);
  CHECK(j["variance"]["hac"].contains("psd"));
  CHECK(j["variance"]["naive"]["se"].is_null());
  CHECK(round_sig(2.0 / 3.0) == 0.666666666667);
}

}  // TEST_SUITE
