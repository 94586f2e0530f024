#include "ani/estimators.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <limits>

#include "ani/errors.hpp"
#include "ani/parallel.hpp"

namespace ani {

namespace {

constexpr double kZ = 1.96;
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

struct UnitArrays {
  std::vector<double> y;
  std::vector<std::uint8_t> in_t, in_t0;
  std::vector<double> pi_t, pi_t0;
};

// sigma2_AS over units 0..m-1; pair index p maps unit p into `pairs`.
double as_sigma2(const UnitArrays& u, const PairPropensity& pairs, std::span<const std::size_t> pos) {
  const std::size_t m = u.y.size();
  if (m == 0) return 0.0;
  auto one_arm = [&](std::size_t arm) {
    const auto& in = arm == 0 ? u.in_t : u.in_t0;
    const auto& pi = arm == 0 ? u.pi_t : u.pi_t0;
    double v = 0.0;
    for (std::size_t p = 0; p < m; ++p) {
      if (in[p]) v += u.y[p] * u.y[p] / pi[p] * (1.0 - pi[p]) / pi[p];
    }
    for (std::size_t p = 0; p < m; ++p) {
      for (std::size_t q = 0; q < m; ++q) {
        if (p == q) continue;
        if (pairs.is_zero(arm, arm, pos[p], pos[q])) {
          v += (in[p] ? u.y[p] * u.y[p] / (2.0 * pi[p]) : 0.0) + (in[q] ? u.y[q] * u.y[q] / (2.0 * pi[q]) : 0.0);
        } else if (in[p] && in[q]) {
          const double pij = pairs(arm, arm, pos[p], pos[q]);
          v += u.y[p] * u.y[q] / pij * (pij - pi[p] * pi[q]) / (pi[p] * pi[q]);
        }
      }
    }
    return v / static_cast<double>(m);
  };
  double c = 0.0;
  for (std::size_t p = 0; p < m; ++p) {
    for (std::size_t q = 0; q < m; ++q) {
      if (pairs.is_zero(0, 1, pos[p], pos[q])) {
        c += (u.in_t[p] ? u.y[p] * u.y[p] / (2.0 * u.pi_t[p]) : 0.0) +
             (u.in_t0[q] ? u.y[q] * u.y[q] / (2.0 * u.pi_t0[q]) : 0.0);
      } else if (p != q && u.in_t[p] && u.in_t0[q]) {
        const double pij = pairs(0, 1, pos[p], pos[q]);
        c -= u.y[p] * u.y[q] / pij * (pij - u.pi_t[p] * u.pi_t0[q]) / (u.pi_t[p] * u.pi_t0[q]);
      }
    }
  }
  c /= static_cast<double>(m);
  return one_arm(0) + one_arm(1) + 2.0 * c;
}

nlohmann::json num(double x) {
  if (!std::isfinite(x)) return nullptr;
  return round_sig(x);
}

}  // namespace

Sample make_sample(std::vector<NodeId> units, std::vector<double> outcomes, std::vector<ExposureValue> exposures,
                   const PropensityTable& propensities) {
  if (outcomes.size() != exposures.size()) throw InputError("outcome and exposure vectors differ in length");
  if (propensities.size() != outcomes.size()) throw InputError("propensity table does not match the network");
  for (NodeId i : units) {
    if (i >= outcomes.size()) throw InputError("sample unit " + std::to_string(i) + " out of range");
  }
  return Sample{std::move(units), std::move(outcomes), std::move(exposures), &propensities};
}

std::vector<NodeId> all_units(std::size_t n) {
  std::vector<NodeId> u(n);
  for (std::size_t i = 0; i < n; ++i) u[i] = static_cast<NodeId>(i);
  return u;
}

std::vector<NodeId> units_with_eligible_neighbor(const Design& design, const Adjacency& links) {
  std::vector<NodeId> out;
  for (NodeId i = 0; i < links.size(); ++i) {
    for (NodeId j : links.neighbors(i)) {
      if (design.treat_probability(j) > 0.0) {
        out.push_back(i);
        break;
      }
    }
  }
  return out;
}

VarianceEstimate make_variance(double sigma2, double center, std::size_t n) {
  VarianceEstimate v;
  v.sigma2 = sigma2;
  v.psd = sigma2 >= 0.0;
  if (v.psd && n > 0) {
    v.se = std::sqrt(sigma2 / static_cast<double>(n));
    v.ci_lo = center - kZ * v.se;
    v.ci_hi = center + kZ * v.se;
  } else {
    v.se = v.ci_lo = v.ci_hi = kNaN;
  }
  return v;
}

BandwidthChoice bandwidth_rule(const GraphSummary& summary, std::size_t n, std::uint32_t k, bool literal) {
  BandwidthChoice c;
  c.literal = literal;
  const double floor_b = 2.0 * static_cast<double>(k);
  if (n < 2 || !(summary.avg_degree > 1.0)) {
    c.regime = "degenerate";
    c.b = static_cast<std::uint32_t>(std::max(1.0, floor_b));
    c.warning = "regime test undefined (needs n >= 2 and average degree > 1); using max(1, 2K)";
    return c;
  }
  c.threshold = 2.0 * std::log(static_cast<double>(n)) / std::log(summary.avg_degree);
  const bool exponential = literal ? summary.apl > c.threshold : summary.apl <= c.threshold;
  c.regime = exponential ? "exponential" : "polynomial";
  c.b_tilde = exponential ? summary.apl / 2.0 : std::cbrt(summary.apl);
  c.b = static_cast<std::uint32_t>(std::floor(std::max(c.b_tilde, floor_b) + 0.5));
  return c;
}

EstimateReport ipw_point(const Sample& sample, ExposureValue t, ExposureValue t0) {
  if (!sample.propensities) throw InputError("sample has no propensity table");
  const auto& pi = *sample.propensities;
  EstimateReport r;
  r.t = t;
  r.t0 = t0;
  r.n = sample.size();
  if (r.n == 0) throw InputError("empty sample");
  r.z.resize(r.n);
  std::vector<double> a(r.n, 0.0), b(r.n, 0.0);
  for (std::size_t p = 0; p < r.n; ++p) {
    const NodeId i = sample.units[p];
    const double pt = pi.pi(i, t), pt0 = pi.pi(i, t0);
    for (double v : {pt, pt0}) {
      if (!(v > 0.0 && v < 1.0)) {
        throw OverlapError("unit " + std::to_string(i) + " has propensity " + std::to_string(v) +
                               " outside (0, 1) for a contrasted exposure",
                           i);
      }
    }
    const double y = sample.outcomes[i];
    if (sample.exposures[i] == t) {
      a[p] = y / pt;
      ++r.n_eff_t;
    } else if (sample.exposures[i] == t0) {
      b[p] = y / pt0;
      ++r.n_eff_t0;
    }
    r.z[p] = a[p] - b[p];
  }
  const double n = static_cast<double>(r.n);
  r.mu_t = pairwise_sum(a) / n;
  r.mu_t0 = pairwise_sum(b) / n;
  r.tau = r.mu_t - r.mu_t0;
  return r;
}

std::vector<double> ipw_scores(const Sample& sample, ExposureValue t) {
  const auto& pi = *sample.propensities;
  std::vector<double> s(sample.size(), 0.0);
  for (std::size_t p = 0; p < s.size(); ++p) {
    const NodeId i = sample.units[p];
    if (sample.exposures[i] == t) s[p] = sample.outcomes[i] / pi.pi(i, t);
  }
  return s;
}

double hac_quadratic(const Graph& g, std::span<const NodeId> units, std::span<const double> x, std::uint32_t b,
                     std::size_t threads) {
  const std::size_t m = units.size();
  if (x.size() != m) throw InputError("score vector does not match the sample");
  if (m == 0) return 0.0;
  std::vector<double> row(m, 0.0);
  if (b == 0) {
    for (std::size_t p = 0; p < m; ++p) row[p] = x[p] * x[p];
    return pairwise_sum(row) / static_cast<double>(m);
  }
  constexpr std::size_t kNone = std::numeric_limits<std::size_t>::max();
  std::vector<std::size_t> pos(g.size(), kNone);
  for (std::size_t p = 0; p < m; ++p) pos[units[p]] = p;
  const std::size_t chunk = 64;
  const std::size_t chunks = (m + chunk - 1) / chunk;
  parallel_for(chunks, threads, [&](std::size_t c) {
    BfsWorkspace ws(g.size());
    for (std::size_t p = c * chunk; p < std::min(m, (c + 1) * chunk); ++p) {
      double acc = 0.0;
      for (const auto& r : ws.run(g.links(), units[p], b)) {
        const std::size_t q = pos[r.node];
        if (q != kNone) acc += x[q];
      }
      row[p] = x[p] * acc;
    }
  });
  return pairwise_sum(row) / static_cast<double>(m);
}

VarianceEstimate hac_variance(const Sample& sample, const EstimateReport& report, const Graph& g, std::uint32_t b,
                              HacTarget target, std::size_t threads) {
  std::vector<double> x;
  double center = 0.0;
  switch (target) {
    case HacTarget::Contrast:
      x = report.z;
      center = report.tau;
      break;
    case HacTarget::MuT:
      x = ipw_scores(sample, report.t);
      center = report.mu_t;
      break;
    case HacTarget::MuT0:
      x = ipw_scores(sample, report.t0);
      center = report.mu_t0;
      break;
  }
  for (auto& v : x) v -= center;
  return make_variance(hac_quadratic(g, sample.units, x, b, threads), center, sample.size());
}

VarianceEstimate as_variance(const Sample& sample, const EstimateReport& report, const PairPropensity& pairs) {
  const auto vals = pairs.values();
  if (vals[0] != report.t || vals[1] != report.t0) throw InputError("pair propensities are for a different contrast");
  std::vector<std::size_t> slot(sample.outcomes.size(), std::numeric_limits<std::size_t>::max());
  const auto pu = pairs.units();
  for (std::size_t k = 0; k < pu.size(); ++k) {
    if (pu[k] < slot.size()) slot[pu[k]] = k;
  }
  const std::size_t m = sample.size();
  std::vector<std::size_t> pos(m);
  UnitArrays u;
  u.y.resize(m);
  u.in_t.resize(m);
  u.in_t0.resize(m);
  u.pi_t.resize(m);
  u.pi_t0.resize(m);
  for (std::size_t p = 0; p < m; ++p) {
    const NodeId i = sample.units[p];
    if (slot[i] == std::numeric_limits<std::size_t>::max()) {
      throw InputError("missing pair propensities for unit " + std::to_string(i));
    }
    pos[p] = slot[i];
    u.y[p] = sample.outcomes[i];
    u.in_t[p] = sample.exposures[i] == report.t;
    u.in_t0[p] = sample.exposures[i] == report.t0;
    u.pi_t[p] = sample.propensities->pi(i, report.t);
    u.pi_t0[p] = sample.propensities->pi(i, report.t0);
  }
  return make_variance(as_sigma2(u, pairs, pos), report.tau, m);
}

double r_n_term(const Graph& g, std::span<const NodeId> units, std::span<const double> tau_i, std::uint32_t b) {
  if (tau_i.empty()) return 0.0;
  std::vector<double> c(tau_i.begin(), tau_i.end());
  const double mean = pairwise_sum(c) / static_cast<double>(c.size());
  for (auto& v : c) v -= mean;
  return hac_quadratic(g, units, c, b, 1);
}

double r_as_term(std::span<const double> yt, std::span<const double> yt0, const PairPropensity& pairs) {
  const std::size_t m = pairs.units().size();
  if (yt.size() != m || yt0.size() != m) throw InputError("potential outcomes do not match the pair table");
  if (m == 0) return 0.0;
  double first = 0.0, rest = 0.0;
  for (std::size_t p = 0; p < m; ++p) {
    first += (yt[p] - yt0[p]) * (yt[p] - yt0[p]);
    for (std::size_t q = 0; q < m; ++q) {
      if (p == q) continue;
      if (pairs.is_zero(0, 0, p, q)) rest += (yt[p] + yt[q]) * (yt[p] + yt[q]);
      if (pairs.is_zero(0, 1, p, q)) rest += 2.0 * (yt[p] - yt0[q]) * (yt[p] - yt0[q]);
      if (pairs.is_zero(1, 1, p, q)) rest += (yt0[p] + yt0[q]) * (yt0[p] + yt0[q]);
    }
  }
  return (first + 0.5 * rest) / static_cast<double>(m);
}

ExactEstimands exact_estimands(const OutcomeModel& model, const Design& design, const ExposureSpec& exposure,
                               const Graph& g, ExposureValue t, ExposureValue t0, std::uint32_t b,
                               const ExactOptions& options) {
  const std::size_t n = g.size();
  const Adjacency& links = options.links ? *options.links : g.links();
  if (design.size() != n || model.size() != n || links.size() != n) {
    throw InputError("model, design and network sizes differ");
  }
  if (!exposure.in_support(t) || !exposure.in_support(t0)) throw InputError("contrast values outside the exposure support");
  const auto cand = options.units.empty() ? all_units(n) : options.units;
  for (NodeId i : cand) {
    if (i >= n) throw InputError("unit " + std::to_string(i) + " out of range");
  }

  const auto draws = enumerate_assignments(design, options.limit);
  const std::size_t na = draws.size();
  const auto support = exposure.support();
  const std::size_t s = support.size();
  auto slot = [&](ExposureValue v) {
    return static_cast<std::size_t>(std::find(support.begin(), support.end(), v) - support.begin());
  };

  // Per draw: exposures and outcomes of the candidate units.
  const std::size_t mc = cand.size();
  std::vector<ExposureValue> tex(na * mc);
  std::vector<double> yex(na * mc);
  std::vector<double> pi(n * s, 0.0);
  for (std::size_t a = 0; a < na; ++a) {
    const auto ex = compute_exposures(exposure, draws[a].d, links);
    const auto y = model(draws[a].d);
    for (NodeId i = 0; i < n; ++i) pi[i * s + slot(ex[i])] += draws[a].probability;
    for (std::size_t p = 0; p < mc; ++p) {
      tex[a * mc + p] = ex[cand[p]];
      yex[a * mc + p] = y[cand[p]];
    }
  }

  ExactEstimands out;
  out.assignments = na;
  out.propensities = PropensityTable(n, support, pi, PropensityMethod::exact());
  std::vector<std::size_t> keep;
  for (std::size_t p = 0; p < mc; ++p) {
    const NodeId i = cand[p];
    if (pi[i * s + slot(t)] > 0.0 && pi[i * s + slot(t0)] > 0.0) {
      keep.push_back(p);
      out.units.push_back(i);
    } else {
      out.excluded.push_back(i);
    }
  }
  const std::size_t m = keep.size();
  if (m == 0) throw InputError("no unit has positive probability of both contrasted exposures");
  const double dm = static_cast<double>(m);

  std::vector<double> pt(m), pt0(m);
  out.mu_t.assign(m, 0.0);
  out.mu_t0.assign(m, 0.0);
  for (std::size_t k = 0; k < m; ++k) {
    pt[k] = pi[out.units[k] * s + slot(t)];
    pt0[k] = pi[out.units[k] * s + slot(t0)];
  }
  for (std::size_t a = 0; a < na; ++a) {
    const double w = draws[a].probability;
    for (std::size_t k = 0; k < m; ++k) {
      const auto v = tex[a * mc + keep[k]];
      const double y = yex[a * mc + keep[k]];
      if (v == t) out.mu_t[k] += w * y;
      else if (v == t0) out.mu_t0[k] += w * y;
    }
  }
  const bool table = model.exposure() != nullptr;
  std::vector<double> yt, yt0;
  if (table) {
    for (NodeId i : out.units) {
      yt.push_back(*model.potential(i, t));
      yt0.push_back(*model.potential(i, t0));
    }
  }
  out.tau_i.resize(m);
  for (std::size_t k = 0; k < m; ++k) {
    out.mu_t[k] /= pt[k];
    out.mu_t0[k] /= pt0[k];
    // a correctly specified table is its own conditional mean; take the stored values
    if (table) {
      const double tol = 1e-9 * (1.0 + std::abs(yt[k]) + std::abs(yt0[k]));
      if (std::abs(out.mu_t[k] - yt[k]) < tol && std::abs(out.mu_t0[k] - yt0[k]) < tol) {
        out.mu_t[k] = yt[k];
        out.mu_t0[k] = yt0[k];
      }
    }
    out.tau_i[k] = out.mu_t[k] - out.mu_t0[k];
  }
  out.tau = pairwise_sum(out.tau_i) / dm;

  // Z per draw on the kept units.
  std::vector<double> z(na * m), tau_hat(na);
  for (std::size_t a = 0; a < na; ++a) {
    for (std::size_t k = 0; k < m; ++k) {
      const auto v = tex[a * mc + keep[k]];
      const double y = yex[a * mc + keep[k]];
      z[a * m + k] = v == t ? y / pt[k] : (v == t0 ? -y / pt0[k] : 0.0);
    }
    tau_hat[a] = pairwise_sum(std::span<const double>(z.data() + a * m, m)) / dm;
  }
  std::vector<double> terms(na);
  for (std::size_t a = 0; a < na; ++a) terms[a] = draws[a].probability * tau_hat[a];
  out.expected_tau = pairwise_sum(terms);
  for (std::size_t a = 0; a < na; ++a) {
    const double dev = tau_hat[a] - out.expected_tau;
    terms[a] = draws[a].probability * dev * dev;
  }
  out.true_variance = dm * pairwise_sum(terms);
  out.r_n = r_n_term(g, out.units, out.tau_i, b);

  if (!options.variance_terms && !table) return out;

  // Pair propensities by enumeration; a zero sum means no assignment realizes the event.
  PairPropensity pairs(out.units, {t, t0});
  {
    std::array<std::vector<double>, 4> acc;
    for (auto& v : acc) v.assign(m * m, 0.0);
    std::vector<int> arm(m);
    for (std::size_t a = 0; a < na; ++a) {
      for (std::size_t k = 0; k < m; ++k) {
        const auto v = tex[a * mc + keep[k]];
        arm[k] = v == t ? 0 : (v == t0 ? 1 : -1);
      }
      for (std::size_t p = 0; p < m; ++p) {
        if (arm[p] < 0) continue;
        for (std::size_t q = 0; q < m; ++q) {
          if (arm[q] < 0) continue;
          acc[static_cast<std::size_t>(arm[p] * 2 + arm[q])][p * m + q] += draws[a].probability;
        }
      }
    }
    for (std::size_t ab = 0; ab < 4; ++ab) {
      for (std::size_t p = 0; p < m; ++p) {
        for (std::size_t q = 0; q < m; ++q) {
          const double v = acc[ab][p * m + q];
          pairs.set(ab / 2, ab % 2, p, q, v, v > 0.0 ? ZeroKind::NonZero : ZeroKind::Structural);
        }
      }
    }
  }
  if (table) out.r_n_as = r_as_term(yt, yt0, pairs);
  if (!options.variance_terms) return out;

  // E[sigma2-hat], E[sigma2-hat_*], E[sigma2_AS].
  std::vector<double> e_hac(na), e_star(na), e_as(na);
  std::vector<double> x(m);
  std::vector<std::size_t> ident(m);
  for (std::size_t k = 0; k < m; ++k) ident[k] = k;
  UnitArrays u;
  u.y.resize(m);
  u.in_t.resize(m);
  u.in_t0.resize(m);
  u.pi_t = pt;
  u.pi_t0 = pt0;
  for (std::size_t a = 0; a < na; ++a) {
    const double w = draws[a].probability;
    for (std::size_t k = 0; k < m; ++k) x[k] = z[a * m + k] - tau_hat[a];
    e_hac[a] = w * hac_quadratic(g, out.units, x, b, 1);
    for (std::size_t k = 0; k < m; ++k) x[k] = z[a * m + k] - out.tau_i[k];
    e_star[a] = w * hac_quadratic(g, out.units, x, b, 1);
    for (std::size_t k = 0; k < m; ++k) {
      const auto v = tex[a * mc + keep[k]];
      u.y[k] = yex[a * mc + keep[k]];
      u.in_t[k] = v == t;
      u.in_t0[k] = v == t0;
    }
    e_as[a] = w * as_sigma2(u, pairs, ident);
  }
  out.expected_hac = pairwise_sum(e_hac);
  out.hac_star = pairwise_sum(e_star);
  out.expected_as = pairwise_sum(e_as);

  // Cross term from Cov(Z): n^-1 sum w_pq (E[ebar^2] - E[e_p ebar] - E[e_q ebar]).
  std::vector<double> cov(m * m, 0.0);
  for (std::size_t a = 0; a < na; ++a) {
    const double w = draws[a].probability;
    for (std::size_t p = 0; p < m; ++p) {
      const double ep = z[a * m + p] - out.tau_i[p];
      for (std::size_t q = 0; q < m; ++q) cov[p * m + q] += w * ep * (z[a * m + q] - out.tau_i[q]);
    }
  }
  std::vector<double> e_pbar(m, 0.0);
  double ebar2 = 0.0;
  for (std::size_t p = 0; p < m; ++p) {
    for (std::size_t q = 0; q < m; ++q) e_pbar[p] += cov[p * m + q];
    e_pbar[p] /= dm;
    ebar2 += e_pbar[p];
  }
  ebar2 /= dm;
  std::vector<std::size_t> pos(n, m);
  for (std::size_t k = 0; k < m; ++k) pos[out.units[k]] = k;
  BfsWorkspace ws(n);
  double cross = 0.0;
  for (std::size_t p = 0; p < m; ++p) {
    for (const auto& r : ws.run(g.links(), out.units[p], b)) {
      const std::size_t q = pos[r.node];
      if (q < m) cross += ebar2 - e_pbar[p] - e_pbar[q];
    }
  }
  out.cross_term = cross / dm;
  return out;
}

double round_sig(double x, int digits) {
  if (!std::isfinite(x) || x == 0.0) return x;
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*g", digits, x);
  return std::strtod(buf, nullptr);
}

nlohmann::json to_json(const VarianceEstimate& v) {
  return {{"sigma2", num(v.sigma2)}, {"se", num(v.se)}, {"ci_lo", num(v.ci_lo)}, {"ci_hi", num(v.ci_hi)}, {"psd", v.psd}};
}

nlohmann::json to_json(const EstimateReport& r) {
  nlohmann::json j;
  j["t"] = r.t;
  j["t0"] = r.t0;
  j["mu_t"] = num(r.mu_t);
  j["mu_t0"] = num(r.mu_t0);
  j["tau"] = num(r.tau);
  j["n"] = r.n;
  j["n_eff_t"] = r.n_eff_t;
  j["n_eff_t0"] = r.n_eff_t0;
  if (r.bandwidth) {
    j["bandwidth"] = r.bandwidth->b;
    j["regime"] = r.bandwidth->regime;
    j["b_tilde"] = num(r.bandwidth->b_tilde);
    if (!r.bandwidth->warning.empty()) j["bandwidth_warning"] = r.bandwidth->warning;
  } else {
    j["bandwidth"] = nullptr;
    j["regime"] = nullptr;
  }
  nlohmann::json var = nlohmann::json::object();
  for (const auto& [name, v] : r.variance) var[name] = to_json(v);
  j["variance"] = var;
  return j;
}

nlohmann::json to_json(const ExactEstimands& e) {
  nlohmann::json j;
  j["units"] = e.units;
  j["excluded"] = e.excluded;
  auto vec = [](const std::vector<double>& v) {
    nlohmann::json a = nlohmann::json::array();
    for (double x : v) a.push_back(num(x));
    return a;
  };
  j["mu_t"] = vec(e.mu_t);
  j["mu_t0"] = vec(e.mu_t0);
  j["tau_i"] = vec(e.tau_i);
  j["tau"] = num(e.tau);
  j["expected_tau"] = num(e.expected_tau);
  j["true_variance"] = num(e.true_variance);
  j["r_n"] = num(e.r_n);
  j["r_n_as"] = e.r_n_as ? num(*e.r_n_as) : nlohmann::json(nullptr);
  j["expected_hac"] = num(e.expected_hac);
  j["hac_star"] = num(e.hac_star);
  j["cross_term"] = num(e.cross_term);
  j["expected_as"] = e.expected_as ? num(*e.expected_as) : nlohmann::json(nullptr);
  j["assignments"] = e.assignments;
  return j;
}

}  // namespace ani
