#include "ani/mc.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <limits>
#include <numeric>
#include <sstream>

#include "ani/design.hpp"
#include "ani/errors.hpp"
#include "ani/estimators.hpp"
#include "ani/io.hpp"
#include "ani/parallel.hpp"
#include "ani/rng.hpp"

namespace ani {

namespace {

constexpr std::uint64_t kMainStream = 0x6d61696eULL;
constexpr std::uint64_t kOracleStream = 0x6f7261636cULL;
constexpr std::uint64_t kGraphPart = 1, kEligiblePart = 2, kEpsilonPart = 3, kAssignPart = 4, kEffectPart = 5;
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

struct Rep {
  bool ok = false;
  std::string error;
  double tau = 0.0;
  double n = 0.0, n_t = 0.0, n_t0 = 0.0, avg_degree = 0.0;
  double apl = kNaN, bandwidth = kNaN;
  std::vector<double> se, ci_lo, ci_hi;
  double r_n = kNaN, r_n_as = kNaN;
};

std::vector<NodeId> draw_eligible(std::size_t n, std::size_t count, std::uint64_t seed) {
  std::vector<NodeId> all(n);
  std::iota(all.begin(), all.end(), NodeId{0});
  if (count == 0 || count >= n) return all;
  Rng rng = make_rng(seed);
  for (std::size_t k = 0; k < count; ++k) {
    std::uniform_int_distribution<std::size_t> pick(k, n - 1);
    std::swap(all[k], all[pick(rng)]);
  }
  all.resize(count);
  std::sort(all.begin(), all.end());
  return all;
}

std::vector<double> neighbor_mean(const Graph& g, const std::vector<double>& x) {
  std::vector<double> m(g.size(), 0.0);
  for (NodeId i = 0; i < g.size(); ++i) {
    const auto nb = g.neighbors(i);
    if (nb.empty()) continue;
    double s = 0.0;
    for (NodeId j : nb) s += x[j];
    m[i] = s / static_cast<double>(nb.size());
  }
  return m;
}

class Engine {
 public:
  explicit Engine(const McConfig& c) : c_(c), model_(ModelSpec::parse(c.outcome)) {
    n_ = c.network == McConfig::Network::Rgg ? (c.n ? c.n : c.degrees.size()) : c.degrees.size();
    kappa_ = c.kappa;
    if (kappa_ <= 0.0 && !c.degrees.empty()) {
      kappa_ = std::accumulate(c.degrees.begin(), c.degrees.end(), 0.0) / static_cast<double>(c.degrees.size());
    }
    eps_mode_ = c.epsilon.value_or(c.network == McConfig::Network::Rgg ? EpsilonMode::Homophily : EpsilonMode::Normal);
  }

  Rep run(std::uint64_t stream, std::size_t r, bool full) const {
    Rep rep;
    try {
      one(stream, r, full, rep);
      rep.ok = true;
    } catch (const std::exception& e) {
      rep.ok = false;
      rep.error = e.what();
    }
    return rep;
  }

 private:
  std::uint64_t part_seed(std::uint64_t stream, std::size_t r, std::uint64_t part, bool redraw) const {
    return redraw ? derive_seed(derive_seed(c_.seed, stream, r), part, 0) : derive_seed(c_.seed, part, 0);
  }

  void one(std::uint64_t stream, std::size_t r, bool full, Rep& rep) const {
    const std::uint64_t gseed = part_seed(stream, r, kGraphPart, c_.redraw_graph);
    Graph g;
    RggPlacement placement;
    if (c_.network == McConfig::Network::Rgg) {
      auto res = rgg(n_, kappa_, gseed, c_.radius_rule);
      g = std::move(res.graph);
      placement = std::move(res.placement);
    } else {
      g = configuration_model(c_.degrees, gseed);
    }
    const std::size_t n = g.size();
    const auto eligible = draw_eligible(n, c_.eligible_count, part_seed(stream, r, kEligiblePart, c_.redraw_graph));
    Design design = c_.design == McConfig::DesignKind::Bernoulli
                        ? Design::bernoulli(n, eligible, c_.p)
                        : Design::blocks(n, {Design::Block{eligible, static_cast<std::size_t>(
                                                                         std::floor(c_.p * static_cast<double>(eligible.size()) + 0.5))}});
    const auto eps = draw_epsilon(n, eps_mode_, part_seed(stream, r, kEpsilonPart, c_.redraw_epsilon),
                                  c_.network == McConfig::Network::Rgg ? &placement : nullptr);
    const auto d = sample_assignment(design, part_seed(stream, r, kAssignPart, c_.redraw_assignment));

    std::vector<double> yt, yt0;  // bias mode potential outcomes, network length
    std::vector<double> y;
    if (c_.bias == McConfig::Bias::Off) {
      y = model_.build(g, eps)(d);
    } else {
      Rng rng = make_rng(part_seed(stream, r, kEffectPart, c_.redraw_epsilon));
      std::normal_distribution<double> effect(1.0, 1.0);
      std::vector<double> beta(n);
      for (auto& b : beta) b = effect(rng);
      const auto base_nb = neighbor_mean(g, eps);
      const auto beta_nb = neighbor_mean(g, beta);
      std::vector<double> table(n * 2);
      for (std::size_t i = 0; i < n; ++i) {
        const double y0 = eps[i] + base_nb[i];
        double y1 = beta[i] + y0;
        if (c_.bias == McConfig::Bias::Autocorrelated) y1 += beta_nb[i];
        table[i * 2 + 0] = y0;
        table[i * 2 + 1] = y1;
      }
      const auto model = OutcomeModel::exposure_table(c_.exposure, g.links(), table);
      y = model(d);
      yt.resize(n);
      yt0.resize(n);
      for (std::size_t i = 0; i < n; ++i) {
        yt[i] = *model.potential(static_cast<NodeId>(i), c_.t);
        yt0[i] = *model.potential(static_cast<NodeId>(i), c_.t0);
      }
    }

    const auto pi = propensity(design, c_.exposure, g.links());
    auto units = c_.sample_has_eligible_neighbor ? units_with_eligible_neighbor(design, g.links()) : all_units(n);
    const auto ex = compute_exposures(c_.exposure, d, g.links());
    const Sample sample = make_sample(std::move(units), std::move(y), ex, pi);
    const auto report = ipw_point(sample, c_.t, c_.t0);
    rep.tau = report.tau;
    rep.n = static_cast<double>(report.n);
    rep.n_t = static_cast<double>(report.n_eff_t);
    rep.n_t0 = static_cast<double>(report.n_eff_t0);
    rep.avg_degree = g.average_degree();
    if (!full) return;

    for (const auto& name : c_.estimators) {
      VarianceEstimate v;
      if (name == "hac-auto") {
        const auto s = summary(g, 1);
        const auto bw = bandwidth_rule(s, n, c_.exposure.radius(), c_.literal_eq7);
        rep.apl = s.apl;
        rep.bandwidth = bw.b;
        v = hac_variance(sample, report, g, bw.b);
      } else if (name == "naive") {
        v = hac_variance(sample, report, g, 0);
      } else if (name.rfind("hac:", 0) == 0) {
        v = hac_variance(sample, report, g, static_cast<std::uint32_t>(std::stoul(name.substr(4))));
      } else {
        const auto pairs = pairwise_propensity(design, c_.exposure, g.links(), sample.units, c_.t, c_.t0);
        v = as_variance(sample, report, pairs);
      }
      rep.se.push_back(v.se);
      rep.ci_lo.push_back(v.ci_lo);
      rep.ci_hi.push_back(v.ci_hi);
    }

    if (c_.bias != McConfig::Bias::Off) {
      const std::size_t m = sample.size();
      std::vector<double> ti(m), a(m), b(m);
      for (std::size_t k = 0; k < m; ++k) {
        const NodeId i = sample.units[k];
        ti[k] = yt[i] - yt0[i];
        a[k] = yt[i];
        b[k] = yt0[i];
      }
      rep.r_n = r_n_term(g, sample.units, ti, 2 * c_.exposure.radius());
      const auto pairs = pairwise_propensity(design, c_.exposure, g.links(), sample.units, c_.t, c_.t0);
      rep.r_n_as = r_as_term(a, b, pairs);
    }
  }

  const McConfig& c_;
  ModelSpec model_;
  std::size_t n_ = 0;
  double kappa_ = 0.0;
  EpsilonMode eps_mode_ = EpsilonMode::Normal;
};

double mean_of(std::vector<double> v) {
  if (v.empty()) return kNaN;
  return pairwise_sum(v) / static_cast<double>(v.size());
}

nlohmann::json num(double x) {
  if (!std::isfinite(x)) return nullptr;
  return round_sig(x);
}

nlohmann::json num(const std::optional<double>& x) { return x ? num(*x) : nlohmann::json(nullptr); }

}  // namespace

void McConfig::validate() const {
  if (reps < 1) throw InputError("mc: reps must be >= 1");
  if (!exposure.in_support(t) || !exposure.in_support(t0)) throw InputError("mc: contrast values outside the exposure support");
  if (network == Network::Configuration && degrees.empty()) throw InputError("mc: configuration model needs a degree sequence");
  if (network == Network::Rgg && n == 0 && degrees.empty()) throw InputError("mc: RGG needs n or a degree sequence");
  if (!(p > 0.0 && p < 1.0)) throw InputError("mc: treatment probability must lie in (0, 1)");
  if (bias != Bias::Off && exposure.support().size() != 2) throw InputError("mc: bias mode needs a binary exposure");
  if (network == Network::Configuration && epsilon == EpsilonMode::Homophily) {
    throw InputError("mc: homophily shocks need the RGG network");
  }
  ModelSpec::parse(outcome);
  for (const auto& e : estimators) {
    if (e == "hac-auto" || e == "naive" || e == "as") continue;
    if (e.rfind("hac:", 0) == 0 && e.size() > 4 && e.find_first_not_of("0123456789", 4) == std::string::npos) continue;
    throw InputError("mc: unknown estimator '" + e + "' (expected hac-auto, hac:<b>, naive, as)");
  }
}

McConfig McConfig::from_json(const nlohmann::json& j, const std::string& base_dir) {
  McConfig c;
  try {
    static const std::vector<std::string> known = {"network", "eligible", "outcome", "epsilon", "design", "exposure",
                                                   "contrast", "reps", "oracle_reps", "seed", "redraw", "estimators",
                                                   "sample", "bias_mode", "literal_eq7", "threads"};
    for (const auto& [key, value] : j.items()) {
      if (std::find(known.begin(), known.end(), key) == known.end()) throw InputError("mc config: unknown key '" + key + "'");
    }
    if (j.contains("network")) {
      const auto& nw = j.at("network");
      const auto model = nw.value("model", std::string("configuration"));
      if (model == "configuration") c.network = Network::Configuration;
      else if (model == "rgg") c.network = Network::Rgg;
      else throw InputError("mc config: network.model must be configuration or rgg");
      if (nw.contains("degrees")) {
        const auto& d = nw.at("degrees");
        if (d.is_string()) {
          std::filesystem::path path = d.get<std::string>();
          if (path.is_relative()) path = std::filesystem::path(base_dir) / path;
          c.degrees = read_degrees_file(path.string());
        } else {
          c.degrees = d.get<std::vector<std::uint32_t>>();
        }
      }
      c.n = nw.value("n", std::size_t{0});
      c.kappa = nw.value("kappa", 0.0);
      const auto rule = nw.value("radius_rule", std::string("expected-degree"));
      if (rule == "expected-degree") c.radius_rule = RadiusRule::ExpectedDegree;
      else if (rule == "literal") c.radius_rule = RadiusRule::Literal;
      else throw InputError("mc config: radius_rule must be expected-degree or literal");
    }
    c.eligible_count = j.value("eligible", std::size_t{0});
    c.outcome = j.value("outcome", c.outcome);
    if (j.contains("epsilon")) c.epsilon = parse_epsilon_mode(j.at("epsilon").get<std::string>());
    if (j.contains("design")) {
      const auto& d = j.at("design");
      const auto kind = d.value("kind", std::string("bernoulli"));
      if (kind == "bernoulli") c.design = DesignKind::Bernoulli;
      else if (kind == "blocks") c.design = DesignKind::Blocks;
      else throw InputError("mc config: design.kind must be bernoulli or blocks");
      c.p = d.value("p", 0.5);
    }
    if (j.contains("exposure")) c.exposure = ExposureSpec::parse(j.at("exposure").get<std::string>());
    if (j.contains("contrast")) {
      const auto v = j.at("contrast").get<std::vector<int>>();
      if (v.size() != 2) throw InputError("mc config: contrast must be [t, t0]");
      c.t = v[0];
      c.t0 = v[1];
    }
    c.reps = j.value("reps", c.reps);
    c.oracle_reps = j.value("oracle_reps", c.oracle_reps);
    c.seed = j.value("seed", c.seed);
    if (j.contains("redraw")) {
      const auto v = j.at("redraw").get<std::vector<std::string>>();
      c.redraw_graph = c.redraw_epsilon = c.redraw_assignment = false;
      for (const auto& s : v) {
        if (s == "graph") c.redraw_graph = true;
        else if (s == "epsilon") c.redraw_epsilon = true;
        else if (s == "assignment") c.redraw_assignment = true;
        else throw InputError("mc config: unknown redraw component '" + s + "'");
      }
    }
    if (j.contains("estimators")) c.estimators = j.at("estimators").get<std::vector<std::string>>();
    const auto sample = j.value("sample", std::string("has-eligible-neighbor"));
    if (sample == "has-eligible-neighbor") c.sample_has_eligible_neighbor = true;
    else if (sample == "all") c.sample_has_eligible_neighbor = false;
    else throw InputError("mc config: sample must be has-eligible-neighbor or all");
    const auto bias = j.value("bias_mode", std::string("off"));
    if (bias == "off") c.bias = Bias::Off;
    else if (bias == "independent") c.bias = Bias::Independent;
    else if (bias == "autocorrelated") c.bias = Bias::Autocorrelated;
    else throw InputError("mc config: bias_mode must be off, independent or autocorrelated");
    c.literal_eq7 = j.value("literal_eq7", false);
    c.threads = j.value("threads", std::size_t{0});
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("mc config: ") + e.what());
  }
  c.validate();
  return c;
}

nlohmann::json McConfig::to_json() const {
  nlohmann::json j;
  j["network"] = {{"model", network == Network::Rgg ? "rgg" : "configuration"},
                  {"n", network == Network::Rgg ? (n ? n : degrees.size()) : degrees.size()},
                  {"radius_rule", radius_rule == RadiusRule::Literal ? "literal" : "expected-degree"}};
  if (kappa > 0) j["network"]["kappa"] = kappa;
  j["eligible"] = eligible_count;
  j["outcome"] = outcome;
  if (epsilon) j["epsilon"] = *epsilon == EpsilonMode::Homophily ? "homophily" : (*epsilon == EpsilonMode::Zero ? "zero" : "normal");
  j["design"] = {{"kind", design == DesignKind::Blocks ? "blocks" : "bernoulli"}, {"p", p}};
  j["exposure"] = exposure.to_string();
  j["contrast"] = {t, t0};
  j["reps"] = reps;
  j["oracle_reps"] = oracle_reps;
  j["seed"] = seed;
  std::vector<std::string> redraw;
  if (redraw_graph) redraw.push_back("graph");
  if (redraw_epsilon) redraw.push_back("epsilon");
  if (redraw_assignment) redraw.push_back("assignment");
  j["redraw"] = redraw;
  j["estimators"] = estimators;
  j["sample"] = sample_has_eligible_neighbor ? "has-eligible-neighbor" : "all";
  j["bias_mode"] = bias == Bias::Off ? "off" : (bias == Bias::Independent ? "independent" : "autocorrelated");
  j["literal_eq7"] = literal_eq7;
  return j;
}

const EstimatorSummary* McReport::find(const std::string& name) const {
  for (const auto& e : estimators) {
    if (e.name == name) return &e;
  }
  return nullptr;
}

McReport run_mc(const McConfig& config) {
  config.validate();
  const Engine engine(config);
  McReport out;
  out.reps = config.reps;
  out.oracle_reps = config.oracle_reps;

  std::vector<Rep> main(config.reps), oracle(config.oracle_reps);
  parallel_for(config.reps, config.threads, [&](std::size_t r) { main[r] = engine.run(kMainStream, r, true); });
  parallel_for(config.oracle_reps, config.threads,
               [&](std::size_t r) { oracle[r] = engine.run(kOracleStream, r, false); });

  std::vector<const Rep*> ok;
  for (const auto& r : main) {
    if (r.ok) ok.push_back(&r);
    else if (out.failures.size() < 5) out.failures.push_back(r.error);
  }
  out.failed = main.size() - ok.size();
  std::vector<double> oracle_tau;
  for (const auto& r : oracle) {
    if (r.ok) oracle_tau.push_back(r.tau);
    else if (out.failures.size() < 5) out.failures.push_back(r.error);
  }
  out.oracle_failed = oracle.size() - oracle_tau.size();
  if (ok.empty()) throw InputError("mc: every replication failed" + (out.failures.empty() ? std::string() : ": " + out.failures.front()));

  auto collect = [&](auto field) {
    std::vector<double> v;
    v.reserve(ok.size());
    for (const Rep* r : ok) v.push_back(field(*r));
    return v;
  };
  out.tau = collect([](const Rep& r) { return r.tau; });
  out.mean_tau = mean_of(out.tau);
  const auto& ref = oracle_tau.size() >= 2 ? oracle_tau : out.tau;
  out.target = mean_of(ref);
  {
    std::vector<double> sq(ref.size());
    for (std::size_t k = 0; k < ref.size(); ++k) sq[k] = (ref[k] - out.target) * (ref[k] - out.target);
    out.oracle_se = ref.size() >= 2 ? std::sqrt(pairwise_sum(sq) / static_cast<double>(ref.size() - 1)) : kNaN;
  }
  const double reps_ok = static_cast<double>(ok.size());
  {
    std::vector<double> sq(out.tau.size()), hit(out.tau.size());
    for (std::size_t k = 0; k < out.tau.size(); ++k) {
      const double e = out.tau[k] - out.target;
      sq[k] = e * e;
      hit[k] = std::abs(e) <= 1.96 * out.oracle_se ? 1.0 : 0.0;
    }
    out.rmse = std::sqrt(pairwise_sum(sq) / reps_ok);
    out.oracle_coverage = pairwise_sum(hit) / reps_ok;
  }
  out.coverage_mc_se = std::sqrt(0.95 * 0.05 / reps_ok);
  out.mean_n = mean_of(collect([](const Rep& r) { return r.n; }));
  out.mean_n_eff_t = mean_of(collect([](const Rep& r) { return r.n_t; }));
  out.mean_n_eff_t0 = mean_of(collect([](const Rep& r) { return r.n_t0; }));
  out.mean_avg_degree = mean_of(collect([](const Rep& r) { return r.avg_degree; }));
  if (std::find(config.estimators.begin(), config.estimators.end(), "hac-auto") != config.estimators.end()) {
    out.mean_apl = mean_of(collect([](const Rep& r) { return r.apl; }));
    out.mean_bandwidth = mean_of(collect([](const Rep& r) { return r.bandwidth; }));
  }
  for (std::size_t e = 0; e < config.estimators.size(); ++e) {
    EstimatorSummary s;
    s.name = config.estimators[e];
    std::vector<double> se, hit;
    for (const Rep* r : ok) {
      const bool finite = std::isfinite(r->se[e]);
      if (finite) se.push_back(r->se[e]);
      else ++s.non_psd;
      hit.push_back(finite && r->ci_lo[e] <= out.target && out.target <= r->ci_hi[e] ? 1.0 : 0.0);
    }
    s.used = se.size();
    s.mean_se = mean_of(se);
    s.coverage = pairwise_sum(hit) / reps_ok;
    out.estimators.push_back(std::move(s));
  }
  if (config.bias != McConfig::Bias::Off) {
    out.mean_r_n = mean_of(collect([](const Rep& r) { return r.r_n; }));
    out.mean_r_n_as = mean_of(collect([](const Rep& r) { return r.r_n_as; }));
  }
  return out;
}

nlohmann::json McReport::to_json() const {
  nlohmann::json j;
  j["reps"] = reps;
  j["failed"] = failed;
  j["oracle_reps"] = oracle_reps;
  j["oracle_failed"] = oracle_failed;
  if (!failures.empty()) j["failure_examples"] = failures;
  j["mean_tau"] = num(mean_tau);
  j["coverage_target"] = {{"value", num(target)}, {"rule", "mean of tau-hat over the oracle pass"}};
  j["oracle_se"] = num(oracle_se);
  j["oracle_coverage"] = num(oracle_coverage);
  j["coverage_mc_se"] = num(coverage_mc_se);
  j["rmse"] = num(rmse);
  j["mean_n"] = num(mean_n);
  j["mean_n_eff_t"] = num(mean_n_eff_t);
  j["mean_n_eff_t0"] = num(mean_n_eff_t0);
  j["mean_avg_degree"] = num(mean_avg_degree);
  j["mean_apl"] = num(mean_apl);
  j["mean_bandwidth"] = num(mean_bandwidth);
  nlohmann::json est = nlohmann::json::object();
  for (const auto& e : estimators) {
    est[e.name] = {{"mean_se", num(e.mean_se)}, {"coverage", num(e.coverage)}, {"used", e.used}, {"non_psd", e.non_psd}};
  }
  j["estimators"] = est;
  j["mean_r_n"] = num(mean_r_n);
  j["mean_r_n_as"] = num(mean_r_n_as);
  return j;
}

std::string McReport::to_csv() const {
  std::ostringstream os;
  os.precision(12);
  os << "estimator,mean_se,coverage,coverage_mc_se,reps_used\n";
  os << "oracle," << oracle_se << ',' << oracle_coverage << ',' << coverage_mc_se << ',' << (reps - failed) << '\n';
  for (const auto& e : estimators) {
    os << e.name << ',' << e.mean_se << ',' << e.coverage << ',' << coverage_mc_se << ',' << e.used << '\n';
  }
  return os.str();
}

}  // namespace ani
