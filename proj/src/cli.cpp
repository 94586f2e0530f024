#include "ani/cli.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <memory>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "ani/design.hpp"
#include "ani/errors.hpp"
#include "ani/estimators.hpp"
#include "ani/exposure.hpp"
#include "ani/graph.hpp"
#include "ani/io.hpp"
#include "ani/mc.hpp"
#include "ani/netgen.hpp"
#include "ani/outcomes.hpp"
#include "ani/parallel.hpp"
#include "ani/rng.hpp"

namespace ani::cli {

namespace {

constexpr std::uint64_t kEpsStream = 0x657073ULL;
constexpr std::uint64_t kAssignStream = 0x64726177ULL;
constexpr std::uint64_t kEligibleStream = 0x656c6967ULL;

using json = nlohmann::json;

json num(double x) {
  if (!std::isfinite(x)) return nullptr;
  return round_sig(x);
}

// Writes to `path`, or to `fallback` when the path is empty.
void emit(const std::string& path, std::ostream& fallback, const std::string& text) {
  if (path.empty()) {
    fallback << text;
    return;
  }
  std::ofstream f(path);
  if (!f) throw InputError("cannot write '" + path + "'");
  f << text;
}

Graph load_graph(const std::string& path, std::size_t min_n = 0) {
  const auto el = read_edge_list_file(path);
  return build_graph(el.edges, std::max(el.n, min_n), true);
}

std::vector<NodeId> pick_eligible(std::size_t n, const std::string& spec, std::uint64_t seed) {
  std::vector<NodeId> all(n);
  for (std::size_t i = 0; i < n; ++i) all[i] = static_cast<NodeId>(i);
  if (spec == "all") return all;
  std::size_t count = 0;
  try {
    std::size_t used = 0;
    count = std::stoul(spec, &used);
    if (used != spec.size()) throw InputError("");
  } catch (const std::exception&) {
    throw InputError("--eligible must be 'all' or a count");
  }
  if (count > n) throw InputError("--eligible count exceeds the number of units");
  Rng rng = make_rng(derive_seed(seed, kEligibleStream, 0));
  for (std::size_t k = 0; k < count; ++k) {
    std::uniform_int_distribution<std::size_t> pick(k, n - 1);
    std::swap(all[k], all[pick(rng)]);
  }
  all.resize(count);
  std::sort(all.begin(), all.end());
  return all;
}

Design make_design(std::size_t n, const std::vector<NodeId>& eligible, const std::string& kind, double p) {
  if (kind == "bernoulli") return Design::bernoulli(n, eligible, p);
  if (kind == "blocks") {
    const auto treated = static_cast<std::size_t>(std::floor(p * static_cast<double>(eligible.size()) + 0.5));
    return Design::blocks(n, {Design::Block{eligible, treated}});
  }
  throw InputError("--design must be bernoulli or blocks");
}

std::vector<std::uint32_t> parse_range(const std::string& text) {
  const auto dots = text.find("..");
  try {
    if (dots == std::string::npos) return {static_cast<std::uint32_t>(std::stoul(text))};
    const auto lo = std::stoul(text.substr(0, dots)), hi = std::stoul(text.substr(dots + 2));
    if (hi < lo) throw InputError("");
    std::vector<std::uint32_t> v;
    for (auto b = lo; b <= hi; ++b) v.push_back(static_cast<std::uint32_t>(b));
    return v;
  } catch (const std::exception&) {
    throw InputError("bad range '" + text + "' (expected a..b)");
  }
}

json summary_json(const Graph& g, const GraphSummary& s) {
  return {{"n", g.size()},
          {"edges", g.edge_count()},
          {"avg_degree", num(s.avg_degree)},
          {"apl", num(s.apl)},
          {"diameter", s.diameter},
          {"largest_component_size", s.largest_component_size},
          {"largest_component_fraction", num(s.largest_component_fraction)}};
}

json bandwidth_json(const BandwidthChoice& c) {
  json j = {{"b", c.b}, {"regime", c.regime}, {"b_tilde", num(c.b_tilde)}, {"threshold", num(c.threshold)},
            {"literal_eq7", c.literal}};
  if (!c.warning.empty()) j["warning"] = c.warning;
  return j;
}

struct GenGraph {
  std::string model = "configuration", degrees, out, positions;
  std::size_t n = 0;
  double kappa = 0.0;
  std::uint64_t seed = 0;
  bool rn_literal = false;

  void add(CLI::App& app) {
    auto* c = app.add_subcommand("gen-graph", "Generate a configuration-model or random geometric graph");
    c->add_option("--model", model, "configuration | rgg")->check(CLI::IsMember({"configuration", "rgg"}));
    c->add_option("--degrees", degrees, "Degree-sequence file (one integer per line)");
    c->add_option("--n", n, "RGG size (default: length of --degrees)");
    c->add_option("--kappa", kappa, "RGG expected degree (default: mean of --degrees)");
    c->add_option("--seed", seed, "Random seed")->required();
    c->add_flag("--rn-literal", rn_literal, "Use the squared radius form r = (kappa/(pi n))^2");
    c->add_option("--out", out, "Edge-list output (default stdout)");
    c->add_option("--positions", positions, "RGG positions CSV output");
  }

  int run(std::ostream& o) const {
    std::ostringstream text;
    if (model == "configuration") {
      if (degrees.empty()) throw InputError("gen-graph: configuration model needs --degrees");
      const auto deg = read_degrees_file(degrees);
      ConfigModelReport rep;
      const Graph g = configuration_model(deg, seed, &rep);
      text << "# configuration model, seed " << seed << ", self-loops erased " << rep.self_loops_erased
           << ", multi-edges erased " << rep.multi_edges_erased;
      if (rep.padded) text << ", odd degree sum padded at node " << rep.padded_node;
      text << "\n";
      write_edge_list(text, g);
    } else {
      std::size_t size = n;
      double k = kappa;
      if (!degrees.empty()) {
        const auto deg = read_degrees_file(degrees);
        if (size == 0) size = deg.size();
        if (k <= 0.0 && !deg.empty()) {
          double s = 0.0;
          for (auto d : deg) s += d;
          k = s / static_cast<double>(deg.size());
        }
      }
      if (size == 0 || k <= 0.0) throw InputError("gen-graph: rgg needs --n and --kappa (or --degrees)");
      const auto res = rgg(size, k, seed, rn_literal ? RadiusRule::Literal : RadiusRule::ExpectedDegree);
      text << "# rgg, seed " << seed << ", kappa " << k << ", radius " << std::setprecision(12) << res.placement.radius
           << "\n";
      write_edge_list(text, res.graph);
      if (!positions.empty()) {
        std::ostringstream pos;
        pos << "id,x,y\n" << std::setprecision(17);
        for (std::size_t i = 0; i < res.placement.positions.size(); ++i) {
          pos << i << ',' << res.placement.positions[i][0] << ',' << res.placement.positions[i][1] << '\n';
        }
        emit(positions, o, pos.str());
      }
    }
    emit(out, o, text.str());
    return 0;
  }
};

struct Simulate {
  std::string graph, model, eligible = "all", design = "bernoulli", epsilon = "normal", out;
  double p = 0.5;
  std::uint64_t seed = 0;

  void add(CLI::App& app) {
    auto* c = app.add_subcommand("simulate", "Draw an assignment and simulate outcomes");
    c->add_option("--graph", graph, "Edge-list file")->required();
    c->add_option("--model", model, "lim:a,b,d,g | contagion:a,b,d,g")->required();
    c->add_option("--eligible", eligible, "'all' or a count of randomly chosen eligible units");
    c->add_option("--design", design, "bernoulli | blocks")->check(CLI::IsMember({"bernoulli", "blocks"}));
    c->add_option("--p", p, "Treatment probability (blocks: treated share)");
    c->add_option("--epsilon", epsilon, "normal or zero");
    c->add_option("--seed", seed, "Random seed")->required();
    c->add_option("--out", out, "Units CSV output (default stdout)");
  }

  int run(std::ostream& o) const {
    const auto spec = ModelSpec::parse(model);
    const auto mode = parse_epsilon_mode(epsilon);
    if (mode == EpsilonMode::Homophily) {
      throw InputError("simulate: homophily shocks need RGG positions; use the mc subcommand");
    }
    const Graph g = load_graph(graph);
    const std::size_t n = g.size();
    const auto elig = pick_eligible(n, eligible, seed);
    const Design d = make_design(n, elig, design, p);
    const auto eps = draw_epsilon(n, mode, derive_seed(seed, kEpsStream, 0));
    const auto assign = sample_assignment(d, derive_seed(seed, kAssignStream, 0));
    const auto y = spec.build(g, eps)(assign);
    UnitsTable t;
    for (std::size_t i = 0; i < n; ++i) {
      t.outcome.push_back(y[i]);
      t.treatment.push_back(assign[i]);
      t.eligible.push_back(d.eligible(static_cast<NodeId>(i)));
      if (d.is_blocks() && d.eligible(static_cast<NodeId>(i))) t.block.push_back(0);
      else t.block.push_back(std::nullopt);
    }
    std::ostringstream text;
    write_units_csv(text, t);
    emit(out, o, text.str());
    return 0;
  }
};

struct Estimate {
  std::string graph, units, exposure = "any-nbr", bandwidth = "auto", variance = "hac,naive",
                            sample = "has-eligible-neighbor", sweep, format = "json", out;
  int t = 1, t0 = 0;
  double p = 0.5;
  bool literal = false;
  std::size_t propensity_reps = 100000, pair_reps = 100000, threads = 0;
  std::uint64_t seed = 0;

  void add(CLI::App& app) {
    auto* c = app.add_subcommand("estimate", "IPW estimate with HAC / AS / naive standard errors");
    c->add_option("--graph", graph, "Edge-list file")->required();
    c->add_option("--units", units, "Units CSV (id,outcome,treatment,eligible,block)")->required();
    c->add_option("--exposure", exposure, "own | any-nbr | frac-nbr:<edges>");
    c->add_option("--t", t, "Exposure value t");
    c->add_option("--t0", t0, "Exposure value t0");
    c->add_option("--bandwidth", bandwidth, "auto | <int>");
    c->add_option("--variance", variance, "Comma list of hac, as, naive");
    c->add_option("--sample", sample, "all | has-eligible-neighbor")
        ->check(CLI::IsMember({"all", "has-eligible-neighbor"}));
    c->add_option("--p", p, "Bernoulli treatment probability of eligible units (no block column)");
    c->add_flag("--literal-eq7", literal, "Flip the regime comparison of the bandwidth rule");
    c->add_option("--bandwidth-sweep", sweep, "Range a..b of HAC bandwidths to tabulate");
    c->add_option("--propensity-reps", propensity_reps, "Monte Carlo draws for exposures without closed form");
    c->add_option("--pair-reps", pair_reps, "Monte Carlo draws for pairwise propensities without closed form");
    c->add_option("--seed", seed, "Seed for Monte Carlo propensities");
    c->add_option("--threads", threads, "Worker threads (default ANI_THREADS or all cores)");
    c->add_option("--format", format, "json | table")->check(CLI::IsMember({"json", "table"}));
    c->add_option("--out", out, "Output file (default stdout)");
  }

  int run(std::ostream& o) const {
    const auto spec = ExposureSpec::parse(exposure);
    if (!spec.in_support(t) || !spec.in_support(t0)) throw InputError("estimate: --t/--t0 outside the exposure support");
    const auto table = read_units_csv_file(units);
    const Graph g = load_graph(graph, table.size());
    if (g.size() != table.size()) throw InputError("estimate: units CSV and graph disagree on the number of units");
    Assignment d(table.size());
    for (std::size_t i = 0; i < table.size(); ++i) {
      if (!table.treatment[i]) throw InputError("estimate: unit " + std::to_string(i) + " has no treatment");
      d[i] = *table.treatment[i];
      if (d[i] && !table.eligible[i]) throw InputError("estimate: ineligible unit " + std::to_string(i) + " is treated");
    }
    const Design design = design_from_units(table, p);
    const bool closed = spec.kind() != ExposureSpec::Kind::FractionTreatedNeighborsBinned;
    const auto pi = propensity(design, spec, g.links(),
                               closed ? PropensityMethod::exact() : PropensityMethod::monte_carlo(propensity_reps, seed));
    auto sample_units = sample == "all" ? all_units(g.size()) : units_with_eligible_neighbor(design, g.links());
    const auto ex = compute_exposures(spec, d, g.links());
    const Sample s = make_sample(std::move(sample_units), table.outcome, ex, pi);
    auto report = ipw_point(s, t, t0);

    const auto k = spec.radius();
    if (bandwidth == "auto") {
      report.bandwidth = bandwidth_rule(summary(g, threads), g.size(), k, literal);
    } else {
      BandwidthChoice c;
      c.regime = "fixed";
      c.b = parse_range(bandwidth).at(0);
      c.b_tilde = c.b;
      report.bandwidth = c;
    }
    std::stringstream vs(variance);
    std::string name;
    while (std::getline(vs, name, ',')) {
      if (name == "hac") {
        report.variance["hac"] = hac_variance(s, report, g, report.bandwidth->b, HacTarget::Contrast, threads);
        report.variance["hac_mu_t"] = hac_variance(s, report, g, report.bandwidth->b, HacTarget::MuT, threads);
        report.variance["hac_mu_t0"] = hac_variance(s, report, g, report.bandwidth->b, HacTarget::MuT0, threads);
      } else if (name == "naive") {
        report.variance["naive"] = hac_variance(s, report, g, 0, HacTarget::Contrast, threads);
      } else if (name == "as") {
        PairOptions opt;
        opt.mc_reps = pair_reps;
        opt.seed = seed;
        const auto pairs = pairwise_propensity(design, spec, g.links(), s.units, t, t0, opt);
        for (const auto& w : pairs.warnings) std::cerr << "warning: " << w << "\n";
        report.variance["as"] = as_variance(s, report, pairs);
      } else {
        throw InputError("estimate: unknown variance estimator '" + name + "' (expected hac, as, naive)");
      }
    }

    json j = to_json(report);
    const std::vector<ExposureValue> contrast{t, t0};
    const auto audit = pi.audit(s.units, contrast);
    j["overlap"] = {{"min", num(audit.min)}, {"max", num(audit.max)}};
    j["exposure"] = spec.to_string();
    std::vector<json> rows;
    if (!sweep.empty()) {
      for (auto b : parse_range(sweep)) {
        const auto v = hac_variance(s, report, g, b, HacTarget::Contrast, threads);
        const auto v1 = hac_variance(s, report, g, b, HacTarget::MuT, threads);
        const auto v0 = hac_variance(s, report, g, b, HacTarget::MuT0, threads);
        rows.push_back({{"b", b}, {"se_tau", num(v.se)}, {"se_mu_t", num(v1.se)}, {"se_mu_t0", num(v0.se)}});
      }
      j["sweep"] = rows;
    }
    if (format == "json") {
      emit(out, o, j.dump(2) + "\n");
      return 0;
    }
    std::ostringstream text;
    text << std::fixed << std::setprecision(3);
    text << "tau(" << t << "," << t0 << ")  " << report.tau << "\n";
    text << "mu(" << t << ")      " << report.mu_t << "\n";
    text << "mu(" << t0 << ")      " << report.mu_t0 << "\n";
    text << "n               " << report.n << "  (n(t) " << report.n_eff_t << ", n(t0) " << report.n_eff_t0 << ")\n";
    text << "bandwidth       " << report.bandwidth->b << " (" << report.bandwidth->regime << ")\n";
    if (!rows.empty()) {
      text << "\n   b   SE tau   SE mu(t)  SE mu(t0)\n";
      for (const auto& r : rows) {
        auto cell = [](const json& v) {
          std::ostringstream c;
          c << std::fixed << std::setprecision(3) << std::setw(9);
          if (v.is_null()) c << "nan";
          else c << v.get<double>();
          return c.str();
        };
        text << std::setw(4) << r["b"].get<std::uint32_t>() << cell(r["se_tau"]) << "  " << cell(r["se_mu_t"]) << "  "
             << cell(r["se_mu_t0"]) << "\n";
      }
    }
    for (const auto& [nm, v] : report.variance) {
      text << nm << ": se " << v.se << "  ci [" << v.ci_lo << ", " << v.ci_hi << "]" << (v.psd ? "" : "  (not PSD)")
           << "\n";
    }
    emit(out, o, text.str());
    return 0;
  }
};

struct Diagnose {
  std::string graph, out;
  std::uint32_t s_max = 3, k_max = 2, k = 1;
  bool literal = false;
  std::size_t threads = 0;
  double apl = -1.0, avg_degree = -1.0;
  std::size_t n = 0;

  void add(CLI::App& app) {
    auto* c = app.add_subcommand("diagnose", "Graph summary, neighborhood profile and suggested bandwidth");
    c->add_option("--graph", graph, "Edge-list file");
    c->add_option("--s-max", s_max, "Largest radius for the neighborhood profile");
    c->add_option("--k-max", k_max, "Largest moment for the neighborhood profile");
    c->add_option("--K", k, "Exposure radius K");
    c->add_flag("--literal-eq7", literal, "Flip the regime comparison of the bandwidth rule");
    c->add_option("--apl", apl, "Use this APL instead of computing it");
    c->add_option("--avg-degree", avg_degree, "Use this average degree");
    c->add_option("--n", n, "Use this network size");
    c->add_option("--threads", threads, "Worker threads");
    c->add_option("--out", out, "Output file (default stdout)");
  }

  int run(std::ostream& o) const {
    json j;
    GraphSummary s;
    std::size_t size = n;
    if (!graph.empty()) {
      const Graph g = load_graph(graph);
      s = summary(g, threads);
      j["summary"] = summary_json(g, s);
      const auto prof = neighborhood_profile(g, s_max, k_max);
      json bm = json::array(), mom = json::array();
      for (double v : prof.boundary_mean()) bm.push_back(num(v));
      for (std::uint32_t r = 0; r <= s_max; ++r) {
        json row = json::array();
        for (std::uint32_t q = 0; q <= k_max; ++q) row.push_back(num(prof.moment(r, q)));
        mom.push_back(row);
      }
      j["profile"] = {{"boundary_mean", bm}, {"moments", mom}};
      if (size == 0) size = g.size();
    } else if (apl < 0.0 || avg_degree < 0.0 || n == 0) {
      throw InputError("diagnose: give --graph, or all of --apl, --avg-degree and --n");
    }
    if (apl >= 0.0) s.apl = apl;
    if (avg_degree >= 0.0) s.avg_degree = avg_degree;
    j["bandwidth"] = bandwidth_json(bandwidth_rule(s, size, k, literal));
    emit(out, o, j.dump(2) + "\n");
    return 0;
  }
};

struct Mc {
  std::string config, out_json, out_csv;
  std::size_t threads = 0;
  std::optional<std::size_t> reps, oracle_reps;
  std::optional<std::uint64_t> seed;

  void add(CLI::App& app) {
    auto* c = app.add_subcommand("mc", "Monte Carlo coverage / bias experiment from a JSON config");
    c->add_option("--config", config, "McConfig JSON file")->required();
    c->add_option("--out-json", out_json, "JSON summary output (default stdout)");
    c->add_option("--out-csv", out_csv, "CSV output, one row per estimator");
    c->add_option("--threads", threads, "Worker threads (results do not depend on it)");
    c->add_option("--reps", reps, "Override reps");
    c->add_option("--oracle-reps", oracle_reps, "Override oracle_reps");
    c->add_option("--seed", seed, "Override seed");
  }

  int run(std::ostream& o) const {
    std::ifstream in(config);
    if (!in) throw InputError("cannot open '" + config + "'");
    json j;
    try {
      j = json::parse(in);
    } catch (const json::exception& e) {
      throw InputError(std::string("mc config is not valid JSON: ") + e.what());
    }
    auto cfg = McConfig::from_json(j, std::filesystem::path(config).parent_path().string());
    if (reps) cfg.reps = *reps;
    if (oracle_reps) cfg.oracle_reps = *oracle_reps;
    if (seed) cfg.seed = *seed;
    if (threads) cfg.threads = threads;
    const auto rep = run_mc(cfg);
    json outj = rep.to_json();
    outj["config"] = cfg.to_json();
    emit(out_json, o, outj.dump(2) + "\n");
    if (!out_csv.empty()) emit(out_csv, o, rep.to_csv());
    return 0;
  }
};

struct Oracle {
  std::string graph, units, model, exposure = "any-nbr", out;
  int t = 1, t0 = 0;
  double p = 0.5;
  std::optional<std::uint32_t> b;
  std::optional<std::uint64_t> seed;
  std::size_t limit = std::size_t{1} << 20;

  void add(CLI::App& app) {
    auto* c = app.add_subcommand("oracle", "Exact estimands by enumerating a small design");
    c->add_option("--graph", graph, "Edge-list file")->required();
    c->add_option("--units", units, "Units CSV giving eligibility and blocks")->required();
    c->add_option("--model", model, "lim:a,b,d,g | contagion:a,b,d,g")->required();
    c->add_option("--exposure", exposure, "own | any-nbr | frac-nbr:<edges>");
    c->add_option("--t", t, "Exposure value t");
    c->add_option("--t0", t0, "Exposure value t0");
    c->add_option("--p", p, "Bernoulli treatment probability of eligible units");
    c->add_option("--bandwidth", b, "HAC bandwidth for R_n (default 2K)");
    c->add_option("--seed", seed, "Draw N(0,1) shocks with this seed (default: zero shocks)");
    c->add_option("--limit", limit, "Largest number of assignments to enumerate");
    c->add_option("--out", out, "Output file (default stdout)");
  }

  int run(std::ostream& o) const {
    const auto spec = ExposureSpec::parse(exposure);
    const auto table = read_units_csv_file(units);
    const Graph g = load_graph(graph, table.size());
    if (g.size() != table.size()) throw InputError("oracle: units CSV and graph disagree on the number of units");
    const Design design = design_from_units(table, p);
    std::vector<double> eps;
    if (seed) eps = draw_epsilon(g.size(), EpsilonMode::Normal, derive_seed(*seed, kEpsStream, 0));
    const auto m = ModelSpec::parse(model).build(g, eps);
    ExactOptions opt;
    opt.limit = limit;
    const auto e = exact_estimands(m, design, spec, g, t, t0, b.value_or(2 * spec.radius()), opt);
    json j = to_json(e);
    j["max_abs_outcome"] = num(m.max_abs_seen());
    emit(out, o, j.dump(2) + "\n");
    return 0;
  }
};

}  // namespace

int dispatch(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Design-based inference under approximate neighborhood interference", "ani"};
  app.require_subcommand(1);
  GenGraph gen;
  Simulate sim;
  Estimate est;
  Diagnose diag;
  Mc mc;
  Oracle orc;
  gen.add(app);
  sim.add(app);
  est.add(app);
  diag.add(app);
  mc.add(app);
  orc.add(app);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    app.exit(e, out, err);
    return 0;
  } catch (const CLI::CallForAllHelp& e) {
    app.exit(e, out, err);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n";
    const CLI::App* sub = app.get_subcommands().empty() ? &app : app.get_subcommands().front();
    err << sub->help();
    return 1;
  }

  try {
    const auto* sub = app.get_subcommands().front();
    const std::string name = sub->get_name();
    if (name == "gen-graph") return gen.run(out);
    if (name == "simulate") return sim.run(out);
    if (name == "estimate") return est.run(out);
    if (name == "diagnose") return diag.run(out);
    if (name == "mc") return mc.run(out);
    if (name == "oracle") return orc.run(out);
  } catch (const CapacityError& e) {
    err << "capacity error: " << e.what() << "\n";
    return 2;
  } catch (const NumericError& e) {
    err << "numeric error: " << e.what() << " (residual " << e.residual() << ")\n";
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}

}  // namespace ani::cli
