#include "ani/outcomes.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include <Eigen/Dense>

#include "ani/errors.hpp"
#include "ani/rng.hpp"

namespace ani {

namespace {

constexpr std::size_t kDirectSolveMax = 256;
constexpr double kResidualTol = 1e-11;

std::vector<double> neighbor_share(const Graph& g, std::span<const std::uint8_t> d) {
  std::vector<double> f(g.size(), 0.0);
  for (NodeId i = 0; i < g.size(); ++i) {
    const auto nb = g.neighbors(i);
    if (nb.empty()) continue;
    std::size_t c = 0;
    for (NodeId j : nb) c += d[j] ? 1 : 0;
    f[i] = static_cast<double>(c) / static_cast<double>(nb.size());
  }
  return f;
}

void check_lengths(const Graph& g, std::span<const std::uint8_t> d, const std::vector<double>& eps) {
  if (d.size() != g.size()) throw InputError("assignment length does not match the network");
  if (!eps.empty() && eps.size() != g.size()) throw InputError("epsilon length does not match the network");
}

// max_i |(I - beta At) y - rhs|_i
double lim_residual(const Graph& g, double beta, const std::vector<double>& y, const std::vector<double>& rhs) {
  double worst = 0.0;
  for (NodeId i = 0; i < g.size(); ++i) {
    const auto nb = g.neighbors(i);
    double m = 0.0;
    for (NodeId j : nb) m += y[j];
    if (!nb.empty()) m /= static_cast<double>(nb.size());
    worst = std::max(worst, std::abs(y[i] - beta * m - rhs[i]));
  }
  return worst;
}

}  // namespace

std::vector<double> linear_in_means(const Graph& g, const LimParams& p, std::span<const std::uint8_t> d) {
  if (!(std::abs(p.beta) < 1.0)) throw InputError("linear-in-means needs |beta| < 1");
  check_lengths(g, d, p.epsilon);
  const std::size_t n = g.size();
  const auto share = neighbor_share(g, d);
  std::vector<double> rhs(n);
  for (std::size_t i = 0; i < n; ++i) {
    rhs[i] = p.alpha + p.delta * share[i] + p.gamma * (d[i] ? 1.0 : 0.0) + (p.epsilon.empty() ? 0.0 : p.epsilon[i]);
  }

  std::vector<double> y(n);
  if (n <= kDirectSolveMax) {
    Eigen::MatrixXd m = Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    for (NodeId i = 0; i < n; ++i) {
      const auto nb = g.neighbors(i);
      for (NodeId j : nb) m(i, j) -= p.beta / static_cast<double>(nb.size());
    }
    Eigen::Map<const Eigen::VectorXd> b(rhs.data(), static_cast<Eigen::Index>(n));
    Eigen::VectorXd x = m.partialPivLu().solve(b);
    for (std::size_t i = 0; i < n; ++i) y[i] = x(static_cast<Eigen::Index>(i));
  } else {
    // Fixed-point iteration y <- rhs + beta At y; contraction factor |beta|.
    y = rhs;
    std::vector<double> next(n);
    const std::size_t cap = 100000;
    double step = std::numeric_limits<double>::infinity();
    for (std::size_t it = 0; it < cap && step >= kResidualTol; ++it) {
      step = 0.0;
      for (NodeId i = 0; i < n; ++i) {
        const auto nb = g.neighbors(i);
        double m = 0.0;
        for (NodeId j : nb) m += y[j];
        if (!nb.empty()) m /= static_cast<double>(nb.size());
        next[i] = rhs[i] + p.beta * m;
        step = std::max(step, std::abs(next[i] - y[i]));
      }
      y.swap(next);
    }
  }
  const double res = lim_residual(g, p.beta, y, rhs);
  if (!(res < 1e-10)) throw NumericError("linear-in-means solve did not converge", res);
  return y;
}

std::vector<double> complex_contagion(const Graph& g, const ContagionParams& p, std::span<const std::uint8_t> d,
                                      ContagionTrace* trace) {
  if (!(p.beta >= 0.0)) throw InputError("complex contagion needs beta >= 0");
  check_lengths(g, d, p.epsilon);
  const std::size_t n = g.size();
  if (!p.start.empty() && p.start.size() != n) throw InputError("start vector length does not match the network");

  const auto share = neighbor_share(g, d);
  std::vector<double> base(n);
  for (std::size_t i = 0; i < n; ++i) {
    base[i] = p.alpha + p.delta * share[i] + p.gamma * (d[i] ? 1.0 : 0.0) + (p.epsilon.empty() ? 0.0 : p.epsilon[i]);
  }
  std::vector<std::uint8_t> y(n, 0);
  if (!p.start.empty()) {
    for (std::size_t i = 0; i < n; ++i) y[i] = p.start[i] ? 1 : 0;
  }
  std::vector<std::size_t> active(n, 0);  // active neighbors under the current y
  for (NodeId i = 0; i < n; ++i) {
    for (NodeId j : g.neighbors(i)) active[i] += y[j];
  }

  auto next_value = [&](NodeId i) -> std::uint8_t {
    const auto deg = g.degree(i);
    const double f = deg ? static_cast<double>(active[i]) / static_cast<double>(deg) : 0.0;
    return base[i] + p.beta * f > 0.0 ? 1 : 0;
  };

  // Only units whose neighbors changed can change next period.
  std::vector<NodeId> candidates(n);
  for (NodeId i = 0; i < n; ++i) candidates[i] = i;
  std::vector<std::uint8_t> queued(n, 0);
  std::vector<NodeId> flips;
  const std::size_t cap = n < 20 ? (std::size_t{1} << n) + 1 : std::size_t{1} << 20;
  ContagionTrace tr;
  for (std::size_t period = 1;; ++period) {
    if (period > cap) throw NumericError("contagion did not reach a fixed point", static_cast<double>(flips.size()));
    flips.clear();
    for (NodeId i : candidates) {
      if (next_value(i) != y[i]) flips.push_back(i);
    }
    if (flips.empty()) {
      tr.periods = period;
      break;
    }
    for (NodeId i : flips) {
      if (y[i]) tr.monotone = false;
      y[i] ^= 1;
    }
    candidates.clear();
    for (NodeId i : flips) {
      for (NodeId j : g.neighbors(i)) {
        if (y[i]) ++active[j];
        else --active[j];
        if (!queued[j]) {
          queued[j] = 1;
          candidates.push_back(j);
        }
      }
    }
    for (NodeId j : candidates) queued[j] = 0;
    std::sort(candidates.begin(), candidates.end());
  }
  if (trace) *trace = tr;
  return std::vector<double>(y.begin(), y.end());
}

OutcomeModel OutcomeModel::linear_in_means(Graph g, LimParams p) {
  if (!(std::abs(p.beta) < 1.0)) throw InputError("linear-in-means needs |beta| < 1");
  const std::size_t n = g.size();
  auto gp = std::make_shared<const Graph>(std::move(g));
  auto pp = std::make_shared<const LimParams>(std::move(p));
  return OutcomeModel(Kind::LinearInMeans, n, [gp, pp](std::span<const std::uint8_t> d) {
    return ani::linear_in_means(*gp, *pp, d);
  });
}

OutcomeModel OutcomeModel::contagion(Graph g, ContagionParams p) {
  if (!(p.beta >= 0.0)) throw InputError("complex contagion needs beta >= 0");
  const std::size_t n = g.size();
  auto gp = std::make_shared<const Graph>(std::move(g));
  auto pp = std::make_shared<const ContagionParams>(std::move(p));
  return OutcomeModel(Kind::Contagion, n, [gp, pp](std::span<const std::uint8_t> d) {
    return complex_contagion(*gp, *pp, d);
  });
}

OutcomeModel OutcomeModel::exposure_table(ExposureSpec exposure, Adjacency links, std::vector<double> table) {
  const std::size_t n = links.size();
  auto support = exposure.support();
  if (table.size() != n * support.size()) throw InputError("outcome table must hold n x |support| values");
  auto t = std::make_shared<const Table>(Table{std::move(exposure), std::move(links), std::move(support), std::move(table)});
  OutcomeModel m(Kind::ExposureTable, n, [t](std::span<const std::uint8_t> d) {
    const std::size_t s = t->support.size();
    const auto ex = compute_exposures(t->exposure, d, t->links);
    std::vector<double> y(ex.size());
    for (std::size_t i = 0; i < ex.size(); ++i) {
      const auto k = static_cast<std::size_t>(std::find(t->support.begin(), t->support.end(), ex[i]) - t->support.begin());
      y[i] = t->values[i * s + k];
    }
    return y;
  });
  m.table_ = std::move(t);
  return m;
}

OutcomeModel OutcomeModel::custom(std::size_t n, Evaluator fn) { return OutcomeModel(Kind::Custom, n, std::move(fn)); }

std::vector<double> OutcomeModel::operator()(std::span<const std::uint8_t> d) const {
  if (d.size() != n_) throw InputError("assignment length does not match the outcome model");
  auto y = fn_(d);
  double local = 0.0;
  for (double v : y) local = std::max(local, std::abs(v));
  double seen = max_abs_->load();
  while (local > seen && !max_abs_->compare_exchange_weak(seen, local)) {
  }
  return y;
}

std::optional<double> OutcomeModel::potential(NodeId i, ExposureValue t) const {
  if (!table_) return std::nullopt;
  const auto& sup = table_->support;
  const auto it = std::find(sup.begin(), sup.end(), t);
  if (it == sup.end() || i >= n_) return std::nullopt;
  return table_->values[i * sup.size() + static_cast<std::size_t>(it - sup.begin())];
}

ModelSpec ModelSpec::parse(std::string_view text) {
  ModelSpec m;
  const auto colon = text.find(':');
  if (colon == std::string_view::npos) throw InputError("model '" + std::string(text) + "' needs the form kind:a,b,d,g");
  const auto kind = text.substr(0, colon);
  if (kind == "lim") m.kind = Kind::LinearInMeans;
  else if (kind == "contagion") m.kind = Kind::Contagion;
  else throw InputError("unknown model kind '" + std::string(kind) + "' (expected lim or contagion)");

  std::vector<double> v;
  std::stringstream ss{std::string(text.substr(colon + 1))};
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      v.push_back(std::stod(item, &used));
      if (used != item.size()) throw InputError("");
    } catch (const std::exception&) {
      throw InputError("bad model parameter '" + item + "'");
    }
  }
  if (v.size() != 4) throw InputError("model '" + std::string(text) + "' needs four parameters alpha,beta,delta,gamma");
  m.alpha = v[0];
  m.beta = v[1];
  m.delta = v[2];
  m.gamma = v[3];
  if (m.kind == Kind::LinearInMeans && !(std::abs(m.beta) < 1.0)) throw InputError("linear-in-means needs |beta| < 1");
  if (m.kind == Kind::Contagion && !(m.beta >= 0.0)) throw InputError("complex contagion needs beta >= 0");
  return m;
}

std::string ModelSpec::to_string() const {
  std::ostringstream os;
  os << (kind == Kind::LinearInMeans ? "lim:" : "contagion:") << alpha << ',' << beta << ',' << delta << ',' << gamma;
  return os.str();
}

OutcomeModel ModelSpec::build(Graph g, std::vector<double> epsilon) const {
  if (kind == Kind::LinearInMeans) return OutcomeModel::linear_in_means(std::move(g), {alpha, beta, delta, gamma, std::move(epsilon)});
  return OutcomeModel::contagion(std::move(g), {alpha, beta, delta, gamma, std::move(epsilon), {}});
}

EpsilonMode parse_epsilon_mode(std::string_view text) {
  if (text == "normal") return EpsilonMode::Normal;
  if (text == "homophily") return EpsilonMode::Homophily;
  if (text == "zero") return EpsilonMode::Zero;
  throw InputError("unknown epsilon mode '" + std::string(text) + "' (expected normal, homophily or zero)");
}

std::vector<double> draw_epsilon(std::size_t n, EpsilonMode mode, std::uint64_t seed, const RggPlacement* placement) {
  if (mode == EpsilonMode::Homophily && (!placement || placement->positions.size() != n)) {
    throw InputError("homophily shocks need the RGG placement of every unit");
  }
  std::vector<double> eps(n, 0.0);
  if (mode == EpsilonMode::Zero) return eps;
  Rng rng = make_rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (std::size_t i = 0; i < n; ++i) {
    eps[i] = normal(rng);
    if (mode == EpsilonMode::Homophily) eps[i] += placement->positions[i][0] - 0.5;
  }
  return eps;
}

std::vector<std::vector<double>> ani_delta_profiles(const OutcomeModel& model, const Graph& g, std::uint32_t s_max,
                                                    const Design* design) {
  const std::size_t n = g.size();
  if (n > 16) throw CapacityError("exhaustive Delta needs n <= 16; use a sampling approach for larger networks");
  if (model.size() != n) throw InputError("outcome model size does not match the network");
  if (design && design->size() != n) throw InputError("design size does not match the network");

  std::vector<std::uint32_t> masks;
  if (design) {
    for (const auto& wa : enumerate_assignments(*design, std::size_t{1} << 16)) {
      std::uint32_t m = 0;
      for (std::size_t i = 0; i < n; ++i) m |= static_cast<std::uint32_t>(wa.d[i]) << i;
      masks.push_back(m);
    }
  } else {
    masks.resize(std::size_t{1} << n);
    for (std::uint32_t m = 0; m < masks.size(); ++m) masks[m] = m;
  }
  std::vector<std::vector<double>> y(masks.size());
  Assignment d(n);
  for (std::size_t k = 0; k < masks.size(); ++k) {
    for (std::size_t i = 0; i < n; ++i) d[i] = masks[k] >> i & 1;
    y[k] = model(d);
  }

  std::vector<std::vector<double>> out(n, std::vector<double>(s_max + 1, 0.0));
  const std::size_t cells = std::size_t{1} << n;
  std::vector<double> lo(cells), hi(cells);
  std::vector<std::uint8_t> seen(cells);
  BfsWorkspace ws(n);
  for (NodeId i = 0; i < n; ++i) {
    const auto reach = ws.run(g.links(), i, s_max);
    for (std::uint32_t s = 0; s <= s_max; ++s) {
      std::uint32_t ball = 0;
      for (const auto& r : reach) {
        if (r.distance <= s) ball |= 1u << r.node;
      }
      std::fill(seen.begin(), seen.end(), 0);
      double worst = 0.0;
      for (std::size_t k = 0; k < masks.size(); ++k) {
        const std::uint32_t key = masks[k] & ball;
        const double v = y[k][i];
        if (!seen[key]) {
          seen[key] = 1;
          lo[key] = hi[key] = v;
        } else {
          lo[key] = std::min(lo[key], v);
          hi[key] = std::max(hi[key], v);
        }
        worst = std::max(worst, hi[key] - lo[key]);
      }
      out[i][s] = worst;
    }
  }
  return out;
}

std::vector<double> ani_delta_profile(const OutcomeModel& model, const Graph& g, NodeId unit, std::uint32_t s_max,
                                      const Design* design) {
  if (unit >= g.size()) throw InputError("unit out of range");
  return ani_delta_profiles(model, g, s_max, design)[unit];
}

std::vector<std::uint8_t> contagion_sigma(const Graph& g, const ContagionParams& p) {
  if (!p.epsilon.empty() && p.epsilon.size() != g.size()) throw InputError("epsilon length does not match the network");
  std::vector<std::uint8_t> sigma(g.size(), 0);
  for (NodeId j = 0; j < g.size(); ++j) {
    const std::size_t deg = g.degree(j);
    const double eps = p.epsilon.empty() ? 0.0 : p.epsilon[j];
    for (int dj = 0; dj <= 1 && !sigma[j]; ++dj) {
      for (std::size_t k = 0; k <= deg; ++k) {
        const double f = deg ? static_cast<double>(k) / static_cast<double>(deg) : 0.0;
        const double phi = -(p.alpha + p.delta * f + p.gamma * dj + eps);
        if (phi >= 0.0 && phi <= p.beta) {
          sigma[j] = 1;
          break;
        }
      }
    }
  }
  return sigma;
}

double spectral_growth(const Adjacency& links, std::span<const std::uint8_t> sigma, std::uint32_t s_bar,
                       std::uint32_t s_max) {
  const std::size_t n = links.size();
  if (sigma.size() != n) throw InputError("sigma length does not match the network");
  if (s_bar >= s_max) throw InputError("need s_bar < s_max");
  if (s_max > 100000) throw InputError("s_max above the cap of 100000");
  // v = G^s 1 / scale, with log(scale) tracked to avoid overflow.
  std::vector<double> v(n, 1.0), next(n);
  double log_scale = 0.0;
  double rho = 0.0;
  for (std::uint32_t s = 1; s <= s_max; ++s) {
    double top = 0.0;
    for (NodeId i = 0; i < n; ++i) {
      double acc = 0.0;
      for (NodeId j : links.neighbors(i)) {
        if (sigma[j]) acc += v[j];
      }
      next[i] = acc;
      top = std::max(top, acc);
    }
    if (top == 0.0) break;  // nilpotent: every later power vanishes
    for (auto& x : next) x /= top;
    v.swap(next);
    log_scale += std::log(top);
    if (s > s_bar) rho = std::max(rho, std::exp(log_scale / s));
  }
  return rho;
}

double contagion_rho(const Graph& g, const ContagionParams& p, std::uint32_t s_bar, std::uint32_t s_max) {
  return spectral_growth(g.links(), contagion_sigma(g, p), s_bar, s_max);
}

}  // namespace ani
