#include "ani/design.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "ani/errors.hpp"
#include "ani/parallel.hpp"
#include "ani/rng.hpp"

namespace ani {

namespace {

constexpr std::uint64_t kAssignStream = 0x61737369676eULL;
constexpr std::uint64_t kPropensityStream = 0x70726f70ULL;
constexpr std::uint64_t kPairStream = 0x70616972ULL;

// P(no draw lands among c marked units) when T of `size` are drawn without replacement.
double zero_draw(std::size_t size, std::size_t marked, std::size_t treated) {
  if (marked + treated > size) return 0.0;
  double q = 1.0;
  for (std::size_t k = 0; k < treated; ++k) {
    q *= static_cast<double>(size - marked - k) / static_cast<double>(size - k);
  }
  return q;
}

// Probability that no unit of `units` (sorted, unique) is treated.
double none_treated(const Design& design, std::span<const NodeId> units) {
  if (design.is_bernoulli()) {
    double q = 1.0;
    for (NodeId k : units) q *= 1.0 - design.treat_probability(k);
    return q;
  }
  std::vector<std::size_t> hits;
  for (NodeId k : units) {
    const auto b = design.block_of(k);
    if (b != Design::kNoBlock) hits.push_back(b);
  }
  std::sort(hits.begin(), hits.end());
  double q = 1.0;
  const auto blocks = design.block_list();
  for (std::size_t a = 0; a < hits.size();) {
    std::size_t e = a;
    while (e < hits.size() && hits[e] == hits[a]) ++e;
    const auto& blk = blocks[hits[a]];
    q *= zero_draw(blk.units.size(), e - a, blk.treated);
    a = e;
  }
  return q;
}

std::vector<NodeId> set_union(std::span<const NodeId> a, std::span<const NodeId> b) {
  std::vector<NodeId> out;
  std::set_union(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
  return out;
}

bool disjoint(std::span<const NodeId> a, std::span<const NodeId> b) {
  auto x = a.begin(), y = b.begin();
  while (x != a.end() && y != b.end()) {
    if (*x == *y) return false;
    if (*x < *y) ++x;
    else ++y;
  }
  return true;
}

std::vector<NodeId> set_difference(std::span<const NodeId> a, std::span<const NodeId> b) {
  std::vector<NodeId> out;
  std::set_difference(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
  return out;
}

// Feasibility of: every unit of `zeros` untreated, every unit of `ones`
// treated, and each set in `hits` containing at least one treated unit.
// `ones` and `hits` are never both non-empty here.
bool feasible(const Design& design, std::vector<NodeId> zeros, std::vector<NodeId> ones,
              const std::vector<std::vector<NodeId>>& hits) {
  std::sort(zeros.begin(), zeros.end());
  zeros.erase(std::unique(zeros.begin(), zeros.end()), zeros.end());
  std::sort(ones.begin(), ones.end());
  ones.erase(std::unique(ones.begin(), ones.end()), ones.end());
  for (NodeId o : ones) {
    if (std::binary_search(zeros.begin(), zeros.end(), o)) return false;
  }

  if (design.is_bernoulli()) {
    for (NodeId z : zeros) {
      if (design.treat_probability(z) >= 1.0) return false;
    }
    for (NodeId o : ones) {
      if (design.treat_probability(o) <= 0.0) return false;
    }
    for (const auto& h : hits) {
      bool any = false;
      for (NodeId k : h) {
        if (design.treat_probability(k) > 0.0 && !std::binary_search(zeros.begin(), zeros.end(), k)) {
          any = true;
          break;
        }
      }
      if (!any) return false;
    }
    return true;
  }

  const auto blocks = design.block_list();
  std::vector<std::size_t> zero_count(blocks.size(), 0), one_count(blocks.size(), 0);
  for (NodeId z : zeros) {
    const auto b = design.block_of(z);
    if (b != Design::kNoBlock) ++zero_count[b];
  }
  for (NodeId o : ones) {
    const auto b = design.block_of(o);
    if (b == Design::kNoBlock) return false;
    ++one_count[b];
  }
  for (std::size_t b = 0; b < blocks.size(); ++b) {
    if (one_count[b] > blocks[b].treated) return false;
    if (zero_count[b] > blocks[b].units.size() - blocks[b].treated) return false;
  }
  if (hits.empty()) return true;

  // Candidate hitters per set: block units outside `zeros`, in blocks with T_b >= 1.
  auto candidates = [&](const std::vector<NodeId>& h) {
    std::vector<NodeId> c;
    for (NodeId k : h) {
      const auto b = design.block_of(k);
      if (b == Design::kNoBlock || blocks[b].treated == 0) continue;
      if (std::binary_search(zeros.begin(), zeros.end(), k)) continue;
      c.push_back(k);
    }
    return c;
  };
  std::vector<std::vector<NodeId>> cand;
  for (const auto& h : hits) {
    cand.push_back(candidates(h));
    if (cand.back().empty()) return false;
  }
  if (cand.size() == 1) return true;
  // Two requirements: one shared unit, or two units that can be treated together.
  for (NodeId x : cand[0]) {
    for (NodeId y : cand[1]) {
      if (x == y) return true;
      const auto bx = design.block_of(x), by = design.block_of(y);
      if (bx != by || blocks[bx].treated >= 2) return true;
    }
  }
  return false;
}

// Conditions under which T_x = value for the given exposure.
void add_condition(const ExposureSpec& exposure, const Adjacency& links, NodeId x, ExposureValue value,
                   std::vector<NodeId>& zeros, std::vector<NodeId>& ones, std::vector<std::vector<NodeId>>& hits) {
  if (exposure.kind() == ExposureSpec::Kind::OwnTreatment) {
    (value ? ones : zeros).push_back(x);
    return;
  }
  const auto nb = links.neighbors(x);
  if (value) {
    hits.emplace_back(nb.begin(), nb.end());
  } else {
    zeros.insert(zeros.end(), nb.begin(), nb.end());
  }
}

void check_links(const Design& design, const Adjacency& links) {
  if (links.size() != design.size()) throw InputError("design size does not match the network");
}

}  // namespace

Design Design::bernoulli(std::size_t n, std::span<const NodeId> eligible, double p) {
  if (!(p >= 0.0 && p <= 1.0)) throw InputError("Bernoulli probability must lie in [0, 1]");
  std::vector<double> probs(n, 0.0);
  std::vector<bool> mask(n, false);
  for (NodeId i : eligible) {
    if (i >= n) throw InputError("eligible unit " + std::to_string(i) + " out of range");
    mask[i] = true;
    probs[i] = p;
  }
  return bernoulli(std::move(probs), std::move(mask));
}

Design Design::bernoulli(std::vector<double> p, std::vector<bool> eligible) {
  if (p.size() != eligible.size()) throw InputError("probability and eligibility vectors differ in length");
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (!(p[i] >= 0.0 && p[i] <= 1.0)) throw InputError("p_" + std::to_string(i) + " outside [0, 1]");
    if (!eligible[i] && p[i] != 0.0) throw InputError("ineligible unit " + std::to_string(i) + " has p > 0");
  }
  Design d;
  d.kind_ = Kind::Bernoulli;
  d.marginal_ = std::move(p);
  d.eligible_ = std::move(eligible);
  d.block_of_.assign(d.eligible_.size(), kNoBlock);
  return d;
}

Design Design::blocks(std::size_t n, std::vector<Block> blocks) {
  Design d;
  d.kind_ = Kind::Blocks;
  d.eligible_.assign(n, false);
  d.marginal_.assign(n, 0.0);
  d.block_of_.assign(n, kNoBlock);
  for (std::size_t b = 0; b < blocks.size(); ++b) {
    auto& blk = blocks[b];
    if (blk.treated > blk.units.size()) throw InputError("block " + std::to_string(b) + " treats more units than it holds");
    std::sort(blk.units.begin(), blk.units.end());
    for (NodeId i : blk.units) {
      if (i >= n) throw InputError("block unit " + std::to_string(i) + " out of range");
      if (d.block_of_[i] != kNoBlock) throw InputError("unit " + std::to_string(i) + " appears in two blocks");
      d.block_of_[i] = b;
      d.eligible_[i] = true;
      d.marginal_[i] = blk.units.empty() ? 0.0 : static_cast<double>(blk.treated) / static_cast<double>(blk.units.size());
    }
  }
  d.blocks_ = std::move(blocks);
  return d;
}

Assignment sample_assignment(const Design& design, std::uint64_t seed) {
  Assignment d(design.size(), 0);
  Rng rng = make_rng(derive_seed(seed, kAssignStream, 0));
  if (design.is_bernoulli()) {
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    for (NodeId i = 0; i < design.size(); ++i) {
      if (!design.eligible(i)) continue;
      d[i] = unif(rng) < design.treat_probability(i) ? 1 : 0;
    }
    return d;
  }
  std::vector<NodeId> pool;
  for (const auto& blk : design.block_list()) {
    pool.assign(blk.units.begin(), blk.units.end());
    // Partial Fisher-Yates: the first T slots are a uniform T-subset.
    for (std::size_t k = 0; k < blk.treated; ++k) {
      std::uniform_int_distribution<std::size_t> pick(k, pool.size() - 1);
      std::swap(pool[k], pool[pick(rng)]);
      d[pool[k]] = 1;
    }
  }
  return d;
}

double support_size(const Design& design) {
  double count = 1.0;
  if (design.is_bernoulli()) {
    for (NodeId i = 0; i < design.size(); ++i) {
      const double p = design.treat_probability(i);
      if (p > 0.0 && p < 1.0) count *= 2.0;
    }
    return count;
  }
  for (const auto& blk : design.block_list()) {
    const std::size_t m = blk.units.size();
    const std::size_t t = std::min(blk.treated, m - blk.treated);
    for (std::size_t k = 0; k < t; ++k) count = count * static_cast<double>(m - k) / static_cast<double>(k + 1);
    count = std::round(count);
  }
  return count;
}

std::vector<WeightedAssignment> enumerate_assignments(const Design& design, std::size_t limit) {
  const double size = support_size(design);
  if (size > static_cast<double>(limit)) {
    throw CapacityError("design support has " + std::to_string(size) + " assignments, above the limit of " +
                        std::to_string(limit));
  }
  const std::size_t n = design.size();
  std::vector<WeightedAssignment> out;
  out.reserve(static_cast<std::size_t>(size));

  if (design.is_bernoulli()) {
    Assignment base(n, 0);
    std::vector<NodeId> free;
    for (NodeId i = 0; i < n; ++i) {
      const double p = design.treat_probability(i);
      if (p >= 1.0) base[i] = 1;
      else if (p > 0.0) free.push_back(i);
    }
    const std::size_t total = std::size_t{1} << free.size();
    for (std::size_t mask = 0; mask < total; ++mask) {
      Assignment d = base;
      double prob = 1.0;
      for (std::size_t k = 0; k < free.size(); ++k) {
        const double p = design.treat_probability(free[k]);
        if (mask >> k & 1) {
          d[free[k]] = 1;
          prob *= p;
        } else {
          prob *= 1.0 - p;
        }
      }
      out.push_back({std::move(d), prob});
    }
    return out;
  }

  // Per block, every T_b-subset; then the Cartesian product across blocks.
  const auto blocks = design.block_list();
  std::vector<std::vector<std::vector<NodeId>>> choices(blocks.size());
  for (std::size_t b = 0; b < blocks.size(); ++b) {
    const auto& units = blocks[b].units;
    const std::size_t m = units.size(), t = blocks[b].treated;
    std::vector<std::size_t> idx(t);
    for (std::size_t k = 0; k < t; ++k) idx[k] = k;
    for (;;) {
      std::vector<NodeId> pick(t);
      for (std::size_t k = 0; k < t; ++k) pick[k] = units[idx[k]];
      choices[b].push_back(std::move(pick));
      std::size_t k = t;
      while (k > 0 && idx[k - 1] == m - t + k - 1) --k;
      if (k == 0) break;
      ++idx[k - 1];
      for (std::size_t r = k; r < t; ++r) idx[r] = idx[r - 1] + 1;
    }
  }
  const double prob = 1.0 / size;
  std::vector<std::size_t> digit(blocks.size(), 0);
  for (;;) {
    Assignment d(n, 0);
    for (std::size_t b = 0; b < blocks.size(); ++b) {
      for (NodeId i : choices[b][digit[b]]) d[i] = 1;
    }
    out.push_back({std::move(d), prob});
    std::size_t b = 0;
    while (b < blocks.size() && ++digit[b] == choices[b].size()) digit[b++] = 0;
    if (b == blocks.size()) break;
  }
  return out;
}

std::size_t PropensityTable::index(ExposureValue t) const {
  for (std::size_t k = 0; k < support_.size(); ++k) {
    if (support_[k] == t) return k;
  }
  throw InputError("exposure value " + std::to_string(t) + " not in support");
}

OverlapAudit PropensityTable::audit(std::span<const NodeId> units, std::span<const ExposureValue> values, double lo,
                                    double hi) const {
  OverlapAudit out;
  for (NodeId i : units) {
    bool bad = false;
    for (ExposureValue t : values) {
      const double p = pi(i, t);
      out.min = std::min(out.min, p);
      out.max = std::max(out.max, p);
      if (p < lo || p > hi) bad = true;
    }
    if (bad) out.violations.push_back(i);
  }
  return out;
}

PropensityTable propensity(const Design& design, const ExposureSpec& exposure, const Adjacency& links,
                           const PropensityMethod& method) {
  check_links(design, links);
  const std::size_t n = design.size();
  auto support = exposure.support();
  const std::size_t s = support.size();
  std::vector<double> pi(n * s, 0.0);

  if (method.kind == PropensityMethod::Kind::Exact) {
    switch (exposure.kind()) {
      case ExposureSpec::Kind::OwnTreatment:
        for (NodeId i = 0; i < n; ++i) {
          pi[i * s + 1] = design.treat_probability(i);
          pi[i * s + 0] = 1.0 - pi[i * s + 1];
        }
        break;
      case ExposureSpec::Kind::AnyTreatedNeighbor:
        for (NodeId i = 0; i < n; ++i) {
          pi[i * s + 0] = none_treated(design, links.neighbors(i));
          pi[i * s + 1] = 1.0 - pi[i * s + 0];
        }
        break;
      case ExposureSpec::Kind::FractionTreatedNeighborsBinned:
        throw UnsupportedExposureError("exposure '" + exposure.to_string() +
                                       "' has no closed-form propensity; request the Monte Carlo method");
    }
    return PropensityTable(n, std::move(support), std::move(pi), method);
  }

  if (method.reps == 0) throw InputError("Monte Carlo propensity needs reps > 0");
  const std::size_t chunks = std::min<std::size_t>(method.reps, 64);
  std::vector<std::vector<std::uint32_t>> counts(chunks);
  parallel_for(chunks, 0, [&](std::size_t c) {
    auto& cnt = counts[c];
    cnt.assign(n * s, 0);
    const std::size_t begin = method.reps * c / chunks, end = method.reps * (c + 1) / chunks;
    for (std::size_t r = begin; r < end; ++r) {
      const auto d = sample_assignment(design, derive_seed(method.seed, kPropensityStream, r));
      for (NodeId i = 0; i < n; ++i) ++cnt[i * s + static_cast<std::size_t>(exposure.evaluate(i, d, links))];
    }
  });
  for (std::size_t k = 0; k < n * s; ++k) {
    std::uint64_t total = 0;
    for (const auto& cnt : counts) total += cnt[k];
    pi[k] = static_cast<double>(total) / static_cast<double>(method.reps);
  }
  return PropensityTable(n, std::move(support), std::move(pi), method);
}

PairPropensity::PairPropensity(std::vector<NodeId> units, std::array<ExposureValue, 2> values)
    : units_(std::move(units)), values_(values) {
  const std::size_t m = units_.size();
  for (auto& v : data_) v.assign(m * m, 0.0);
  for (auto& v : zeros_) v.assign(m * m, ZeroKind::NonZero);
}

std::optional<bool> pair_impossible(const Design& design, const ExposureSpec& exposure, const Adjacency& links,
                                    NodeId i, NodeId j, ExposureValue a, ExposureValue b) {
  if (i == j && a != b) return true;
  if (exposure.kind() == ExposureSpec::Kind::FractionTreatedNeighborsBinned) return std::nullopt;
  if (!exposure.in_support(a) || !exposure.in_support(b)) return true;
  std::vector<NodeId> zeros, ones;
  std::vector<std::vector<NodeId>> hits;
  add_condition(exposure, links, i, a, zeros, ones, hits);
  if (i != j) add_condition(exposure, links, j, b, zeros, ones, hits);
  return !feasible(design, std::move(zeros), std::move(ones), hits);
}

PairPropensity pairwise_propensity(const Design& design, const ExposureSpec& exposure, const Adjacency& links,
                                   std::span<const NodeId> units, ExposureValue t, ExposureValue t0,
                                   const PairOptions& options) {
  check_links(design, links);
  for (NodeId u : units) {
    if (u >= design.size()) throw InputError("unit " + std::to_string(u) + " out of range");
  }
  if (!exposure.in_support(t) || !exposure.in_support(t0)) throw InputError("contrast values outside the exposure support");
  const std::array<ExposureValue, 2> values{t, t0};
  PairPropensity out(std::vector<NodeId>(units.begin(), units.end()), values);
  const std::size_t m = units.size();
  const bool closed = !options.force_monte_carlo && exposure.kind() != ExposureSpec::Kind::FractionTreatedNeighborsBinned;

  if (closed) {
    out.method = PropensityMethod::exact();
    const bool own = exposure.kind() == ExposureSpec::Kind::OwnTreatment;
    // P(T_x = 0) per unit.
    std::vector<double> p0(m);
    for (std::size_t p = 0; p < m; ++p) {
      p0[p] = own ? 1.0 - design.treat_probability(units[p]) : none_treated(design, links.neighbors(units[p]));
    }
    for (std::size_t p = 0; p < m; ++p) {
      const NodeId i = units[p];
      for (std::size_t q = 0; q < m; ++q) {
        const NodeId j = units[q];
        // Bernoulli draws on disjoint exposure sets are independent.
        if (p != q && design.is_bernoulli() && (own || disjoint(links.neighbors(i), links.neighbors(j)))) {
          const double mi[2] = {p0[p], 1.0 - p0[p]}, mj[2] = {p0[q], 1.0 - p0[q]};
          for (std::size_t a = 0; a < 2; ++a) {
            for (std::size_t b = 0; b < 2; ++b) {
              const double v = mi[values[a]] * mj[values[b]];
              out.set(a, b, p, q, v, v > 0.0 ? ZeroKind::NonZero : ZeroKind::Structural);
            }
          }
          continue;
        }
        // Joint law of (T_i, T_j) on {0,1}^2 indexed [Ti][Tj].
        double joint[2][2];
        if (p == q) {
          joint[0][0] = p0[p];
          joint[1][1] = 1.0 - p0[p];
          joint[0][1] = joint[1][0] = 0.0;
        } else {
          double both0;
          if (own) {
            const NodeId pair[2] = {std::min(i, j), std::max(i, j)};
            both0 = none_treated(design, pair);
          } else {
            both0 = none_treated(design, set_union(links.neighbors(i), links.neighbors(j)));
          }
          joint[0][0] = both0;
          if (design.is_bernoulli() && !own) {
            // Factorized forms keep exact zeros exact.
            const auto only_i = set_difference(links.neighbors(i), links.neighbors(j));
            const auto only_j = set_difference(links.neighbors(j), links.neighbors(i));
            joint[1][0] = p0[q] * (1.0 - none_treated(design, only_i));
            joint[0][1] = p0[p] * (1.0 - none_treated(design, only_j));
          } else {
            joint[1][0] = p0[q] - both0;
            joint[0][1] = p0[p] - both0;
          }
          joint[1][1] = 1.0 - joint[0][0] - joint[1][0] - joint[0][1];
        }
        for (std::size_t a = 0; a < 2; ++a) {
          for (std::size_t b = 0; b < 2; ++b) {
            const int va = values[a], vb = values[b];
            const auto impossible = pair_impossible(design, exposure, links, i, j, va, vb);
            if (*impossible) {
              out.set(a, b, p, q, 0.0, ZeroKind::Structural);
            } else {
              out.set(a, b, p, q, std::clamp(joint[va][vb], 0.0, 1.0), ZeroKind::NonZero);
            }
          }
        }
      }
    }
    return out;
  }

  if (options.mc_reps == 0) throw InputError("pairwise Monte Carlo needs reps > 0");
  out.method = PropensityMethod::monte_carlo(options.mc_reps, options.seed);
  if (options.mc_reps < 10000) {
    out.warnings.push_back("pairwise propensities use only " + std::to_string(options.mc_reps) +
                           " Monte Carlo replications (< 10000)");
  }
  const std::size_t chunks = std::min<std::size_t>(options.mc_reps, 16);
  std::vector<std::array<std::vector<std::uint32_t>, 4>> counts(chunks);
  parallel_for(chunks, 0, [&](std::size_t c) {
    auto& cnt = counts[c];
    for (auto& v : cnt) v.assign(m * m, 0);
    std::vector<int> slot(m);
    const std::size_t begin = options.mc_reps * c / chunks, end = options.mc_reps * (c + 1) / chunks;
    for (std::size_t r = begin; r < end; ++r) {
      const auto d = sample_assignment(design, derive_seed(options.seed, kPairStream, r));
      for (std::size_t p = 0; p < m; ++p) {
        const auto v = exposure.evaluate(units[p], d, links);
        slot[p] = v == t ? 0 : (v == t0 ? 1 : -1);
      }
      for (std::size_t p = 0; p < m; ++p) {
        if (slot[p] < 0) continue;
        auto& row = cnt[static_cast<std::size_t>(slot[p]) * 2];
        auto& row1 = cnt[static_cast<std::size_t>(slot[p]) * 2 + 1];
        for (std::size_t q = 0; q < m; ++q) {
          if (slot[q] == 0) ++row[p * m + q];
          else if (slot[q] == 1) ++row1[p * m + q];
        }
      }
    }
  });
  const double reps = static_cast<double>(options.mc_reps);
  for (std::size_t a = 0; a < 2; ++a) {
    for (std::size_t b = 0; b < 2; ++b) {
      for (std::size_t p = 0; p < m; ++p) {
        for (std::size_t q = 0; q < m; ++q) {
          std::uint64_t total = 0;
          for (const auto& cnt : counts) total += cnt[a * 2 + b][p * m + q];
          if (total > 0) {
            out.set(a, b, p, q, static_cast<double>(total) / reps, ZeroKind::NonZero);
            continue;
          }
          const auto impossible = pair_impossible(design, exposure, links, units[p], units[q], values[a], values[b]);
          out.set(a, b, p, q, 0.0, impossible.value_or(false) ? ZeroKind::Structural : ZeroKind::McUnconfirmed);
        }
      }
    }
  }
  return out;
}

}  // namespace ani
