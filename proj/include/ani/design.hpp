#pragma once

#include <array>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ani/exposure.hpp"
#include "ani/graph.hpp"

namespace ani {

// Treatment randomization. Ineligible units are never treated.
//   Bernoulli: independent D_i ~ Bernoulli(p_i), p_i = 0 off the eligible set.
//   Blocks: disjoint blocks of eligible units; exactly T_b treated per block,
//           drawn uniformly and independently across blocks.
class Design {
 public:
  struct Block {
    std::vector<NodeId> units;
    std::size_t treated = 0;
  };
  static constexpr std::size_t kNoBlock = std::numeric_limits<std::size_t>::max();

  static Design bernoulli(std::size_t n, std::span<const NodeId> eligible, double p);
  static Design bernoulli(std::vector<double> p, std::vector<bool> eligible);
  static Design blocks(std::size_t n, std::vector<Block> blocks);

  bool is_bernoulli() const noexcept { return kind_ == Kind::Bernoulli; }
  bool is_blocks() const noexcept { return kind_ == Kind::Blocks; }
  std::size_t size() const noexcept { return eligible_.size(); }
  bool eligible(NodeId i) const noexcept { return eligible_[i]; }
  // Marginal P(D_i = 1): p_i, or T_b / |b| under blocks.
  double treat_probability(NodeId i) const noexcept { return marginal_[i]; }
  std::span<const Block> block_list() const noexcept { return blocks_; }
  std::size_t block_of(NodeId i) const noexcept { return block_of_[i]; }

 private:
  enum class Kind { Bernoulli, Blocks };
  Design() = default;
  Kind kind_ = Kind::Bernoulli;
  std::vector<bool> eligible_;
  std::vector<double> marginal_;
  std::vector<Block> blocks_;
  std::vector<std::size_t> block_of_;
};

Assignment sample_assignment(const Design& design, std::uint64_t seed);

struct WeightedAssignment {
  Assignment d;
  double probability;
};

// Number of assignments with positive probability (as a double; may be huge).
double support_size(const Design& design);

// Every assignment with positive probability. CapacityError when there are more than `limit`.
std::vector<WeightedAssignment> enumerate_assignments(const Design& design, std::size_t limit);

struct PropensityMethod {
  enum class Kind { Exact, MonteCarlo };
  Kind kind = Kind::Exact;
  std::size_t reps = 100000;
  std::uint64_t seed = 0;

  static PropensityMethod exact() { return {}; }
  static PropensityMethod monte_carlo(std::size_t reps, std::uint64_t seed) {
    return {Kind::MonteCarlo, reps, seed};
  }
};

struct OverlapAudit {
  double min = 1.0;
  double max = 0.0;
  std::vector<NodeId> violations;  // units with some pi outside [lo, hi]
};

// pi_i(t) for every unit and every value in the exposure support.
class PropensityTable {
 public:
  PropensityTable() = default;
  PropensityTable(std::size_t n, std::vector<ExposureValue> support, std::vector<double> pi, PropensityMethod method)
      : n_(n), support_(std::move(support)), pi_(std::move(pi)), method_(method) {}

  std::size_t size() const noexcept { return n_; }
  std::span<const ExposureValue> support() const noexcept { return support_; }
  double pi(NodeId i, ExposureValue t) const { return pi_.at(static_cast<std::size_t>(i) * support_.size() + index(t)); }
  const PropensityMethod& method() const noexcept { return method_; }

  // Range of pi_i(t) over `units` and `values`; flags entries outside [lo, hi].
  OverlapAudit audit(std::span<const NodeId> units, std::span<const ExposureValue> values, double lo = 0.0,
                     double hi = 1.0) const;

 private:
  std::size_t index(ExposureValue t) const;
  std::size_t n_ = 0;
  std::vector<ExposureValue> support_;
  std::vector<double> pi_;
  PropensityMethod method_;
};

// Closed forms: own treatment (either design) and any treated neighbor
// (Bernoulli product, or a product of hypergeometric zero-draw terms across
// blocks). Other exposures need a Monte Carlo method, else
// UnsupportedExposureError.
PropensityTable propensity(const Design& design, const ExposureSpec& exposure, const Adjacency& links,
                           const PropensityMethod& method = PropensityMethod::exact());

enum class ZeroKind : std::uint8_t {
  NonZero,
  Structural,      // impossible event, established analytically
  McUnconfirmed,   // zero Monte Carlo frequency with no analytic confirmation
};

// pi_ij(a, b) for ordered pairs of `units` and a, b in {t, t0}.
class PairPropensity {
 public:
  PairPropensity(std::vector<NodeId> units, std::array<ExposureValue, 2> values);

  std::span<const NodeId> units() const noexcept { return units_; }
  std::array<ExposureValue, 2> values() const noexcept { return values_; }

  // a, b index `values`; p, q index `units`.
  double operator()(std::size_t a, std::size_t b, std::size_t p, std::size_t q) const {
    return data_[a * 2 + b][p * units_.size() + q];
  }
  ZeroKind zero_kind(std::size_t a, std::size_t b, std::size_t p, std::size_t q) const {
    return zeros_[a * 2 + b][p * units_.size() + q];
  }
  bool is_zero(std::size_t a, std::size_t b, std::size_t p, std::size_t q) const {
    return zero_kind(a, b, p, q) != ZeroKind::NonZero;
  }
  void set(std::size_t a, std::size_t b, std::size_t p, std::size_t q, double value, ZeroKind zero) {
    data_[a * 2 + b][p * units_.size() + q] = value;
    zeros_[a * 2 + b][p * units_.size() + q] = zero;
  }

  PropensityMethod method;
  std::vector<std::string> warnings;

 private:
  std::vector<NodeId> units_;
  std::array<ExposureValue, 2> values_;
  std::array<std::vector<double>, 4> data_;
  std::array<std::vector<ZeroKind>, 4> zeros_;
};

struct PairOptions {
  // Closed forms are used whenever one exists unless force_monte_carlo is set.
  bool force_monte_carlo = false;
  std::size_t mc_reps = 100000;
  std::uint64_t seed = 0;
};

PairPropensity pairwise_propensity(const Design& design, const ExposureSpec& exposure, const Adjacency& links,
                                   std::span<const NodeId> units, ExposureValue t, ExposureValue t0,
                                   const PairOptions& options = {});

// Analytic test of whether (T_i, T_j) = (a, b) is impossible. Empty when the
// exposure has no analytic detector.
std::optional<bool> pair_impossible(const Design& design, const ExposureSpec& exposure, const Adjacency& links,
                                    NodeId i, NodeId j, ExposureValue a, ExposureValue b);

}  // namespace ani
