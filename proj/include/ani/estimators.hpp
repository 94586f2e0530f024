#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "ani/design.hpp"
#include "ani/exposure.hpp"
#include "ani/graph.hpp"
#include "ani/outcomes.hpp"

namespace ani {

// Analyzed units plus network-length outcome and exposure vectors.
struct Sample {
  std::vector<NodeId> units;
  std::vector<double> outcomes;
  std::vector<ExposureValue> exposures;
  const PropensityTable* propensities = nullptr;

  std::size_t size() const noexcept { return units.size(); }
};

Sample make_sample(std::vector<NodeId> units, std::vector<double> outcomes, std::vector<ExposureValue> exposures,
                   const PropensityTable& propensities);

std::vector<NodeId> all_units(std::size_t n);
// Units with at least one neighbor whose treatment probability is positive.
std::vector<NodeId> units_with_eligible_neighbor(const Design& design, const Adjacency& links);

struct VarianceEstimate {
  double sigma2 = 0.0;
  double se = 0.0;
  double ci_lo = 0.0;
  double ci_hi = 0.0;
  bool psd = true;
};

// se = sqrt(sigma2 / n), ci = center +- 1.96 se; a negative sigma2 leaves se and ci as NaN.
VarianceEstimate make_variance(double sigma2, double center, std::size_t n);

struct BandwidthChoice {
  std::uint32_t b = 0;
  std::string regime;  // exponential | polynomial | degenerate
  double b_tilde = 0.0;
  double threshold = 0.0;  // 2 log n / log avg_degree
  bool literal = false;
  std::string warning;
};

// Exponential regime (apl <= 2 log n / log avg_degree): b~ = apl / 2; otherwise
// b~ = apl^(1/3). b = round-half-up(max(b~, 2K)). `literal` flips the comparison.
BandwidthChoice bandwidth_rule(const GraphSummary& summary, std::size_t n, std::uint32_t k, bool literal = false);

struct EstimateReport {
  ExposureValue t = 1, t0 = 0;
  double mu_t = 0.0, mu_t0 = 0.0, tau = 0.0;
  std::size_t n = 0, n_eff_t = 0, n_eff_t0 = 0;
  std::vector<double> z;  // per sample unit
  std::optional<BandwidthChoice> bandwidth;
  std::map<std::string, VarianceEstimate> variance;
};

// mu(t) = n^-1 sum Y_i 1_i(t) / pi_i(t), tau = mu(t) - mu(t0), Z_i per unit.
// OverlapError when a sample unit has pi_i(t) or pi_i(t0) outside (0, 1).
EstimateReport ipw_point(const Sample& sample, ExposureValue t, ExposureValue t0);

// 1_i(t) Y_i / pi_i(t) per sample unit.
std::vector<double> ipw_scores(const Sample& sample, ExposureValue t);

// n^-1 sum_{p,q} x_p x_q 1{l(units_p, units_q) <= b}, distances on the whole graph.
double hac_quadratic(const Graph& g, std::span<const NodeId> units, std::span<const double> x, std::uint32_t b,
                     std::size_t threads = 1);

enum class HacTarget { Contrast, MuT, MuT0 };

// Network HAC variance of Z (or of the single-arm scores for MuT / MuT0).
VarianceEstimate hac_variance(const Sample& sample, const EstimateReport& report, const Graph& g, std::uint32_t b,
                              HacTarget target = HacTarget::Contrast, std::size_t threads = 1);

// The Aronow-Samii estimator with its structural-zero surrogate terms.
// `pairs` must cover every sample unit for values {t, t0}.
VarianceEstimate as_variance(const Sample& sample, const EstimateReport& report, const PairPropensity& pairs);

// n^-1 sum_{i,j} (tau_i - tau)(tau_j - tau) 1{l(i,j) <= b}
double r_n_term(const Graph& g, std::span<const NodeId> units, std::span<const double> tau_i, std::uint32_t b);

// AS bias from potential outcomes yt = Ytilde(t), yt0 = Ytilde(t0) in the order
// of pairs.units(), using the pairs' zero flags.
double r_as_term(std::span<const double> yt, std::span<const double> yt0, const PairPropensity& pairs);

struct ExactOptions {
  std::vector<NodeId> units;          // analyzed units; empty means all
  const Adjacency* links = nullptr;   // exposure links; default g.links()
  std::size_t limit = std::size_t{1} << 20;
  bool variance_terms = true;         // expected HAC / AS and the cross term
};

struct ExactEstimands {
  std::vector<NodeId> units;     // analyzed units after exclusions
  std::vector<NodeId> excluded;  // P(T_i = t) = 0 or P(T_i = t0) = 0
  std::vector<double> mu_t, mu_t0, tau_i;
  double tau = 0.0;
  double expected_tau = 0.0;     // E[tau-hat]
  double true_variance = 0.0;    // Var(sqrt(n) tau-hat)
  double r_n = 0.0;
  std::optional<double> r_n_as;  // table-backed models only
  double expected_hac = 0.0;     // E[sigma2-hat] at bandwidth b
  double hac_star = 0.0;         // E[sigma2-hat_*]
  double cross_term = 0.0;       // E[sigma2-hat] - E[sigma2-hat_*] - R_n from the covariance of Z
  std::optional<double> expected_as;
  std::size_t assignments = 0;
  PropensityTable propensities;  // from the enumeration
};

// Full enumeration of the design. CapacityError when the support exceeds options.limit.
ExactEstimands exact_estimands(const OutcomeModel& model, const Design& design, const ExposureSpec& exposure,
                               const Graph& g, ExposureValue t, ExposureValue t0, std::uint32_t b,
                               const ExactOptions& options = {});

// Floats rounded to 12 significant digits; NaN becomes null.
double round_sig(double x, int digits = 12);
nlohmann::json to_json(const VarianceEstimate& v);
nlohmann::json to_json(const EstimateReport& r);
nlohmann::json to_json(const ExactEstimands& e);

}  // namespace ani
