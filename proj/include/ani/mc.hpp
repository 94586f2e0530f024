#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "ani/exposure.hpp"
#include "ani/netgen.hpp"
#include "ani/outcomes.hpp"

namespace ani {

struct McConfig {
  enum class Network { Configuration, Rgg };
  enum class DesignKind { Bernoulli, Blocks };
  enum class Bias { Off, Independent, Autocorrelated };

  Network network = Network::Configuration;
  std::vector<std::uint32_t> degrees;  // calibration sequence (configuration model)
  std::size_t n = 0;                   // RGG size; defaults to degrees.size()
  double kappa = 0.0;                  // RGG expected degree; defaults to the mean of degrees
  RadiusRule radius_rule = RadiusRule::ExpectedDegree;
  std::size_t eligible_count = 0;      // eligible units drawn at random; 0 means everyone
  std::string outcome = "lim:-1,0.8,1,1";
  std::optional<EpsilonMode> epsilon;  // default: normal, homophily for RGG
  DesignKind design = DesignKind::Bernoulli;
  double p = 0.5;
  ExposureSpec exposure = ExposureSpec::any_treated_neighbor();
  ExposureValue t = 1, t0 = 0;
  std::size_t reps = 1000;
  std::size_t oracle_reps = 1000;
  std::uint64_t seed = 1;
  bool redraw_graph = true, redraw_epsilon = true, redraw_assignment = true;
  // hac-auto, hac:<b>, naive, as
  std::vector<std::string> estimators = {"hac-auto", "naive"};
  bool sample_has_eligible_neighbor = true;
  Bias bias = Bias::Off;
  bool literal_eq7 = false;
  std::size_t threads = 0;

  // Relative degree-file paths resolve against base_dir.
  static McConfig from_json(const nlohmann::json& j, const std::string& base_dir = ".");
  nlohmann::json to_json() const;
  void validate() const;
};

struct EstimatorSummary {
  std::string name;
  double mean_se = 0.0;
  double coverage = 0.0;
  std::size_t used = 0;      // replications with a finite SE
  std::size_t non_psd = 0;
};

struct McReport {
  std::size_t reps = 0, failed = 0;
  std::size_t oracle_reps = 0, oracle_failed = 0;
  std::vector<std::string> failures;  // first few failure messages
  double mean_tau = 0.0;
  double target = 0.0;     // coverage target: mean tau-hat over the oracle pass
  double oracle_se = 0.0;  // SD of tau-hat over the oracle pass
  double oracle_coverage = 0.0;
  double coverage_mc_se = 0.0;  // sqrt(0.95 * 0.05 / reps)
  double rmse = 0.0;
  double mean_n = 0.0, mean_n_eff_t = 0.0, mean_n_eff_t0 = 0.0;
  double mean_avg_degree = 0.0;
  std::optional<double> mean_apl, mean_bandwidth;
  std::vector<EstimatorSummary> estimators;
  std::optional<double> mean_r_n, mean_r_n_as;
  std::vector<double> tau;  // tau-hat of each successful replication, in order

  const EstimatorSummary* find(const std::string& name) const;
  nlohmann::json to_json() const;
  std::string to_csv() const;
};

McReport run_mc(const McConfig& config);

}  // namespace ani
