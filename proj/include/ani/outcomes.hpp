#pragma once

#include <atomic>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ani/design.hpp"
#include "ani/exposure.hpp"
#include "ani/graph.hpp"
#include "ani/netgen.hpp"

namespace ani {

struct LimParams {
  double alpha = 0.0, beta = 0.0, delta = 0.0, gamma = 0.0;
  std::vector<double> epsilon;  // empty means zero shocks
};

struct ContagionParams {
  double alpha = 0.0, beta = 0.0, delta = 0.0, gamma = 0.0;
  std::vector<double> epsilon;
  std::vector<std::uint8_t> start;  // Y^0; empty means all zeros
};

// Solves (I - beta*At) Y = alpha + delta*At d + gamma d + eps, At the row-normalized
// adjacency (zero rows for isolated nodes). Throws InputError if |beta| >= 1.
std::vector<double> linear_in_means(const Graph& g, const LimParams& p, std::span<const std::uint8_t> d);

struct ContagionTrace {
  std::size_t periods = 0;  // T, the first period with Y^T = Y^{T-1}
  bool monotone = true;     // no unit switched 1 -> 0
};

// Synchronous updates Y_i = 1{alpha + beta*frac_i(Y) + delta*frac_i(d) + gamma d_i + eps_i > 0}
// until a fixed point.
std::vector<double> complex_contagion(const Graph& g, const ContagionParams& p, std::span<const std::uint8_t> d,
                                      ContagionTrace* trace = nullptr);

// Potential-outcome engine Y(d).
class OutcomeModel {
 public:
  enum class Kind { LinearInMeans, Contagion, ExposureTable, Custom };
  using Evaluator = std::function<std::vector<double>(std::span<const std::uint8_t>)>;

  static OutcomeModel linear_in_means(Graph g, LimParams p);
  static OutcomeModel contagion(Graph g, ContagionParams p);
  // Y_i(d) = table[i * |support| + index of T_i(d)]: a correctly specified model.
  static OutcomeModel exposure_table(ExposureSpec exposure, Adjacency links, std::vector<double> table);
  static OutcomeModel custom(std::size_t n, Evaluator fn);

  Kind kind() const noexcept { return kind_; }
  std::size_t size() const noexcept { return n_; }
  std::vector<double> operator()(std::span<const std::uint8_t> d) const;

  // Table-backed models only: the exposure mapping and Ytilde_i(t).
  const ExposureSpec* exposure() const noexcept { return table_ ? &table_->exposure : nullptr; }
  std::optional<double> potential(NodeId i, ExposureValue t) const;

  // Largest |Y_i(d)| returned so far.
  double max_abs_seen() const noexcept { return max_abs_->load(); }

 private:
  struct Table {
    ExposureSpec exposure;
    Adjacency links;
    std::vector<ExposureValue> support;
    std::vector<double> values;
  };
  OutcomeModel(Kind kind, std::size_t n, Evaluator fn)
      : kind_(kind), n_(n), fn_(std::move(fn)), max_abs_(std::make_shared<std::atomic<double>>(0.0)) {}

  Kind kind_;
  std::size_t n_;
  Evaluator fn_;
  std::shared_ptr<const Table> table_;
  std::shared_ptr<std::atomic<double>> max_abs_;
};

struct ModelSpec {
  enum class Kind { LinearInMeans, Contagion };
  Kind kind = Kind::LinearInMeans;
  double alpha = 0.0, beta = 0.0, delta = 0.0, gamma = 0.0;

  // `lim:alpha,beta,delta,gamma` or `contagion:alpha,beta,delta,gamma`
  static ModelSpec parse(std::string_view text);
  std::string to_string() const;
  OutcomeModel build(Graph g, std::vector<double> epsilon) const;
};

enum class EpsilonMode { Normal, Homophily, Zero };
EpsilonMode parse_epsilon_mode(std::string_view text);

// Normal: iid N(0,1). Homophily: (x_i - 0.5) + N(0,1) with x_i the first
// coordinate of the RGG position; needs a placement. Zero: all zeros.
std::vector<double> draw_epsilon(std::size_t n, EpsilonMode mode, std::uint64_t seed,
                                 const RggPlacement* placement = nullptr);

// Exhaustive Delta_i(s) = max |Y_i(d) - Y_i(d')| over d, d' agreeing on N(i, s),
// for s = 0..s_max. With a design, only assignments in its support count.
// n <= 16, else CapacityError.
std::vector<double> ani_delta_profile(const OutcomeModel& model, const Graph& g, NodeId unit, std::uint32_t s_max,
                                      const Design* design = nullptr);

// Same for every unit, sharing one pass over the assignments.
std::vector<std::vector<double>> ani_delta_profiles(const OutcomeModel& model, const Graph& g, std::uint32_t s_max,
                                                    const Design* design = nullptr);

// sigma_j = 1 when some own treatment d in {0,1} and treated-neighbor share f in
// {k/deg_j} put the threshold -(alpha + delta f + gamma d + eps_j) in [0, beta].
std::vector<std::uint8_t> contagion_sigma(const Graph& g, const ContagionParams& p);

// max over s in (s_bar, s_max] of ||G^s||_inf^{1/s}, G_ij = links_ij * sigma_j.
double spectral_growth(const Adjacency& links, std::span<const std::uint8_t> sigma, std::uint32_t s_bar,
                       std::uint32_t s_max);

double contagion_rho(const Graph& g, const ContagionParams& p, std::uint32_t s_bar, std::uint32_t s_max);

}  // namespace ani
