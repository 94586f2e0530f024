#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ani/graph.hpp"

namespace ani {

using Assignment = std::vector<std::uint8_t>;
using ExposureValue = int;

// A K-neighborhood exposure mapping T(i, d, A) with finite support.
//
// Values: OwnTreatment and AnyTreatedNeighbor take values {0, 1}.
// FractionTreatedNeighborsBinned takes the bin index of the treated-neighbor
// share: bin k covers [edge_k, edge_{k+1}), the last bin is closed on the
// right, and isolated units fall in bin 0.
class ExposureSpec {
 public:
  enum class Kind { OwnTreatment, AnyTreatedNeighbor, FractionTreatedNeighborsBinned };

  static ExposureSpec own_treatment() { return ExposureSpec(Kind::OwnTreatment, {}); }
  static ExposureSpec any_treated_neighbor() { return ExposureSpec(Kind::AnyTreatedNeighbor, {}); }
  static ExposureSpec fraction_binned(std::vector<double> edges);

  // `own`, `any-nbr`, `frac-nbr:<comma-separated bin edges>`
  static ExposureSpec parse(std::string_view text);
  std::string to_string() const;

  Kind kind() const noexcept { return kind_; }
  std::uint32_t radius() const noexcept { return kind_ == Kind::OwnTreatment ? 0 : 1; }
  std::vector<ExposureValue> support() const;
  bool in_support(ExposureValue t) const;
  std::span<const double> bin_edges() const noexcept { return edges_; }

  // Bin index for a treated-neighbor share.
  ExposureValue bin_of(double fraction) const;

  // T_i under assignment d; `links` are the neighbor lists used for counting.
  ExposureValue evaluate(NodeId i, std::span<const std::uint8_t> d, const Adjacency& links) const;

 private:
  ExposureSpec(Kind kind, std::vector<double> edges) : kind_(kind), edges_(std::move(edges)) {}
  Kind kind_;
  std::vector<double> edges_;
};

std::uint32_t exposure_radius(const ExposureSpec& spec);

// Exposure of every unit. Counts use `links` (directed out-links when the
// caller supplies them, else the graph's own adjacency).
std::vector<ExposureValue> compute_exposures(const ExposureSpec& spec, std::span<const std::uint8_t> d,
                                             const Adjacency& links);

inline std::vector<ExposureValue> compute_exposures(const ExposureSpec& spec, std::span<const std::uint8_t> d,
                                                    const Graph& g) {
  return compute_exposures(spec, d, g.links());
}

}  // namespace ani
