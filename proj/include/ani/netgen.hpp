#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "ani/graph.hpp"

namespace ani {

struct ConfigModelReport {
  bool padded = false;           // sum of degrees was odd; one entry was incremented
  std::size_t padded_node = 0;
  std::size_t self_loops_erased = 0;
  std::size_t multi_edges_erased = 0;
};

// Erased configuration model: uniform stub matching, then self-loops and
// repeated edges are dropped. Realized degrees never exceed the request
// (except at a padded node, whose request grew by one).
Graph configuration_model(std::span<const std::uint32_t> degrees, std::uint64_t seed,
                          ConfigModelReport* report = nullptr);

enum class RadiusRule {
  ExpectedDegree,  // r = sqrt(kappa / (pi n)); kappa is the limiting expected degree
  Literal,         // r = (kappa / (pi n))^2, the squared form
};

double rgg_radius(std::size_t n, double kappa, RadiusRule rule = RadiusRule::ExpectedDegree);

struct RggPlacement {
  std::vector<std::array<double, 2>> positions;  // in [0,1]^2
  double radius = 0.0;
};

struct RggResult {
  Graph graph;
  RggPlacement placement;
};

// Random geometric graph on the unit square; links pairs within the radius.
RggResult rgg(std::size_t n, double kappa, std::uint64_t seed, RadiusRule rule = RadiusRule::ExpectedDegree);

// Links all pairs of the given placement within placement.radius, using a cell grid.
Graph geometric_graph(const RggPlacement& placement);

}  // namespace ani
