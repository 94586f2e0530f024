#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "ani/design.hpp"
#include "ani/graph.hpp"

namespace ani {

struct EdgeList {
  std::vector<Edge> edges;
  std::size_t n = 0;  // max id + 1
};

// Two whitespace-separated non-negative integers per line; '#' lines and blank lines skipped.
EdgeList read_edge_list(std::istream& in);
EdgeList read_edge_list_file(const std::string& path);
void write_edge_list(std::ostream& out, const Graph& g);

// One non-negative integer per line.
std::vector<std::uint32_t> read_degrees(std::istream& in);
std::vector<std::uint32_t> read_degrees_file(const std::string& path);

// Units CSV with header id,outcome,treatment,eligible,block.
struct UnitsTable {
  std::vector<double> outcome;
  std::vector<std::optional<std::uint8_t>> treatment;
  std::vector<bool> eligible;
  std::vector<std::optional<std::size_t>> block;

  std::size_t size() const noexcept { return outcome.size(); }
};

UnitsTable read_units_csv(std::istream& in);
UnitsTable read_units_csv_file(const std::string& path);
void write_units_csv(std::ostream& out, const UnitsTable& units);

// Blocks when any unit names a block (T_b = treated count observed in b),
// otherwise Bernoulli(p) on the eligible units.
Design design_from_units(const UnitsTable& units, double p);

}  // namespace ani
