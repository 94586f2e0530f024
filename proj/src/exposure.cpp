#include "ani/exposure.hpp"

#include <algorithm>
#include <charconv>
#include <sstream>

#include "ani/errors.hpp"

namespace ani {

ExposureSpec ExposureSpec::fraction_binned(std::vector<double> edges) {
  if (edges.size() < 2) throw InputError("frac-nbr needs at least two bin edges");
  if (!std::is_sorted(edges.begin(), edges.end()) ||
      std::adjacent_find(edges.begin(), edges.end()) != edges.end()) {
    throw InputError("frac-nbr bin edges must be strictly increasing");
  }
  if (edges.front() > 0.0 || edges.back() < 1.0) throw InputError("frac-nbr bin edges must cover [0, 1]");
  return ExposureSpec(Kind::FractionTreatedNeighborsBinned, std::move(edges));
}

ExposureSpec ExposureSpec::parse(std::string_view text) {
  if (text == "own") return own_treatment();
  if (text == "any-nbr") return any_treated_neighbor();
  constexpr std::string_view prefix = "frac-nbr:";
  if (text.substr(0, prefix.size()) == prefix) {
    std::vector<double> edges;
    std::string rest(text.substr(prefix.size()));
    std::stringstream ss(rest);
    std::string item;
    while (std::getline(ss, item, ',')) {
      try {
        std::size_t used = 0;
        edges.push_back(std::stod(item, &used));
        if (used != item.size()) throw InputError("");
      } catch (const std::exception&) {
        throw InputError("bad bin edge '" + item + "' in exposure '" + std::string(text) + "'");
      }
    }
    return fraction_binned(std::move(edges));
  }
  throw InputError("unknown exposure '" + std::string(text) + "' (expected own, any-nbr, frac-nbr:<edges>)");
}

std::string ExposureSpec::to_string() const {
  switch (kind_) {
    case Kind::OwnTreatment:
      return "own";
    case Kind::AnyTreatedNeighbor:
      return "any-nbr";
    case Kind::FractionTreatedNeighborsBinned: {
      std::ostringstream os;
      os << "frac-nbr:";
      for (std::size_t k = 0; k < edges_.size(); ++k) os << (k ? "," : "") << edges_[k];
      return os.str();
    }
  }
  return {};
}

std::vector<ExposureValue> ExposureSpec::support() const {
  if (kind_ != Kind::FractionTreatedNeighborsBinned) return {0, 1};
  std::vector<ExposureValue> s(edges_.size() - 1);
  for (std::size_t k = 0; k < s.size(); ++k) s[k] = static_cast<ExposureValue>(k);
  return s;
}

bool ExposureSpec::in_support(ExposureValue t) const {
  const auto hi = kind_ == Kind::FractionTreatedNeighborsBinned ? static_cast<int>(edges_.size()) - 1 : 2;
  return t >= 0 && t < hi;
}

ExposureValue ExposureSpec::bin_of(double fraction) const {
  const auto bins = static_cast<int>(edges_.size()) - 1;
  const auto it = std::upper_bound(edges_.begin(), edges_.end(), fraction);
  const auto k = static_cast<int>(it - edges_.begin()) - 1;
  return std::clamp(k, 0, bins - 1);
}

ExposureValue ExposureSpec::evaluate(NodeId i, std::span<const std::uint8_t> d, const Adjacency& links) const {
  switch (kind_) {
    case Kind::OwnTreatment:
      return d[i] ? 1 : 0;
    case Kind::AnyTreatedNeighbor:
      for (NodeId j : links.neighbors(i)) {
        if (d[j]) return 1;
      }
      return 0;
    case Kind::FractionTreatedNeighborsBinned: {
      const auto nb = links.neighbors(i);
      if (nb.empty()) return 0;
      std::size_t treated = 0;
      for (NodeId j : nb) treated += d[j] ? 1 : 0;
      return bin_of(static_cast<double>(treated) / static_cast<double>(nb.size()));
    }
  }
  return 0;
}

std::uint32_t exposure_radius(const ExposureSpec& spec) { return spec.radius(); }

std::vector<ExposureValue> compute_exposures(const ExposureSpec& spec, std::span<const std::uint8_t> d,
                                             const Adjacency& links) {
  if (d.size() != links.size()) throw InputError("assignment length does not match the network");
  std::vector<ExposureValue> t(d.size());
  for (NodeId i = 0; i < d.size(); ++i) t[i] = spec.evaluate(i, d, links);
  return t;
}

}  // namespace ani
