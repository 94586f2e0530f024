#include "ani/io.hpp"

#include <charconv>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>

#include "ani/errors.hpp"

namespace ani {

namespace {

std::ifstream open_in(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open '" + path + "'");
  return in;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <class T>
T parse_uint(const std::string& text, std::size_t line, const char* what) {
  T v{};
  const auto* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, v);
  if (ec != std::errc() || ptr != end) {
    throw InputError("line " + std::to_string(line) + ": bad " + what + " '" + text + "'");
  }
  return v;
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::stringstream ss(line);
  while (std::getline(ss, cell, ',')) out.push_back(trim(cell));
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

}  // namespace

EdgeList read_edge_list(std::istream& in) {
  EdgeList out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto t = trim(line);
    if (t.empty()) continue;
    if (t[0] == '#') {
      // "# nodes N" keeps trailing isolated nodes
      std::istringstream hs(t.substr(1));
      std::string key;
      std::size_t count = 0;
      if (hs >> key >> count && key == "nodes") out.n = std::max(out.n, count);
      continue;
    }
    std::istringstream ls(t);
    std::string a, b, extra;
    if (!(ls >> a >> b) || (ls >> extra)) throw InputError("line " + std::to_string(lineno) + ": expected two node ids");
    const auto u = parse_uint<NodeId>(a, lineno, "node id");
    const auto v = parse_uint<NodeId>(b, lineno, "node id");
    out.edges.emplace_back(u, v);
    out.n = std::max<std::size_t>(out.n, std::max(u, v) + std::size_t{1});
  }
  return out;
}

EdgeList read_edge_list_file(const std::string& path) {
  auto in = open_in(path);
  return read_edge_list(in);
}

void write_edge_list(std::ostream& out, const Graph& g) {
  out << "# nodes " << g.size() << "\n";
  for (const auto& [u, v] : g.edges()) out << u << ' ' << v << '\n';
}

std::vector<std::uint32_t> read_degrees(std::istream& in) {
  std::vector<std::uint32_t> d;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    d.push_back(parse_uint<std::uint32_t>(t, lineno, "degree"));
  }
  return d;
}

std::vector<std::uint32_t> read_degrees_file(const std::string& path) {
  auto in = open_in(path);
  return read_degrees(in);
}

UnitsTable read_units_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw InputError("units CSV is empty");
  if (trim(line) != "id,outcome,treatment,eligible,block") {
    throw InputError("units CSV header must be id,outcome,treatment,eligible,block");
  }
  struct Row {
    double outcome;
    std::optional<std::uint8_t> treatment;
    bool eligible;
    std::optional<std::size_t> block;
  };
  std::map<std::size_t, Row> rows;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    const auto cells = split_csv(line);
    if (cells.size() != 5) throw InputError("line " + std::to_string(lineno) + ": expected 5 fields");
    const auto id = parse_uint<std::size_t>(cells[0], lineno, "id");
    Row r{};
    try {
      std::size_t used = 0;
      r.outcome = cells[1].empty() ? 0.0 : std::stod(cells[1], &used);
      if (!cells[1].empty() && used != cells[1].size()) throw InputError("");
    } catch (const std::exception&) {
      throw InputError("line " + std::to_string(lineno) + ": bad outcome '" + cells[1] + "'");
    }
    if (!cells[2].empty()) {
      const auto d = parse_uint<unsigned>(cells[2], lineno, "treatment");
      if (d > 1) throw InputError("line " + std::to_string(lineno) + ": treatment must be 0 or 1");
      r.treatment = static_cast<std::uint8_t>(d);
    }
    const auto e = parse_uint<unsigned>(cells[3], lineno, "eligible flag");
    if (e > 1) throw InputError("line " + std::to_string(lineno) + ": eligible must be 0 or 1");
    r.eligible = e == 1;
    if (!cells[4].empty()) r.block = parse_uint<std::size_t>(cells[4], lineno, "block");
    if (!rows.emplace(id, r).second) throw InputError("line " + std::to_string(lineno) + ": duplicate id " + cells[0]);
  }
  UnitsTable t;
  std::size_t expect = 0;
  for (const auto& [id, r] : rows) {
    if (id != expect++) throw InputError("unit ids must be 0..n-1 without gaps");
    t.outcome.push_back(r.outcome);
    t.treatment.push_back(r.treatment);
    t.eligible.push_back(r.eligible);
    t.block.push_back(r.block);
  }
  return t;
}

UnitsTable read_units_csv_file(const std::string& path) {
  auto in = open_in(path);
  return read_units_csv(in);
}

void write_units_csv(std::ostream& out, const UnitsTable& units) {
  out << "id,outcome,treatment,eligible,block\n";
  out << std::setprecision(12);
  for (std::size_t i = 0; i < units.size(); ++i) {
    out << i << ',' << units.outcome[i] << ',';
    if (units.treatment[i]) out << static_cast<int>(*units.treatment[i]);
    out << ',' << (units.eligible[i] ? 1 : 0) << ',';
    if (units.block[i]) out << *units.block[i];
    out << '\n';
  }
}

Design design_from_units(const UnitsTable& units, double p) {
  const std::size_t n = units.size();
  bool blocked = false;
  for (const auto& b : units.block) blocked = blocked || b.has_value();
  if (!blocked) {
    std::vector<double> probs(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) probs[i] = units.eligible[i] ? p : 0.0;
    return Design::bernoulli(std::move(probs), units.eligible);
  }
  std::map<std::size_t, Design::Block> blocks;
  for (std::size_t i = 0; i < n; ++i) {
    if (!units.block[i]) {
      if (units.eligible[i]) throw InputError("eligible unit " + std::to_string(i) + " has no block");
      continue;
    }
    if (!units.eligible[i]) throw InputError("unit " + std::to_string(i) + " is in a block but not eligible");
    auto& blk = blocks[*units.block[i]];
    blk.units.push_back(static_cast<NodeId>(i));
    if (units.treatment[i].value_or(0)) ++blk.treated;
  }
  std::vector<Design::Block> list;
  for (auto& [id, blk] : blocks) list.push_back(std::move(blk));
  return Design::blocks(n, std::move(list));
}

}  // namespace ani
