// Writes a synthetic degree sequence: n values in 0..10 whose mean is 7.96
// (to the nearest integer total).
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <random>
#include <string>
#include <vector>

#include "ani/rng.hpp"

int main(int argc, char** argv) {
  if (argc != 4) {
    std::cerr << "usage: make_calibration <n> <seed> <out>\n";
    return 1;
  }
  const std::size_t n = std::stoul(argv[1]);
  const std::uint64_t seed = std::stoull(argv[2]);
  constexpr int kMaxDegree = 10;
  constexpr double kMean = 7.96;

  ani::Rng rng = ani::make_rng(seed);
  std::binomial_distribution<int> draw(kMaxDegree, kMean / kMaxDegree);
  std::vector<int> deg(n);
  long total = 0;
  for (auto& d : deg) total += d = draw(rng);

  const long want = std::lround(kMean * static_cast<double>(n));
  std::uniform_int_distribution<std::size_t> pick(0, n - 1);
  while (total != want) {
    auto& d = deg[pick(rng)];
    if (total < want && d < kMaxDegree) ++d, ++total;
    else if (total > want && d > 0) --d, --total;
  }

  std::ofstream out(argv[3]);
  if (!out) {
    std::cerr << "cannot write " << argv[3] << "\n";
    return 1;
  }
  out << "# synthetic calibration: n " << n << ", mean degree " << kMean << ", seed " << seed << "\n";
  for (int d : deg) out << d << "\n";
  return 0;
}
