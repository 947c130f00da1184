#include "omm/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <string>

#include "omm/error.hpp"

namespace omm {

MeanCi mean_ci95(std::span<const double> values) {
  MeanCi out;
  if (values.empty()) return out;
  const double n = static_cast<double>(values.size());
  out.mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
  if (values.size() < 2) return out;
  double ss = 0.0;
  for (double v : values) ss += (v - out.mean) * (v - out.mean);
  out.ci95 = 1.96 * std::sqrt(ss / (n - 1.0)) / std::sqrt(n);
  return out;
}

std::vector<LpocvSplit> draw_splits(size_t n_experiments, size_t p, size_t repeats, std::uint64_t seed) {
  if (p == 0 || n_experiments <= p) {
    throw Error(ErrorCode::TooFewExperiments, "leave-" + std::to_string(p) + "-out needs more than " +
                                                  std::to_string(p) + " experiments, have " +
                                                  std::to_string(n_experiments));
  }
  std::mt19937_64 rng(seed);
  std::vector<LpocvSplit> out;
  out.reserve(repeats);
  std::vector<size_t> idx(n_experiments);
  for (size_t r = 0; r < repeats; ++r) {
    std::iota(idx.begin(), idx.end(), size_t{0});
    // Partial Fisher-Yates: the first p slots become the held-out set.
    for (size_t i = 0; i < p; ++i) {
      std::uniform_int_distribution<size_t> pick(i, n_experiments - 1);
      std::swap(idx[i], idx[pick(rng)]);
    }
    LpocvSplit s;
    s.test.assign(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(p));
    s.train.assign(idx.begin() + static_cast<std::ptrdiff_t>(p), idx.end());
    std::sort(s.test.begin(), s.test.end());
    std::sort(s.train.begin(), s.train.end());
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace omm
