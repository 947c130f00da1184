#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace omm {

struct MeanCi {
  double mean = 0.0;
  double ci95 = 0.0;  // 1.96 * sd / sqrt(n), sd with n-1 denominator
};

MeanCi mean_ci95(std::span<const double> values);

// One leave-p-out draw: `test` holds p experiment indices drawn uniformly
// without replacement, `train` the rest, both ascending.
struct LpocvSplit {
  std::vector<size_t> train;
  std::vector<size_t> test;
};

// Each repeat is an independent fresh draw, so the same experiment may be
// held out in several repeats. Deterministic for a given seed.
std::vector<LpocvSplit> draw_splits(size_t n_experiments, size_t p, size_t repeats, std::uint64_t seed);

}  // namespace omm
