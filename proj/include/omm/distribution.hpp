#pragma once

#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "omm/dataset.hpp"
#include "omm/stats.hpp"

namespace omm {

// W1 between two empirical distributions: the integral over t in [0, 1] of
// |F_a^-1(t) - F_b^-1(t)| with piecewise-constant quantile functions, so
// unequal sample sizes need no truncation or resampling.
double wasserstein_1d(std::span<const double> a, std::span<const double> b);

// n equally spaced points covering [lo, hi] inclusive.
std::vector<double> uniform_grid(double lo, double hi, size_t n);

// W1 from the sample to a same-length equally spaced grid on [min, max]. The
// grid stands in for the continuous uniform; the discrepancy is O(1/n).
double uniform_benchmark(std::span<const double> samples);

struct WassersteinResult {
  std::string pair_label;  // "Train->Uniform", "Test->Uniform", "Test->Train"
  std::string channel;
  double mean_distance = 0.0;
  double ci95_halfwidth = 0.0;
  int repeats = 0;
  std::vector<double> per_repeat;
};

// For every split and channel, pools the train and test experiments and
// computes the three distances above, then aggregates across splits. Output
// is grouped by channel, then pair label in the order listed.
std::vector<WassersteinResult> split_shift_report(std::span<const TimeSeriesDataset> datasets,
                                                  std::span<const LpocvSplit> splits,
                                                  std::span<const std::string> channels);

nlohmann::json to_json(std::span<const WassersteinResult> results);

}  // namespace omm
