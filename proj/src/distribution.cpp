#include "omm/distribution.hpp"

#include <algorithm>
#include <cmath>
#include <exception>

#include "omm/error.hpp"

namespace omm {

double wasserstein_1d(std::span<const double> a, std::span<const double> b) {
  if (a.empty() || b.empty()) throw Error(ErrorCode::EmptySample, "wasserstein_1d needs nonempty samples");
  std::vector<double> x(a.begin(), a.end());
  std::vector<double> y(b.begin(), b.end());
  std::sort(x.begin(), x.end());
  std::sort(y.begin(), y.end());

  const size_t n = x.size();
  const size_t m = y.size();
  if (n == m) {
    double sum = 0.0;
    for (size_t i = 0; i < n; ++i) sum += std::abs(x[i] - y[i]);
    return sum / static_cast<double>(n);
  }

  // Merge the quantile breakpoints i/n and j/m; compare (i+1)/n with (j+1)/m
  // in integers so equal breakpoints advance both sides together.
  double total = 0.0;
  double t = 0.0;
  size_t i = 0;
  size_t j = 0;
  while (i < n && j < m) {
    const auto lhs = static_cast<unsigned long long>(i + 1) * m;
    const auto rhs = static_cast<unsigned long long>(j + 1) * n;
    const double next = lhs <= rhs ? static_cast<double>(i + 1) / static_cast<double>(n)
                                   : static_cast<double>(j + 1) / static_cast<double>(m);
    total += (next - t) * std::abs(x[i] - y[j]);
    t = next;
    if (lhs <= rhs) ++i;
    if (rhs <= lhs) ++j;
  }
  return total;
}

std::vector<double> uniform_grid(double lo, double hi, size_t n) {
  std::vector<double> out(n);
  if (n == 1) {
    out[0] = 0.5 * (lo + hi);
    return out;
  }
  for (size_t i = 0; i < n; ++i)
    out[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n - 1);
  return out;
}

double uniform_benchmark(std::span<const double> samples) {
  if (samples.empty()) throw Error(ErrorCode::EmptySample, "uniform_benchmark needs a nonempty sample");
  const auto [lo, hi] = std::minmax_element(samples.begin(), samples.end());
  if (*lo == *hi) throw Error(ErrorCode::ConstantChannel, "uniform reference undefined for a constant sample");
  const auto grid = uniform_grid(*lo, *hi, samples.size());
  return wasserstein_1d(samples, grid);
}

namespace {

std::vector<double> pool(std::span<const TimeSeriesDataset> datasets, const std::vector<size_t>& which,
                         const std::string& channel) {
  std::vector<double> out;
  for (size_t k : which) {
    const auto col = datasets[k].column(channel);
    out.insert(out.end(), col.begin(), col.end());
  }
  return out;
}

constexpr const char* kLabels[3] = {"Train->Uniform", "Test->Uniform", "Test->Train"};

}  // namespace

std::vector<WassersteinResult> split_shift_report(std::span<const TimeSeriesDataset> datasets,
                                                  std::span<const LpocvSplit> splits,
                                                  std::span<const std::string> channels) {
  const size_t nc = channels.size();
  const size_t nr = splits.size();
  for (const auto& s : splits) {
    if (s.train.empty() || s.test.empty())
      throw Error(ErrorCode::TooFewExperiments, "every split needs a train and a test experiment");
  }
  // distances[(c * nr + r) * 3 + label]
  std::vector<double> distances(nc * nr * 3);
  const auto tasks = static_cast<long>(nc * nr);
  // Errors cannot cross the OpenMP region; capture the first one and rethrow.
  std::vector<std::exception_ptr> errors(static_cast<size_t>(tasks));
#pragma omp parallel for schedule(dynamic)
  for (long task = 0; task < tasks; ++task) {
    const size_t c = static_cast<size_t>(task) / nr;
    const size_t r = static_cast<size_t>(task) % nr;
    try {
      const auto train = pool(datasets, splits[r].train, channels[c]);
      const auto test = pool(datasets, splits[r].test, channels[c]);
      double* d = &distances[static_cast<size_t>(task) * 3];
      d[0] = uniform_benchmark(train);
      d[1] = uniform_benchmark(test);
      d[2] = wasserstein_1d(test, train);
    } catch (...) {
      errors[static_cast<size_t>(task)] = std::current_exception();
    }
  }
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);

  std::vector<WassersteinResult> out;
  for (size_t c = 0; c < nc; ++c) {
    for (size_t label = 0; label < 3; ++label) {
      WassersteinResult w;
      w.pair_label = kLabels[label];
      w.channel = channels[c];
      w.repeats = static_cast<int>(nr);
      for (size_t r = 0; r < nr; ++r) w.per_repeat.push_back(distances[(c * nr + r) * 3 + label]);
      const auto agg = mean_ci95(w.per_repeat);
      w.mean_distance = agg.mean;
      w.ci95_halfwidth = agg.ci95;
      out.push_back(std::move(w));
    }
  }
  return out;
}

nlohmann::json to_json(std::span<const WassersteinResult> results) {
  nlohmann::json j = nlohmann::json::array();
  for (const auto& w : results) {
    j.push_back({{"pair", w.pair_label},
                 {"channel", w.channel},
                 {"mean", w.mean_distance},
                 {"ci95", w.ci95_halfwidth},
                 {"repeats", w.repeats},
                 {"per_repeat", w.per_repeat}});
  }
  return j;
}

}  // namespace omm
