// Parallel kernels against their serial references.

#include <random>

#include <benchmark/benchmark.h>

#include "omm/dmdc.hpp"
#include "omm/feature_selection.hpp"
#include "omm/synthetic.hpp"

namespace {

omm::SnapshotSet make_snapshots(Eigen::Index n, Eigen::Index q, Eigen::Index p) {
  const auto plant = omm::random_stable_plant(q, p, 0.9, 7);
  std::mt19937_64 rng(11);
  std::normal_distribution<double> n01;
  omm::SnapshotSet s;
  s.u_t.resize(p, n);
  for (Eigen::Index t = 0; t < n; ++t)
    for (Eigen::Index i = 0; i < p; ++i) s.u_t(i, t) = n01(rng);
  s.y_t.resize(q, n);
  s.y_t1.resize(q, n);
  Eigen::VectorXd y = Eigen::VectorXd::Zero(q);
  for (Eigen::Index t = 0; t < n; ++t) {
    s.y_t.col(t) = y;
    y = plant.a_true * y + plant.b_true * s.u_t.col(t);
    s.y_t1.col(t) = y;
  }
  s.observable_names = plant.observable_names();
  s.input_names = plant.input_names();
  return s;
}

Eigen::MatrixXd make_features(Eigen::Index rows, Eigen::Index cols) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> n01;
  Eigen::MatrixXd x(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j)
    for (Eigen::Index i = 0; i < rows; ++i) x(i, j) = n01(rng);
  x.col(cols - 1) = x.col(0) + 0.1 * x.col(1);
  return x;
}

void BM_fit_tsqr(benchmark::State& state) {
  const auto s = make_snapshots(state.range(0), 3, 21);
  for (auto _ : state) benchmark::DoNotOptimize(omm::fit(s));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

void BM_fit_reference(benchmark::State& state) {
  const auto s = make_snapshots(state.range(0), 3, 21);
  for (auto _ : state) benchmark::DoNotOptimize(omm::fit_reference(s));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

void BM_rollout(benchmark::State& state) {
  const auto s = make_snapshots(state.range(0), 3, 21);
  const auto model = omm::fit(s);
  for (auto _ : state) benchmark::DoNotOptimize(omm::rollout(model, Eigen::VectorXd::Zero(3), s.u_t));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

void BM_vif_parallel(benchmark::State& state) {
  const auto x = make_features(state.range(0), 21);
  for (auto _ : state) benchmark::DoNotOptimize(omm::vif_all(x));
}

void BM_vif_serial(benchmark::State& state) {
  const auto x = make_features(state.range(0), 21);
  for (auto _ : state) benchmark::DoNotOptimize(omm::vif_all_serial(x));
}

}  // namespace

BENCHMARK(BM_fit_tsqr)->Arg(10'000)->Arg(100'000)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_fit_reference)->Arg(10'000)->Arg(100'000)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_rollout)->Arg(100'000)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_vif_parallel)->Arg(10'000)->Arg(100'000)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_vif_serial)->Arg(10'000)->Arg(100'000)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
