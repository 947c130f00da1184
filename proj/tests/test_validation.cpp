#include <doctest.h>

#include <cmath>
#include <random>

#include "omm/error.hpp"
#include "omm/synthetic.hpp"
#include "omm/validation.hpp"
#include "test_util.hpp"

using namespace omm;
using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {



std::vector<TimeSeriesDataset> campaign(const PlantSpec& plant, size_t n, Index rows, std::uint64_t seed) {
  std::vector<TimeSeriesDataset> out;
  for (size_t e = 0; e < n; ++e) {
    const auto u = piecewise_constant_inputs(plant.inputs, rows, 50.0, 2, 12, seed * 100 + e,
                                             "exp" + std::to_string(e));
    out.push_back(simulate(plant, u, VectorXd::Zero(plant.a_true.rows()), seed * 1000 + e).data);
  }
  return out;
}

CvConfig config_for(const PlantSpec& plant, size_t p, size_t repeats, std::uint64_t seed) {
  CvConfig c;
  c.inputs = plant.input_names();
  c.observables = plant.observable_names();
  c.p = p;
  c.repeats = repeats;
  c.seed = seed;
  return c;
}

}  // namespace

TEST_CASE("r2 and rmse hand values") {
  const std::vector<double> a = {1, 2, 3, 4, 5};
  std::vector<double> shifted = a;
  for (double& v : shifted) v += 2.0;
  const std::vector<double> flat(5, 3.0);
  CHECK(r2(a, a) == 1.0);
  CHECK(rmse(a, a) == 0.0);
  CHECK(rmse(a, shifted) == doctest::Approx(2.0).epsilon(1e-15));
  CHECK(r2(a, flat) == 0.0);

  try {
    r2(flat, a);
    FAIL("expected ConstantActual");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::ConstantActual);
  }
  const std::vector<double> shorter = {1, 2};
  CHECK_THROWS_AS(rmse(a, shorter), Error);
  CHECK_THROWS_AS(rmse(std::vector<double>{}, std::vector<double>{}), Error);
}

TEST_CASE("noise-free lpocv is near perfect and aggregates recompute from folds") {
  const auto plant = random_stable_plant(3, 2, 0.9, 11);
  const auto data = campaign(plant, 8, 400, 1);
  const auto cfg = config_for(plant, 3, 10, 42);
  const auto out = run_lpocv(data, cfg);
  const auto& rep = out.report;
  REQUIRE(rep.folds.size() == 10);
  for (const auto& f : rep.folds) {
    CHECK(f.test_ids.size() == 3);
    CHECK(f.train_ids.size() == 5);
    for (const auto& id : f.test_ids)
      CHECK(std::find(f.train_ids.begin(), f.train_ids.end(), id) == f.train_ids.end());
    for (size_t o = 0; o < 3; ++o) {
      CHECK(f.r2_test[o] >= 0.999);
      CHECK(f.r2_train[o] <= 1.0);
      CHECK(f.rmse_test[o] >= 0.0);
    }
  }
  for (size_t o = 0; o < 3; ++o) {
    double mean = 0.0;
    std::vector<double> v;
    for (const auto& f : rep.folds) v.push_back(f.rmse_test[o]);
    for (double x : v) mean += x;
    mean /= 10.0;
    double ss = 0.0;
    for (double x : v) ss += (x - mean) * (x - mean);
    CHECK(std::abs(rep.rmse_test[o].mean - mean) < 1e-12);
    CHECK(rep.rmse_test[o].ci95 == doctest::Approx(1.96 * std::sqrt(ss / 9.0) / std::sqrt(10.0)).epsilon(1e-12));
    CHECK(out.envelope.rmse[o] == rep.rmse_test[o].mean);
    CHECK(out.envelope.ci95[o] == rep.rmse_test[o].ci95);
  }
}

TEST_CASE("lpocv is bit reproducible and independent of fold parallelism") {
  const auto plant = random_stable_plant(2, 2, 0.85, 12);
  auto noisy = plant;
  noisy.noise_sd = {0.05, 0.05};
  const auto data = campaign(noisy, 6, 300, 2);
  auto cfg = config_for(plant, 2, 8, 7);
  const auto a = run_lpocv(data, cfg);
  const auto b = run_lpocv(data, cfg);
  cfg.parallel = false;
  const auto c = run_lpocv(data, cfg);
  CHECK(to_json(a.report).dump() == to_json(b.report).dump());
  CHECK(to_json(a.report).dump() == to_json(c.report).dump());
  cfg.seed = 8;
  CHECK(to_json(run_lpocv(data, cfg).report).dump() != to_json(a.report).dump());
}

TEST_CASE("noisy lpocv recovers the injected noise level") {
  const auto plant = random_stable_plant(2, 3, 0.8, 13);
  auto noisy = plant;
  noisy.noise_sd = {0.0, 0.2};
  const auto data = campaign(noisy, 8, 800, 3);
  const auto out = run_lpocv(data, config_for(plant, 3, 10, 9));
  CHECK(out.report.rmse_test[1].mean == doctest::Approx(0.2).epsilon(0.15));
  int train_wins = 0;
  for (const auto& f : out.report.folds) train_wins += f.r2_train[1] >= f.r2_test[1] ? 1 : 0;
  MESSAGE("train >= test R2 in " << train_wins << " of 10 folds");
}

TEST_CASE("lpocv needs more experiments than p") {
  const auto plant = random_stable_plant(2, 1, 0.5, 14);
  const auto data = campaign(plant, 3, 50, 4);
  try {
    run_lpocv(data, config_for(plant, 3, 2, 0));
    FAIL("expected TooFewExperiments");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::TooFewExperiments);
  }
}

TEST_CASE("bounds follow prediction plus or minus rmse plus ci") {
  UncertaintyEnvelope env{{"size"}, {0.25}, {0.02}};
  MatrixXd pred(1, 3);
  pred << 1.0, 2.0, -1.0;
  MatrixXd truth(1, 3);
  truth << 1.0, 2.5, -1.3;
  const auto b = bound({"size"}, pred, env, truth);
  CHECK(b.lower(0, 0) == doctest::Approx(0.73).epsilon(1e-15));
  CHECK(b.upper(0, 0) == doctest::Approx(1.27).epsilon(1e-15));
  for (Index t = 0; t < 3; ++t) CHECK(b.upper(0, t) - b.lower(0, t) == doctest::Approx(0.54).epsilon(1e-14));
  REQUIRE(b.violations[0].size() == 2);
  CHECK(b.violations[0][0].t == 1);
  CHECK(b.violations[0][0].bound == b.upper(0, 1));
  CHECK(b.violations[0][1].t == 2);
  CHECK(b.violations[0][1].bound == b.lower(0, 2));

  const auto exact = bound({"size"}, pred, env, pred);
  CHECK(exact.violations[0].empty());
  CHECK_THROWS_AS(bound({"temp"}, pred, env), Error);
  CHECK_THROWS_AS(bound({"size"}, pred, env, MatrixXd::Zero(1, 2)), Error);
}

TEST_CASE("violations are exactly the points outside the band") {
  std::mt19937_64 rng(15);
  const MatrixXd pred = omm_test::gaussian(2, 500, rng);
  const MatrixXd truth = pred + omm_test::gaussian(2, 500, rng);
  UncertaintyEnvelope env{{"a", "b"}, {0.8, 1.1}, {0.05, 0.0}};
  const auto b = bound({"a", "b"}, pred, env, truth);
  for (Index o = 0; o < 2; ++o) {
    size_t outside = 0;
    for (Index t = 0; t < 500; ++t) {
      CHECK(b.lower(o, t) < b.upper(o, t));
      if (truth(o, t) < b.lower(o, t) || truth(o, t) > b.upper(o, t)) ++outside;
    }
    CHECK(b.violations[static_cast<size_t>(o)].size() == outside);
  }
}

TEST_CASE("bound_predictions rolls out in original units") {
  const auto plant = random_stable_plant(2, 1, 0.7, 16);
  const auto data = campaign(plant, 4, 200, 5);
  const auto model = train(data, plant.input_names(), plant.observable_names());
  UncertaintyEnvelope env{plant.observable_names(), {0.1, 0.2}, {0.01, 0.01}};
  const VectorXd y0 = data[0].columns(plant.observable_names()).row(0).transpose();
  const MatrixXd u = data[0].columns(plant.input_names()).topRows(199).transpose();
  const auto b = bound_predictions(model, env, y0, u);
  CHECK(b.predictions == predict_experiment(model, data[0]));
  CHECK_FALSE(b.measured.has_value());
}

TEST_CASE("residual histogram and parity data") {
  const std::vector<double> a = {1, 2, 3, 4};
  const auto same = residual_histogram(a, a, 10);
  CHECK(same.counts.size() == 1);
  CHECK(same.counts[0] == 4);
  const auto p = parity_data(a, a);
  CHECK(p.slope == doctest::Approx(1.0));
  CHECK(p.intercept == doctest::Approx(0.0));

  std::mt19937_64 rng(17);
  std::normal_distribution<double> n01;
  std::vector<double> actual(100000), predicted(100000, 0.0);
  for (double& v : actual) v = n01(rng);
  const auto h = residual_histogram(actual, predicted, 30);
  size_t total = 0;
  for (size_t c : h.counts) total += c;
  CHECK(total == actual.size());
  CHECK(h.edges.size() == 31);
  CHECK(std::abs(h.skewness) < 0.05);

  // Over-predicting low values and under-predicting high ones flattens the line.
  std::vector<double> shrunk(actual.size());
  for (size_t i = 0; i < actual.size(); ++i) shrunk[i] = 0.7 * actual[i] + 0.1;
  const auto flat = parity_data(actual, shrunk);
  CHECK(flat.slope == doctest::Approx(0.7).epsilon(1e-9));
  CHECK(flat.intercept == doctest::Approx(0.1).epsilon(1e-9));
}

TEST_CASE("frequency study rows and baseline") {
  const auto plant = random_stable_plant(2, 2, 0.9, 18);
  auto noisy = plant;
  noisy.noise_sd = {0.02, 0.02};
  const auto data = campaign(noisy, 5, 400, 6);
  const auto cfg = config_for(plant, 2, 4, 3);
  const std::vector<int> factors = {1, 2, 4};
  const auto rows = frequency_study(data, cfg, factors);
  REQUIRE(rows.size() == 3);
  for (size_t i = 0; i < 3; ++i) {
    CHECK(rows[i].factor == factors[i]);
    CHECK(rows[i].hz == 50.0 / factors[i]);
  }
  const auto base = run_lpocv(data, cfg);
  for (size_t o = 0; o < 2; ++o) CHECK(rows[0].r2_test[o].mean == base.report.r2_test[o].mean);
  const std::vector<int> bad = {0};
  CHECK_THROWS_AS(frequency_study(data, cfg, bad), Error);
}

TEST_CASE("envelope json round trip") {
  UncertaintyEnvelope env{{"a", "b"}, {0.1, 0.2}, {0.01, 0.03}};
  const auto back = envelope_from_json(to_json(env));
  CHECK(back.observables == env.observables);
  CHECK(back.rmse == env.rmse);
  CHECK(back.ci95 == env.ci95);
  auto j = to_json(env);
  j["rmse"] = {0.1};
  CHECK_THROWS_AS(envelope_from_json(j), Error);
}
