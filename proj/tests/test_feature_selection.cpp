#include <doctest.h>

#include <cmath>
#include <random>

#include "omm/error.hpp"
#include "omm/feature_selection.hpp"
#include "test_util.hpp"

using namespace omm;
using Eigen::MatrixXd;
using omm_test::gaussian;

namespace {

// Independent oracle: VIF_j is the j-th diagonal entry of the inverse
// correlation matrix.
std::vector<double> vif_oracle(const MatrixXd& x) {
  const MatrixXd c = x.rowwise() - x.colwise().mean();
  const Eigen::VectorXd sd = c.colwise().norm();
  const MatrixXd z = c * sd.cwiseInverse().asDiagonal();
  const MatrixXd inv = (z.transpose() * z).inverse();
  std::vector<double> out;
  for (Eigen::Index i = 0; i < x.cols(); ++i) out.push_back(inv(i, i));
  return out;
}

std::vector<std::string> names_for(Eigen::Index k) {
  std::vector<std::string> n;
  for (Eigen::Index i = 0; i < k; ++i) n.push_back("f" + std::to_string(i));
  return n;
}

}  // namespace

TEST_CASE("vif_single, vif_all and the serial reference match the inverse-correlation oracle") {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    MatrixXd x = gaussian(300, 6, rng);
    x.col(2) += 0.8 * x.col(0) - 0.5 * x.col(1);  // moderate collinearity
    x.col(5) = (3.0 * x.col(5)).array() + 10.0;            // scale and offset do not matter
    const auto oracle = vif_oracle(x);
    const auto fast = vif_all(x);
    const auto serial = vif_all_serial(x);
    for (size_t i = 0; i < oracle.size(); ++i) {
      CHECK(fast[i] == doctest::Approx(oracle[i]).epsilon(1e-9));
      CHECK(serial[i] == doctest::Approx(oracle[i]).epsilon(1e-9));
      CHECK(vif_single(x, static_cast<Eigen::Index>(i)) == doctest::Approx(oracle[i]).epsilon(1e-9));
      CHECK(fast[i] >= 1.0 - 1e-12);
    }
  }
}

TEST_CASE("VIF is infinite for exact collinearity and constant columns") {
  std::mt19937_64 rng(6);
  MatrixXd x = gaussian(100, 4, rng);
  x.col(3) = 1.0 - x.col(0).array();
  const auto v = vif_all(x);
  CHECK(std::isinf(v[0]));
  CHECK(std::isinf(v[3]));
  CHECK(std::isfinite(v[1]));
  x.col(1).setConstant(2.0);
  CHECK(std::isinf(vif_single(x, 1)));
}

TEST_CASE("VIF of uncorrelated features is near one") {
  std::mt19937_64 rng(7);
  const MatrixXd x = gaussian(20000, 5, rng);
  for (double v : vif_all(x)) CHECK(v == doctest::Approx(1.0).epsilon(0.01));
}

TEST_CASE("single column and index errors") {
  std::mt19937_64 rng(8);
  const MatrixXd x = gaussian(10, 1, rng);
  CHECK(vif_single(x, 0) == 1.0);
  CHECK_THROWS_AS(vif_single(x, 3), Error);
}

TEST_CASE("planted dependencies reduce to the independent core") {
  std::mt19937_64 rng(9);
  MatrixXd x = gaussian(500, 10, rng);
  x.col(7) = x.col(0) + x.col(1);
  x.col(8) = 2.0 * x.col(2) - x.col(3);
  x.col(9) = x.col(4) + x.col(5) + x.col(6);
  const auto r = select_features(x, names_for(10));
  CHECK(r.surviving_features.size() == 7);
  CHECK(r.final_rank == 7);
  CHECK(r.iterations.size() == 3);
  for (double v : r.final_vifs) CHECK(v < 5.0);
  for (size_t i = 0; i < r.iterations.size(); ++i) {
    CHECK(r.iterations[i].iteration_index == static_cast<int>(i + 1));
    CHECK(r.iterations[i].column_count == 10 - static_cast<Eigen::Index>(i));
    CHECK(r.iterations[i].matrix_rank == 7);
  }
}

TEST_CASE("complement flag pair goes in the first iteration, earliest column on ties") {
  std::mt19937_64 rng(10);
  std::bernoulli_distribution coin(0.4);
  MatrixXd x = gaussian(400, 5, rng);
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    x(i, 2) = coin(rng) ? 1.0 : 0.0;
    x(i, 3) = 1.0 - x(i, 2);
  }
  const std::vector<std::string> names = {"power", "speed", "infill_flag", "contour_flag", "height"};
  const auto r = select_features(x, names);
  REQUIRE_FALSE(r.iterations.empty());
  CHECK(r.iterations.front().excluded_feature == "infill_flag");
  CHECK(std::isinf(r.iterations.front().vif_values[2]));
  CHECK(std::isinf(r.iterations.front().vif_values[3]));
  CHECK(r.iterations.size() == 1);
  CHECK(r.surviving_features == std::vector<std::string>{"power", "speed", "contour_flag", "height"});
}

TEST_CASE("selection property: survivors always satisfy the acceptance threshold and keep the original order") {
  std::mt19937_64 rng(11);
  std::uniform_int_distribution<int> cols(2, 9), which(0, 8);
  std::normal_distribution<double> coef;
  for (int trial = 0; trial < 50; ++trial) {
    const int k = cols(rng);
    MatrixXd x = gaussian(200, k, rng);
    for (int d = 0; d < k / 3; ++d) {
      const int target = which(rng) % k, src = which(rng) % k;
      if (target != src) x.col(target) += coef(rng) * x.col(src);
    }
    const auto names = names_for(k);
    VifSelectionReport r;
    try {
      r = select_features(x, names);
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::EmptySurvivorSet);
      continue;
    }
    for (double v : r.final_vifs) CHECK(v < 5.0);
    CHECK(r.surviving_features.size() + r.iterations.size() == static_cast<size_t>(k));
    CHECK(std::is_sorted(r.surviving_features.begin(), r.surviving_features.end(),
                         [](const std::string& a, const std::string& b) { return std::stoi(a.substr(1)) < std::stoi(b.substr(1)); }));
    // Deterministic.
    const auto again = select_features(x, names);
    CHECK(again.surviving_features == r.surviving_features);
  }
}

TEST_CASE("thresholds are configurable and validated") {
  std::mt19937_64 rng(12);
  MatrixXd x = gaussian(300, 3, rng);
  x.col(2) = x.col(0) + 0.5 * x.col(2);  // VIF around 5
  const auto names = names_for(3);
  const auto loose = select_features(x, names, {100.0, 50.0});
  CHECK(loose.iterations.empty());
  const auto strict = select_features(x, names, {1.5, 1.2});
  CHECK(strict.surviving_features.size() < 3);
  CHECK_THROWS_AS(select_features(x, names, {5.0, 10.0}), Error);
}

TEST_CASE("removing the last feature is an error") {
  MatrixXd x = MatrixXd::Ones(10, 1);
  try {
    select_features(x, names_for(1));
    FAIL("expected EmptySurvivorSet");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::EmptySurvivorSet);
    CHECK(e.category() == ErrorCategory::Numeric);
  }
}

TEST_CASE("report JSON writes infinite VIFs as a string") {
  MatrixXd x(4, 3);
  x << 1, 2, 0, 2, 1, 1, 3, 5, 0, 4, 3, 1;
  x.col(2) = x.col(0) * 2.0;
  const auto r = select_features(x, names_for(3));
  const auto j = to_json(r);
  CHECK(j["iterations"][0]["vif"]["f0"] == "Infinity");
}
