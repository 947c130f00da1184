#include <doctest.h>

#include <omp.h>

#include <random>

#include "omm/linalg.hpp"
#include "test_util.hpp"

using namespace omm::linalg;
using omm_test::gaussian;

TEST_CASE("blocked reduction solves the same least-squares problem as one QR") {
  std::mt19937_64 rng(1);
  for (Index n : {5, 40, 1000, 9001}) {
    const MatrixXd x = gaussian(n, 5, rng);
    const MatrixXd y = gaussian(n, 2, rng);
    const auto fast = reduce_tall(x, y, 64);
    const auto ref = reduce_tall_serial(x, y);
    // Oracle: normal equations.
    const MatrixXd beta = (x.transpose() * x).ldlt().solve(x.transpose() * y);
    const MatrixXd beta_fast = fast.r.triangularView<Eigen::Upper>().solve(fast.qty);
    const MatrixXd beta_ref = ref.r.triangularView<Eigen::Upper>().solve(ref.qty);
    CHECK(omm_test::rel_fro(beta_fast, beta) < 1e-9);
    CHECK(omm_test::rel_fro(beta_ref, beta) < 1e-9);
    // R^T R = X^T X regardless of row signs.
    CHECK(omm_test::rel_fro(fast.r.transpose() * fast.r, x.transpose() * x) < 1e-12);
  }
}

TEST_CASE("blocked reduction is bitwise independent of the thread count") {
  std::mt19937_64 rng(2);
  const MatrixXd x = gaussian(20000, 6, rng);
  const MatrixXd y = gaussian(20000, 3, rng);
  const int saved = omp_get_max_threads();
  omp_set_num_threads(1);
  const auto one = reduce_tall(x, y, 512);
  omp_set_num_threads(4);
  const auto four = reduce_tall(x, y, 512);
  omp_set_num_threads(saved);
  CHECK(one.r == four.r);
  CHECK(one.qty == four.qty);
}

TEST_CASE("singular values survive the reduction") {
  std::mt19937_64 rng(3);
  const MatrixXd x = gaussian(3000, 7, rng);
  const VectorXd direct = Eigen::JacobiSVD<MatrixXd>(x).singularValues();
  CHECK((singular_values(x) - direct).norm() / direct.norm() < 1e-12);
}

TEST_CASE("matrix_rank on planted rank deficiency") {
  std::mt19937_64 rng(4);
  MatrixXd x = gaussian(200, 6, rng);
  x.col(5) = x.col(0) - 2.0 * x.col(3);
  x.col(4) = x.col(1);
  CHECK(matrix_rank(x) == 4);
  CHECK(matrix_rank(MatrixXd::Zero(10, 3)) == 0);
  CHECK(matrix_rank(gaussian(3, 8, rng)) == 3);
}
