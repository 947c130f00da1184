#pragma once

#include <optional>

#include <Eigen/Dense>

namespace omm::linalg {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

// machine epsilon * max(rows, cols); multiply by sigma_max for an absolute cut.
double default_rank_tolerance(Index rows, Index cols);

// Singular values in decreasing order. Tall inputs are first reduced to their
// R factor, which has the same singular values.
VectorXd singular_values(const MatrixXd& m);

// Count of singular values > rel_tol * sigma_max. rel_tol defaults to
// default_rank_tolerance(rows, cols).
Index matrix_rank(const MatrixXd& m, std::optional<double> rel_tol = std::nullopt);

// Result of reducing a tall system [X | Y] (n x k, n x r) by an orthogonal
// transform Q^T: X = Q R, qty = Q^T Y restricted to the first k rows.
// Column-space quantities (least-squares solutions, singular values and
// right singular vectors of X, projected norms) are preserved.
struct TallReduction {
  MatrixXd r;    // k x k, upper triangular
  MatrixXd qty;  // k x r
};

inline constexpr Index kDefaultBlockRows = 4096;

// Blocked (TSQR) reduction. Row blocks are factored independently in
// parallel and their R factors stacked and factored again. The block
// partition depends only on n and block_rows, never on the thread count, so
// results are bitwise reproducible.
TallReduction reduce_tall(const MatrixXd& x, const MatrixXd& y, Index block_rows = kDefaultBlockRows);

// Same reduction as a single Householder QR; the reference for tests.
TallReduction reduce_tall_serial(const MatrixXd& x, const MatrixXd& y);

// Row-block source for reduce_tall without materialising X and Y: fill(begin,
// count, xblock, yblock) writes rows [begin, begin+count).
template <typename Fill>
TallReduction reduce_tall_blocks(Index n, Index k, Index r, Fill&& fill, Index block_rows = kDefaultBlockRows);

}  // namespace omm::linalg

#include "omm/linalg_impl.hpp"
