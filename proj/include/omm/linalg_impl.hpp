#pragma once

#include <algorithm>
#include <vector>

namespace omm::linalg {

namespace detail {

// Factor one stacked block; returns R (k x k) and the top k rows of Q^T Y.
// Blocks shorter than k are zero-padded, which leaves R and Q^T Y unchanged.
inline TallReduction factor_block(MatrixXd x, MatrixXd y) {
  const Index k = x.cols();
  if (x.rows() < k) {
    const Index old = x.rows();
    x.conservativeResize(k, Eigen::NoChange);
    y.conservativeResize(k, Eigen::NoChange);
    x.bottomRows(k - old).setZero();
    y.bottomRows(k - old).setZero();
  }
  Eigen::HouseholderQR<MatrixXd> qr(x);
  TallReduction out;
  out.r = qr.matrixQR().topRows(k).triangularView<Eigen::Upper>();
  y.applyOnTheLeft(qr.householderQ().adjoint());
  out.qty = y.topRows(k);
  return out;
}

}  // namespace detail

template <typename Fill>
TallReduction reduce_tall_blocks(Index n, Index k, Index r, Fill&& fill, Index block_rows) {
  block_rows = std::max(block_rows, 2 * k);
  const Index blocks = std::max<Index>(1, n / block_rows);
  // The final block absorbs the remainder so no block is shorter than k.
  auto block_begin = [&](Index b) { return b * block_rows; };
  auto block_size = [&](Index b) { return b + 1 == blocks ? n - block_begin(b) : block_rows; };

  std::vector<TallReduction> partial(static_cast<size_t>(blocks));
#pragma omp parallel for schedule(static)
  for (Index b = 0; b < blocks; ++b) {
    MatrixXd xb(block_size(b), k);
    MatrixXd yb(block_size(b), r);
    fill(block_begin(b), block_size(b), xb, yb);
    partial[static_cast<size_t>(b)] = detail::factor_block(std::move(xb), std::move(yb));
  }
  if (blocks == 1) return std::move(partial.front());

  MatrixXd rs(blocks * k, k);
  MatrixXd cs(blocks * k, r);
  for (Index b = 0; b < blocks; ++b) {
    rs.middleRows(b * k, k) = partial[static_cast<size_t>(b)].r;
    cs.middleRows(b * k, k) = partial[static_cast<size_t>(b)].qty;
  }
  return detail::factor_block(std::move(rs), std::move(cs));
}

}  // namespace omm::linalg
