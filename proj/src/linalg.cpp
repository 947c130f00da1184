#include "omm/linalg.hpp"

#include <limits>

namespace omm::linalg {

double default_rank_tolerance(Index rows, Index cols) {
  return std::numeric_limits<double>::epsilon() * static_cast<double>(std::max(rows, cols));
}

VectorXd singular_values(const MatrixXd& m) {
  if (m.size() == 0) return {};
  if (m.rows() < m.cols()) return singular_values(m.transpose());
  if (m.rows() > 2 * m.cols()) {
    const auto red = reduce_tall(m, MatrixXd(m.rows(), 0));
    return Eigen::JacobiSVD<MatrixXd>(red.r).singularValues();
  }
  return Eigen::JacobiSVD<MatrixXd>(m).singularValues();
}

Index matrix_rank(const MatrixXd& m, std::optional<double> rel_tol) {
  const VectorXd s = singular_values(m);
  if (s.size() == 0 || s(0) == 0.0) return 0;
  const double cut = rel_tol.value_or(default_rank_tolerance(m.rows(), m.cols())) * s(0);
  return (s.array() > cut).count();
}

TallReduction reduce_tall(const MatrixXd& x, const MatrixXd& y, Index block_rows) {
  return reduce_tall_blocks(
      x.rows(), x.cols(), y.cols(),
      [&](Index begin, Index count, MatrixXd& xb, MatrixXd& yb) {
        xb = x.middleRows(begin, count);
        yb = y.middleRows(begin, count);
      },
      block_rows);
}

TallReduction reduce_tall_serial(const MatrixXd& x, const MatrixXd& y) {
  return detail::factor_block(x, y);
}

}  // namespace omm::linalg
