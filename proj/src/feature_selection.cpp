#include "omm/feature_selection.hpp"

#include <cmath>
#include <limits>

#include "omm/error.hpp"
#include "omm/linalg.hpp"

namespace omm {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

MatrixXd centred(const MatrixXd& x) { return x.rowwise() - x.colwise().mean(); }

MatrixXd without_column(const MatrixXd& m, Index i) {
  MatrixXd out(m.rows(), m.cols() - 1);
  out.leftCols(i) = m.leftCols(i);
  out.rightCols(m.cols() - i - 1) = m.rightCols(m.cols() - i - 1);
  return out;
}

// 1/(1-R^2) for regressing `target` on `others`, both already centred (or
// reduced by the same orthogonal transform). `rows` sets the pinv cutoff.
double vif_from_regression(const MatrixXd& others, const VectorXd& target, Index rows) {
  const double ss_tot = target.squaredNorm();
  if (ss_tot == 0.0) return kInf;
  if (others.cols() == 0) return 1.0;
  Eigen::JacobiSVD<MatrixXd> svd(others, Eigen::ComputeThinU | Eigen::ComputeThinV);
  svd.setThreshold(linalg::default_rank_tolerance(rows, others.cols()));
  const VectorXd alpha = svd.solve(target);
  const double ss_res = (target - others * alpha).squaredNorm();
  const double r2 = 1.0 - ss_res / ss_tot;
  if (r2 >= 1.0 - std::numeric_limits<double>::epsilon()) return kInf;
  return 1.0 / (1.0 - r2);
}

void check_index(const MatrixXd& features, Index index) {
  if (index < 0 || index >= features.cols())
    throw Error(ErrorCode::DimensionMismatch, "VIF column index " + std::to_string(index) + " out of range");
}

}  // namespace

double vif_single(const MatrixXd& features, Index index) {
  check_index(features, index);
  const MatrixXd w = centred(features);
  return vif_from_regression(without_column(w, index), w.col(index), w.rows());
}

std::vector<double> vif_all_serial(const MatrixXd& features) {
  std::vector<double> out(static_cast<size_t>(features.cols()));
  for (Index i = 0; i < features.cols(); ++i) out[static_cast<size_t>(i)] = vif_single(features, i);
  return out;
}

std::vector<double> vif_all(const MatrixXd& features) {
  const Index k = features.cols();
  std::vector<double> out(static_cast<size_t>(k));
  if (k == 0) return out;
  const MatrixXd r = linalg::reduce_tall(centred(features), MatrixXd(features.rows(), 0)).r;
#pragma omp parallel for schedule(dynamic)
  for (Index i = 0; i < k; ++i)
    out[static_cast<size_t>(i)] = vif_from_regression(without_column(r, i), r.col(i), features.rows());
  return out;
}

VifSelectionReport select_features(const MatrixXd& features, std::span<const std::string> names,
                                   VifThresholds thresholds) {
  if (static_cast<Index>(names.size()) != features.cols())
    throw Error(ErrorCode::DimensionMismatch, "feature names do not match matrix columns");
  if (thresholds.accept_below > thresholds.remove_above)
    throw Error(ErrorCode::InvalidConfig, "accept_below must not exceed remove_above");

  VifSelectionReport report;
  report.thresholds = thresholds;
  std::vector<std::string> current(names.begin(), names.end());
  MatrixXd w = features;

  while (true) {
    const auto vifs = vif_all(w);
    size_t worst = 0;
    for (size_t i = 1; i < vifs.size(); ++i)
      if (vifs[i] > vifs[worst]) worst = i;

    if (vifs.empty() || vifs[worst] < thresholds.accept_below) {
      report.surviving_features = current;
      report.final_vifs = vifs;
      report.final_rank = w.cols() == 0 ? 0 : linalg::matrix_rank(centred(w));
      return report;
    }
    if (current.size() == 1)
      throw Error(ErrorCode::EmptySurvivorSet, "removing '" + current.front() + "' would leave no features");

    VifIteration it;
    it.iteration_index = static_cast<int>(report.iterations.size()) + 1;
    it.vif_values = vifs;
    it.feature_names = current;
    it.column_count = w.cols();
    // Rank is a sanity indicator only; it never halts elimination.
    it.matrix_rank = linalg::matrix_rank(centred(w));
    it.excluded_feature = current[worst];
    report.iterations.push_back(std::move(it));

    w = without_column(w, static_cast<Index>(worst));
    current.erase(current.begin() + static_cast<std::ptrdiff_t>(worst));
  }
}

namespace {

nlohmann::json vif_json(double v) {
  if (std::isinf(v)) return "Infinity";
  return v;
}

}  // namespace

nlohmann::json to_json(const VifSelectionReport& r) {
  nlohmann::json j;
  j["thresholds"] = {{"remove_above", r.thresholds.remove_above}, {"accept_below", r.thresholds.accept_below}};
  j["iterations"] = nlohmann::json::array();
  for (const auto& it : r.iterations) {
    nlohmann::json vifs = nlohmann::json::object();
    for (size_t i = 0; i < it.feature_names.size(); ++i) vifs[it.feature_names[i]] = vif_json(it.vif_values[i]);
    j["iterations"].push_back({{"iteration", it.iteration_index},
                               {"excluded_feature", it.excluded_feature.value_or("")},
                               {"data_features", it.column_count},
                               {"matrix_rank", it.matrix_rank},
                               {"vif", vifs}});
  }
  nlohmann::json final_vifs = nlohmann::json::object();
  for (size_t i = 0; i < r.surviving_features.size(); ++i)
    final_vifs[r.surviving_features[i]] = vif_json(r.final_vifs[i]);
  j["surviving_features"] = r.surviving_features;
  j["final_vif"] = final_vifs;
  j["final_rank"] = r.final_rank;
  return j;
}

}  // namespace omm
