#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

namespace omm {

struct VifIteration {
  int iteration_index = 0;                 // 1-based
  std::vector<double> vif_values;          // aligned with feature_names; +inf allowed
  std::vector<std::string> feature_names;  // features present at this iteration
  std::optional<std::string> excluded_feature;
  Eigen::Index matrix_rank = 0;
  Eigen::Index column_count = 0;
};

struct VifThresholds {
  double remove_above = 10.0;
  double accept_below = 5.0;
};

struct VifSelectionReport {
  std::vector<VifIteration> iterations;  // one per removal
  std::vector<std::string> surviving_features;
  std::vector<double> final_vifs;
  Eigen::Index final_rank = 0;
  VifThresholds thresholds;
};

// VIF of column `index`: regress it on the remaining columns by SVD
// pseudoinverse, return 1 / (1 - R^2). Columns are centred internally.
// Perfect collinearity (R^2 >= 1 - eps) and a constant column give +inf.
double vif_single(const Eigen::MatrixXd& features, Eigen::Index index);

// All VIFs of one matrix. The parallel kernel works on the R factor of the
// centred matrix, which preserves every regression residual, and fans the
// per-feature solves out across threads.
std::vector<double> vif_all(const Eigen::MatrixXd& features);
// Reference: vif_single on the full matrix for every column, serially.
std::vector<double> vif_all_serial(const Eigen::MatrixXd& features);

// Iterative elimination. While any VIF >= accept_below, the feature with the
// largest VIF is dropped (earliest column on ties). remove_above only labels
// the report; see README for why the band [accept_below, remove_above] is
// not a stopping region. Throws EmptySurvivorSet if the last feature would go.
VifSelectionReport select_features(const Eigen::MatrixXd& features, std::span<const std::string> names,
                                   VifThresholds thresholds = {});

nlohmann::json to_json(const VifSelectionReport& r);

}  // namespace omm
