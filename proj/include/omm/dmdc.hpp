#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "omm/dataset.hpp"

namespace omm {

// Column t of y_t/u_t is paired with column t of y_t1 (the next sample).
// Pairs never straddle two experiments.
struct SnapshotSet {
  Eigen::MatrixXd y_t;   // q x N
  Eigen::MatrixXd y_t1;  // q x N
  Eigen::MatrixXd u_t;   // p x N
  std::vector<std::string> observable_names;
  std::vector<std::string> input_names;

  Eigen::Index pair_count() const { return y_t.cols(); }
};

SnapshotSet build_snapshots(std::span<const TimeSeriesDataset> datasets, std::span<const std::string> inputs,
                            std::span<const std::string> observables);

// Discrete LTI surrogate y[t+1] = A y[t] + B u[t], in standardized
// coordinates. The output map is the identity and there is no feed-through
// term; neither is stored.
struct StateSpaceModel {
  Eigen::MatrixXd a;  // q x q
  Eigen::MatrixXd b;  // q x p
  std::vector<std::string> observable_names;
  std::vector<std::string> input_names;
  StandardizationParams input_standardizer;
  StandardizationParams observable_standardizer;
  double sample_rate_hz = 0.0;
  Eigen::Index svd_rank_used = 0;
  Eigen::VectorXd singular_values;  // of the stacked snapshot matrix

  Eigen::Index q() const { return a.rows(); }
  Eigen::Index p() const { return b.cols(); }
  bool rank_deficient() const { return svd_rank_used < q() + p(); }
};

struct FitOptions {
  // Keep at most this many singular values. Default: full numerical rank.
  std::optional<Eigen::Index> rank;
  // Relative singular-value cutoff; default eps * max(rows, cols).
  std::optional<double> rel_tol;
};

// Solves [A | B] = Y_t1 * pinv([Y_t; U_t]). The stacked matrix is reduced
// by a blocked parallel QR of its transpose and the SVD is taken of the
// small R factor, so Omega is never materialized.
StateSpaceModel fit(const SnapshotSet& snapshots, const FitOptions& options = {});

// Same operators from an explicit thin SVD of the stacked matrix, applied
// literally: A = Y_t1 zeta Sigma^-1 eta_Y^*, B = Y_t1 zeta Sigma^-1 eta_U^*.
StateSpaceModel fit_reference(const SnapshotSet& snapshots, const FitOptions& options = {});

// Self-fed simulation: returns q x T predictions y[1..T] from y0 and inputs
// u[0..T-1] (p x T). Never re-anchored to measurements.
Eigen::MatrixXd rollout(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, const Eigen::VectorXd& y0,
                        const Eigen::MatrixXd& inputs);
Eigen::MatrixXd rollout(const StateSpaceModel& model, const Eigen::VectorXd& y0, const Eigen::MatrixXd& inputs);

// Measurement-anchored one-step predictions: column t is A y[t] + B u[t].
Eigen::MatrixXd one_step(const StateSpaceModel& model, const Eigen::MatrixXd& measured,
                         const Eigen::MatrixXd& inputs);

struct ModelOptions {
  bool standardize_inputs = true;
  bool standardize_observables = true;
  FitOptions fit;
};

// Fits standardizers on the pooled datasets, standardizes, builds
// snapshots and fits. The standardizers travel inside the model.
StateSpaceModel train(std::span<const TimeSeriesDataset> datasets, std::span<const std::string> inputs,
                      std::span<const std::string> observables, const ModelOptions& options = {});

// Original-unit prediction for a whole experiment: standardize, roll out from
// the measured first row, invert. Returns q x (rows - 1) for rows 1..end.
Eigen::MatrixXd predict_experiment(const StateSpaceModel& model, const TimeSeriesDataset& ds,
                                   bool one_step_mode = false);

// Original-unit rollout from a raw initial state and raw inputs (p x T).
Eigen::MatrixXd predict(const StateSpaceModel& model, const Eigen::VectorXd& y0_raw,
                        const Eigen::MatrixXd& inputs_raw);

inline constexpr int kModelFormatVersion = 1;

nlohmann::json to_json(const StateSpaceModel& m);
StateSpaceModel model_from_json(const nlohmann::json& j);
void save_model(const StateSpaceModel& m, const std::filesystem::path& path);
StateSpaceModel load_model(const std::filesystem::path& path);

}  // namespace omm
