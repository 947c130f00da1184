#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "omm/dataset.hpp"
#include "omm/dmdc.hpp"
#include "omm/stats.hpp"

namespace omm {

// Coefficient of determination 1 - SS_res / SS_tot. Throws ConstantActual.
double r2(std::span<const double> actual, std::span<const double> predicted);
double rmse(std::span<const double> actual, std::span<const double> predicted);

enum class EvalMode {
  Rollout,  // whole experiment simulated from its first measured state
  OneStep,  // diagnostic: each step anchored to the measured state
};

struct CvConfig {
  std::vector<std::string> inputs;
  std::vector<std::string> observables;
  ModelOptions model;
  EvalMode mode = EvalMode::Rollout;
  size_t p = 3;
  size_t repeats = 10;
  std::uint64_t seed = 0;
  bool parallel = true;  // folds across OpenMP threads; results are identical either way
};

struct FoldResult {
  int fold_index = 0;
  std::vector<std::string> train_ids;
  std::vector<std::string> test_ids;
  // Per observable, in CvConfig::observables order. Original units.
  std::vector<double> r2_train, r2_test, rmse_train, rmse_test;
  Eigen::Index svd_rank_used = 0;
};

struct CvReport {
  std::vector<std::string> observables;
  std::vector<FoldResult> folds;
  std::vector<MeanCi> r2_train, r2_test, rmse_train, rmse_test;  // per observable, across folds
  size_t repeats = 0;
  size_t p = 0;
  std::uint64_t seed = 0;
  EvalMode mode = EvalMode::Rollout;
};

// Prediction +- (rmse + ci95), per observable, from the test side of a CV run.
struct UncertaintyEnvelope {
  std::vector<std::string> observables;
  std::vector<double> rmse;
  std::vector<double> ci95;

  double half_width(size_t i) const { return rmse[i] + ci95[i]; }
};

struct CvOutcome {
  CvReport report;
  UncertaintyEnvelope envelope;
};

// Metrics of `model` over the named experiments, computed on their
// concatenated predictions (rows 1..end of each experiment).
struct FoldMetrics {
  std::vector<double> r2;
  std::vector<double> rmse;
};
FoldMetrics evaluate(const StateSpaceModel& model, std::span<const TimeSeriesDataset> datasets,
                     std::span<const size_t> which, EvalMode mode);

CvOutcome run_lpocv(std::span<const TimeSeriesDataset> datasets, const CvConfig& config);
// Aggregates and envelope from a list of folds (used by run_lpocv).
CvOutcome aggregate_folds(std::vector<FoldResult> folds, const CvConfig& config);

struct Violation {
  Eigen::Index t = 0;
  double measured = 0.0;
  double bound = 0.0;  // the bound that was crossed
};

struct BoundedPrediction {
  std::vector<std::string> observables;
  Eigen::MatrixXd predictions;  // q x T, original units
  Eigen::MatrixXd lower;
  Eigen::MatrixXd upper;
  std::optional<Eigen::MatrixXd> measured;
  std::vector<std::vector<Violation>> violations;  // per observable; empty without ground truth
};

BoundedPrediction bound_predictions(const StateSpaceModel& model, const UncertaintyEnvelope& envelope,
                                    const Eigen::VectorXd& y0_raw, const Eigen::MatrixXd& inputs_raw,
                                    const std::optional<Eigen::MatrixXd>& ground_truth = std::nullopt);

// Applies the envelope to predictions that were already computed.
BoundedPrediction bound(const std::vector<std::string>& observables, const Eigen::MatrixXd& predictions,
                        const UncertaintyEnvelope& envelope,
                        const std::optional<Eigen::MatrixXd>& ground_truth = std::nullopt);

struct Histogram {
  std::vector<double> edges;  // bins + 1
  std::vector<size_t> counts;
  double skewness = 0.0;  // of the residuals
};

// Residuals are actual - predicted. Zero-width residual ranges give one bin.
Histogram residual_histogram(std::span<const double> actual, std::span<const double> predicted, size_t bins);

struct ParityData {
  std::vector<double> actual;
  std::vector<double> predicted;
  // Least-squares line predicted ~ slope * actual + intercept.
  double slope = 1.0;
  double intercept = 0.0;
};

ParityData parity_data(std::span<const double> actual, std::span<const double> predicted);

struct FrequencyRow {
  int factor = 1;
  double hz = 0.0;
  std::vector<MeanCi> r2_test;  // per observable
  std::vector<MeanCi> rmse_test;
};

// Decimate every experiment, then standardize + LpOCV exactly as run_lpocv.
std::vector<FrequencyRow> frequency_study(std::span<const TimeSeriesDataset> datasets, const CvConfig& config,
                                          std::span<const int> factors);

const char* to_string(EvalMode mode);
nlohmann::json to_json(const CvReport& r);
nlohmann::json to_json(const UncertaintyEnvelope& e);
UncertaintyEnvelope envelope_from_json(const nlohmann::json& j);

}  // namespace omm
