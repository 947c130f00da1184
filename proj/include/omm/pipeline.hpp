#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "omm/dataset.hpp"
#include "omm/dmdc.hpp"
#include "omm/feature_selection.hpp"
#include "omm/spectral.hpp"
#include "omm/validation.hpp"

namespace omm {

struct ImputeDirective {
  std::string channel;
  double sentinel = -1.0;
  std::string gate;
};

struct SpectrogramConfig {
  std::string observable;  // empty: first observable
  std::string power_channel = "power_w";
  SpectrogramGrid grid;
};

struct BenchConfig {
  Eigen::Index points = 1'000'000;
  Eigen::Index q = 3;
  Eigen::Index p = 21;
  double fit_target_us = 25.0;
  double rollout_target_us = 150.0;
};

// One run-configuration file drives every subcommand. Relative paths are
// resolved against the directory of the file they were read from.
struct RunConfig {
  std::filesystem::path manifest;
  std::filesystem::path schema;
  std::filesystem::path output_dir = "omm_out";
  std::uint64_t seed = 0;
  bool vif_enabled = true;
  VifThresholds vif;
  size_t p = 3;
  size_t repeats = 10;
  EvalMode eval_mode = EvalMode::Rollout;
  bool standardize_observables = true;
  bool compare_standardization = false;
  std::vector<ImputeDirective> impute;
  std::vector<int> decimation_factors;
  SpectrogramConfig spectrogram;
  std::string predict_experiment;  // empty: first manifest entry
  size_t histogram_bins = 30;
  BenchConfig bench;
};

RunConfig run_config_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir);
RunConfig load_run_config(const std::filesystem::path& path);
nlohmann::json to_json(const RunConfig& c);

// Paths exist, thresholds and counts are sane, p < experiment count. Throws
// InvalidConfig before any data is touched.
void validate(const RunConfig& c);

// FNV-1a over the canonical JSON of every field that affects results (the
// output directory is excluded), as 16 hex digits.
std::string config_hash(const RunConfig& c);

struct Provenance {
  std::string config_hash;
  std::uint64_t seed = 0;

  static Provenance of(const RunConfig& c) { return {omm::config_hash(c), c.seed}; }
  std::string comment() const;  // for CSV header lines
  nlohmann::json as_json() const;
};

// Output of ingest + imputation + constant-channel removal.
struct PreparedData {
  std::vector<TimeSeriesDataset> datasets;
  std::vector<std::string> inputs;  // candidates for feature selection
  std::vector<std::string> observables;
  std::vector<IngestReport> reports;
  std::vector<std::string> zero_variance;  // dropped input channels
  std::vector<std::string> imputed;        // "channel: n samples" per directive
};

PreparedData prepare(const RunConfig& c);

// Pools every experiment and runs VIF elimination over the input channels.
// With selection disabled the report lists all inputs as survivors.
VifSelectionReport select_inputs(const PreparedData& data, const RunConfig& c);

CvConfig cv_config(const RunConfig& c, std::vector<std::string> inputs, std::vector<std::string> observables);

struct SpectrogramPair {
  Spectrogram experiment;
  Spectrogram model;
  double similarity = 0.0;
};

// Pulse-length spectrograms of the measured observable and of the model's
// rollout over the same pulses, pooled across experiments.
SpectrogramPair spectrogram_pair(const StateSpaceModel& model, std::span<const TimeSeriesDataset> datasets,
                                 const RunConfig& c);

// Artifact writers. Every file starts with provenance.
void write_json(const nlohmann::json& j, const std::filesystem::path& path, const Provenance& prov);
void write_bounded_csv(const BoundedPrediction& b, double sample_rate_hz, const std::filesystem::path& path,
                       const Provenance& prov);
void write_parity_csv(const std::vector<std::string>& observables, const Eigen::MatrixXd& actual,
                      const Eigen::MatrixXd& predicted, const std::filesystem::path& path, const Provenance& prov);
void write_histogram_csv(const std::vector<std::string>& observables, const Eigen::MatrixXd& actual,
                         const Eigen::MatrixXd& predicted, size_t bins, const std::filesystem::path& path,
                         const Provenance& prov);
void write_spectrogram_csv(const Spectrogram& s, const std::filesystem::path& path, const Provenance& prov);
void write_geometry_csv(const TimeSeriesDataset& ds, const BoundedPrediction& b, const std::filesystem::path& path,
                        const Provenance& prov);

// Stage runners shared by the pipeline and the single-stage subcommands. Each
// writes its artifacts into `out` as soon as it has them.
PreparedData stage_ingest(const RunConfig& c, const std::filesystem::path& out, const Provenance& prov,
                          bool write_datasets = false);
VifSelectionReport stage_select(const PreparedData& data, const RunConfig& c, const std::filesystem::path& out,
                                const Provenance& prov, bool write_datasets = false);
void stage_dist(const PreparedData& data, const std::vector<std::string>& inputs, const RunConfig& c,
                const std::filesystem::path& out, const Provenance& prov);
CvOutcome stage_cv(const PreparedData& data, const std::vector<std::string>& inputs, const RunConfig& c,
                   const std::filesystem::path& out, const Provenance& prov);
void stage_freq(const PreparedData& data, const std::vector<std::string>& inputs, const RunConfig& c,
                const std::filesystem::path& out, const Provenance& prov);
StateSpaceModel stage_fit(const PreparedData& data, const std::vector<std::string>& inputs, const RunConfig& c,
                          const std::filesystem::path& out, const Provenance& prov);
// The experiment named by predict_experiment, else the first one.
const TimeSeriesDataset& predict_target(const PreparedData& data, const RunConfig& c);
BoundedPrediction stage_predict(const StateSpaceModel& model, const UncertaintyEnvelope& envelope,
                                const TimeSeriesDataset& target, const RunConfig& c,
                                const std::filesystem::path& out, const Provenance& prov);
SpectrogramPair stage_spectrogram(const StateSpaceModel& model, const PreparedData& data, const RunConfig& c,
                                  const std::filesystem::path& out, const Provenance& prov);

std::string fnv1a_hex(std::string_view text);

// Runs ingest, impute, select-features, dist-report, cv, predict,
// spectrogram and geometry in that order, writing artifacts as each stage
// completes. Errors carry the stage name.
void cmd_pipeline(const RunConfig& c);

struct BenchReport {
  Eigen::Index points = 0;
  Eigen::Index q = 0;
  Eigen::Index p = 0;
  double fit_us_per_point = 0.0;
  double rollout_us_per_point = 0.0;
  double fit_target_us = 0.0;
  double rollout_target_us = 0.0;
  double fit_relative_error = 0.0;  // against the generating plant
  std::string hardware;

  bool fit_ok() const { return fit_us_per_point <= fit_target_us; }
  bool rollout_ok() const { return rollout_us_per_point <= rollout_target_us; }
};

BenchReport cmd_bench(const BenchConfig& c, std::uint64_t seed);
std::string hardware_descriptor();
nlohmann::json to_json(const BenchReport& r);

}  // namespace omm
