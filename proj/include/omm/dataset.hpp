#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "omm/error.hpp"

namespace omm {

enum class ChannelKind { Input, Observable };

struct ChannelSpec {
  std::string name;
  std::string unit;
  ChannelKind kind = ChannelKind::Input;

  bool operator==(const ChannelSpec&) const = default;
};

// One experiment's record. Rows are uniformly spaced samples at
// sample_rate_hz, columns follow `channels`.
struct TimeSeriesDataset {
  std::string experiment_id;
  double sample_rate_hz = 0.0;
  std::vector<ChannelSpec> channels;
  Eigen::MatrixXd data;

  Eigen::Index row_count() const { return data.rows(); }
  std::optional<Eigen::Index> find(std::string_view name) const;
  // Throws UnknownChannel.
  Eigen::Index index_of(std::string_view name) const;
  Eigen::VectorXd column(std::string_view name) const { return data.col(index_of(name)); }
  std::vector<std::string> names() const;
  std::vector<std::string> names_of_kind(ChannelKind kind) const;
  // Columns `names` in the given order, as a rows x names.size() matrix.
  Eigen::MatrixXd columns(std::span<const std::string> names) const;
  TimeSeriesDataset select(std::span<const std::string> names) const;
};

struct IngestOptions {
  std::string experiment_id;
  // Required unless the file has a time_s column, in which case 0 means
  // "infer from the first time step".
  double sample_rate_hz = 0.0;
};

struct IngestReport {
  std::vector<std::string> excluded;  // wholly missing columns
  std::vector<std::string> warnings;
  bool had_time_column = false;
};

struct Ingested {
  TimeSeriesDataset dataset;
  IngestReport report;
};

Ingested ingest_csv(const std::filesystem::path& path, std::span<const ChannelSpec> schema,
                    const IngestOptions& options);

// Writes a leading time_s column followed by every channel. Values are
// written in shortest round-trip form, so write then ingest is lossless.
// `comment`, when non-empty, is emitted as a first line prefixed by "# ".
void write_csv(const TimeSeriesDataset& ds, const std::filesystem::path& path,
               const std::string& comment = {});

struct StandardizationParams {
  std::vector<std::string> names;
  Eigen::VectorXd mean;
  Eigen::VectorXd scale;
  std::vector<std::string> constant_channels;  // received scale = 1

  bool operator==(const StandardizationParams& o) const {
    return names == o.names && mean == o.mean && scale == o.scale;
  }
};

StandardizationParams fit_standardizer(const TimeSeriesDataset& ds,
                                       std::span<const std::string> channels);
// Pooled over several datasets (a training fold).
StandardizationParams fit_standardizer(std::span<const TimeSeriesDataset> datasets,
                                       std::span<const std::string> channels);

TimeSeriesDataset apply_standardizer(const TimeSeriesDataset& ds, const StandardizationParams& p);
TimeSeriesDataset invert_standardizer(const TimeSeriesDataset& ds, const StandardizationParams& p);

// Matrix forms. Columns (or rows, for the *_rows variants) follow p.names.
Eigen::MatrixXd standardize_columns(const Eigen::MatrixXd& x, const StandardizationParams& p);
Eigen::MatrixXd unstandardize_rows(const Eigen::MatrixXd& x, const StandardizationParams& p);
Eigen::MatrixXd standardize_rows(const Eigen::MatrixXd& x, const StandardizationParams& p);

// Replaces runs of `sentinel` in `channel` on rows where gate_channel > 0 by
// linear interpolation between the nearest non-sentinel samples around the
// run. Runs with a valid value on one side only are held at that value.
TimeSeriesDataset impute_off_state(const TimeSeriesDataset& ds, std::string_view channel,
                                   double sentinel, std::string_view gate_channel);

// Keeps rows 0, factor, 2*factor, ...; no anti-alias filtering.
TimeSeriesDataset decimate(const TimeSeriesDataset& ds, int factor);

// Channels among `candidates` whose values are exactly constant.
std::vector<std::string> zero_variance_channels(std::span<const TimeSeriesDataset> datasets,
                                                std::span<const std::string> candidates);

struct ManifestEntry {
  std::string experiment_id;
  std::filesystem::path path;  // relative to the manifest's directory
  double sample_rate_hz = 0.0;
};

struct ExperimentManifest {
  std::vector<ManifestEntry> entries;
  std::filesystem::path base_dir;

  static ExperimentManifest load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;
  std::filesystem::path resolve(const ManifestEntry& e) const { return base_dir / e.path; }
};

std::vector<ChannelSpec> load_schema(const std::filesystem::path& path);
void save_schema(std::span<const ChannelSpec> schema, const std::filesystem::path& path);

std::vector<Ingested> load_experiments(const ExperimentManifest& manifest,
                                       std::span<const ChannelSpec> schema);

nlohmann::json to_json(const ChannelSpec& c);
ChannelSpec channel_from_json(const nlohmann::json& j);
nlohmann::json to_json(const StandardizationParams& p);
StandardizationParams standardizer_from_json(const nlohmann::json& j);
nlohmann::json to_json(const IngestReport& r);

std::string format_double(double v);

}  // namespace omm
