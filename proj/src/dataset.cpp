#include "omm/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

namespace omm {

namespace fs = std::filesystem;
using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

constexpr std::string_view kTimeColumn = "time_s";

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  size_t start = 0;
  while (true) {
    const size_t comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      out.push_back(trim(line.substr(start)));
      break;
    }
    out.push_back(trim(line.substr(start, comma - start)));
    start = comma + 1;
  }
  return out;
}

bool is_missing_token(std::string_view s) {
  return s.empty() || s == "nan" || s == "NaN" || s == "NAN" || s == "NA" || s == "-nan";
}

// NaN for missing fields; throws MalformedNumber otherwise.
double parse_field(std::string_view s, size_t line_no, const fs::path& path) {
  if (is_missing_token(s)) return std::numeric_limits<double>::quiet_NaN();
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size()) {
    throw Error(ErrorCode::MalformedNumber, path.string() + " line " + std::to_string(line_no) +
                                                ": '" + std::string(s) + "'");
  }
  return v;
}

nlohmann::json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::CorruptFile, path.string() + ": " + e.what());
  }
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  out << text;
}

}  // namespace

std::string format_double(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

std::optional<Index> TimeSeriesDataset::find(std::string_view name) const {
  for (size_t i = 0; i < channels.size(); ++i)
    if (channels[i].name == name) return static_cast<Index>(i);
  return std::nullopt;
}

Index TimeSeriesDataset::index_of(std::string_view name) const {
  if (auto i = find(name)) return *i;
  throw Error(ErrorCode::UnknownChannel, std::string(name) + " not in dataset '" + experiment_id + "'");
}

std::vector<std::string> TimeSeriesDataset::names() const {
  std::vector<std::string> out;
  for (const auto& c : channels) out.push_back(c.name);
  return out;
}

std::vector<std::string> TimeSeriesDataset::names_of_kind(ChannelKind kind) const {
  std::vector<std::string> out;
  for (const auto& c : channels)
    if (c.kind == kind) out.push_back(c.name);
  return out;
}

MatrixXd TimeSeriesDataset::columns(std::span<const std::string> names) const {
  MatrixXd out(data.rows(), static_cast<Index>(names.size()));
  for (size_t j = 0; j < names.size(); ++j) out.col(static_cast<Index>(j)) = data.col(index_of(names[j]));
  return out;
}

TimeSeriesDataset TimeSeriesDataset::select(std::span<const std::string> names) const {
  TimeSeriesDataset out;
  out.experiment_id = experiment_id;
  out.sample_rate_hz = sample_rate_hz;
  for (const auto& n : names) out.channels.push_back(channels[static_cast<size_t>(index_of(n))]);
  out.data = columns(names);
  return out;
}

Ingested ingest_csv(const fs::path& path, std::span<const ChannelSpec> schema,
                    const IngestOptions& options) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());

  std::string line;
  size_t line_no = 0;
  // Skip provenance comments written by write_csv.
  while (std::getline(in, line)) {
    ++line_no;
    if (!trim(line).empty() && line.front() != '#') break;
  }
  if (trim(line).empty() || line.front() == '#')
    throw Error(ErrorCode::CorruptFile, path.string() + ": missing header row");

  std::vector<std::string> header;
  for (auto f : split_fields(line)) header.emplace_back(f);

  std::set<std::string> seen;
  for (const auto& c : schema) {
    if (!seen.insert(c.name).second)
      throw Error(ErrorCode::InvalidConfig, "duplicate channel name '" + c.name + "' in schema");
  }

  std::vector<size_t> source_col;
  for (const auto& c : schema) {
    auto it = std::find(header.begin(), header.end(), c.name);
    if (it == header.end()) throw Error(ErrorCode::MissingColumn, c.name + " in " + path.string());
    source_col.push_back(static_cast<size_t>(it - header.begin()));
  }
  std::optional<size_t> time_col;
  if (auto it = std::find(header.begin(), header.end(), kTimeColumn); it != header.end())
    time_col = static_cast<size_t>(it - header.begin());

  std::vector<std::vector<double>> rows;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty() || line.front() == '#') continue;
    auto fields = split_fields(line);
    if (fields.size() != header.size()) {
      throw Error(ErrorCode::CorruptFile, path.string() + " line " + std::to_string(line_no) + ": expected " +
                                              std::to_string(header.size()) + " fields, got " +
                                              std::to_string(fields.size()));
    }
    std::vector<double> row;
    row.reserve(schema.size() + 1);
    for (size_t src : source_col) row.push_back(parse_field(fields[src], line_no, path));
    if (time_col) row.push_back(parse_field(fields[*time_col], line_no, path));
    rows.push_back(std::move(row));
  }

  Ingested result;
  result.report.had_time_column = time_col.has_value();
  auto& ds = result.dataset;
  ds.experiment_id = options.experiment_id.empty() ? path.stem().string() : options.experiment_id;
  ds.sample_rate_hz = options.sample_rate_hz;

  const size_t n = rows.size();
  if (time_col) {
    const size_t t = schema.size();
    if (ds.sample_rate_hz <= 0.0) {
      if (n < 2) throw Error(ErrorCode::InvalidConfig, "cannot infer sample rate from " + path.string());
      ds.sample_rate_hz = 1.0 / (rows[1][t] - rows[0][t]);
    }
    const double dt = 1.0 / ds.sample_rate_hz;
    for (size_t i = 1; i < n; ++i) {
      const double step = rows[i][t] - rows[i - 1][t];
      if (!(std::abs(step - dt) <= 0.01 * dt)) {
        throw Error(ErrorCode::NonUniformTimestamps, path.string() + " row " + std::to_string(i) + ": step " +
                                                         format_double(step) + " s vs expected " +
                                                         format_double(dt) + " s");
      }
    }
  }
  if (!(ds.sample_rate_hz > 0.0))
    throw Error(ErrorCode::InvalidConfig, "sample rate unknown for " + path.string());

  std::vector<size_t> kept;
  for (size_t j = 0; j < schema.size(); ++j) {
    size_t missing = 0;
    std::optional<size_t> first_missing;
    for (size_t i = 0; i < n; ++i) {
      if (std::isnan(rows[i][j])) {
        ++missing;
        if (!first_missing) first_missing = i;
      }
    }
    if (n > 0 && missing == n) {
      result.report.excluded.push_back(schema[j].name);
      result.report.warnings.push_back("column '" + schema[j].name + "' is entirely missing and was excluded");
      continue;
    }
    if (missing > 0) {
      throw Error(ErrorCode::NaNInRetainedColumn,
                  schema[j].name + " row " + std::to_string(*first_missing) + " in " + path.string());
    }
    kept.push_back(j);
  }

  ds.data.resize(static_cast<Index>(n), static_cast<Index>(kept.size()));
  for (size_t k = 0; k < kept.size(); ++k) {
    ds.channels.push_back(schema[kept[k]]);
    for (size_t i = 0; i < n; ++i) ds.data(static_cast<Index>(i), static_cast<Index>(k)) = rows[i][kept[k]];
  }
  return result;
}

void write_csv(const TimeSeriesDataset& ds, const fs::path& path, const std::string& comment) {
  std::string text;
  if (!comment.empty()) text += "# " + comment + "\n";
  text += kTimeColumn;
  for (const auto& c : ds.channels) text += "," + c.name;
  text += "\n";
  for (Index i = 0; i < ds.data.rows(); ++i) {
    text += format_double(static_cast<double>(i) / ds.sample_rate_hz);
    for (Index j = 0; j < ds.data.cols(); ++j) {
      text += ',';
      text += format_double(ds.data(i, j));
    }
    text += '\n';
  }
  write_text(path, text);
}

StandardizationParams fit_standardizer(const TimeSeriesDataset& ds, std::span<const std::string> channels) {
  return fit_standardizer(std::span<const TimeSeriesDataset>(&ds, 1), channels);
}

StandardizationParams fit_standardizer(std::span<const TimeSeriesDataset> datasets,
                                       std::span<const std::string> channels) {
  if (channels.empty()) throw Error(ErrorCode::InvalidConfig, "empty channel subset for standardizer");
  if (datasets.empty()) throw Error(ErrorCode::EmptySample, "no datasets to fit standardizer on");
  StandardizationParams p;
  p.names.assign(channels.begin(), channels.end());
  const auto k = static_cast<Index>(channels.size());
  p.mean = VectorXd::Zero(k);
  p.scale = VectorXd::Ones(k);

  Index total = 0;
  for (const auto& ds : datasets) total += ds.row_count();
  if (total == 0) throw Error(ErrorCode::EmptySample, "standardizer fit on zero rows");

  for (Index j = 0; j < k; ++j) {
    const auto& name = p.names[static_cast<size_t>(j)];
    double sum = 0.0;
    for (const auto& ds : datasets) sum += ds.data.col(ds.index_of(name)).sum();
    const double mean = sum / static_cast<double>(total);
    double ss = 0.0;
    for (const auto& ds : datasets) ss += (ds.data.col(ds.index_of(name)).array() - mean).square().sum();
    const double sd = std::sqrt(ss / static_cast<double>(total));
    p.mean(j) = mean;
    if (sd > 0.0) {
      p.scale(j) = sd;
    } else {
      p.constant_channels.push_back(name);
    }
  }
  return p;
}

MatrixXd standardize_columns(const MatrixXd& x, const StandardizationParams& p) {
  return (x.rowwise() - p.mean.transpose()).array().rowwise() / p.scale.transpose().array();
}

MatrixXd standardize_rows(const MatrixXd& x, const StandardizationParams& p) {
  return (x.colwise() - p.mean).array().colwise() / p.scale.array();
}

MatrixXd unstandardize_rows(const MatrixXd& x, const StandardizationParams& p) {
  return (x.array().colwise() * p.scale.array()).colwise() + p.mean.array();
}

namespace {

template <typename F>
TimeSeriesDataset transform_channels(const TimeSeriesDataset& ds, const StandardizationParams& p, F f) {
  TimeSeriesDataset out = ds;
  for (size_t j = 0; j < p.names.size(); ++j) {
    const Index c = ds.index_of(p.names[j]);
    out.data.col(c) = f(ds.data.col(c).array(), p.mean(static_cast<Index>(j)), p.scale(static_cast<Index>(j)));
  }
  return out;
}

}  // namespace

TimeSeriesDataset apply_standardizer(const TimeSeriesDataset& ds, const StandardizationParams& p) {
  return transform_channels(ds, p, [](const auto& x, double m, double s) { return ((x - m) / s).matrix(); });
}

TimeSeriesDataset invert_standardizer(const TimeSeriesDataset& ds, const StandardizationParams& p) {
  return transform_channels(ds, p, [](const auto& x, double m, double s) { return (x * s + m).matrix(); });
}

TimeSeriesDataset impute_off_state(const TimeSeriesDataset& ds, std::string_view channel, double sentinel,
                                   std::string_view gate_channel) {
  const Index c = ds.index_of(channel);
  const Index g = ds.index_of(gate_channel);
  TimeSeriesDataset out = ds;
  auto values = out.data.col(c);
  const auto gate = ds.data.col(g);
  const Index n = ds.row_count();

  auto needs_fill = [&](Index i) { return gate(i) > 0.0 && ds.data(i, c) == sentinel; };

  Index i = 0;
  while (i < n) {
    if (!needs_fill(i)) {
      ++i;
      continue;
    }
    Index end = i;
    while (end + 1 < n && needs_fill(end + 1)) ++end;

    // Anchors are the nearest non-sentinel samples on either side; ungated
    // sentinels are not valid measurements either.
    Index left = i - 1;
    while (left >= 0 && ds.data(left, c) == sentinel) --left;
    Index right = end + 1;
    while (right < n && ds.data(right, c) == sentinel) ++right;

    const bool has_left = left >= 0;
    const bool has_right = right < n;
    if (!has_left && !has_right) {
      throw Error(ErrorCode::AllSentinel,
                  std::string(channel) + " has no valid anchor around gated row " + std::to_string(i));
    }
    for (Index k = i; k <= end; ++k) {
      if (has_left && has_right) {
        const double w = static_cast<double>(k - left) / static_cast<double>(right - left);
        values(k) = ds.data(left, c) + w * (ds.data(right, c) - ds.data(left, c));
      } else {
        values(k) = has_left ? ds.data(left, c) : ds.data(right, c);
      }
    }
    i = end + 1;
  }
  return out;
}

TimeSeriesDataset decimate(const TimeSeriesDataset& ds, int factor) {
  if (factor < 1) throw Error(ErrorCode::InvalidConfig, "decimation factor must be >= 1");
  TimeSeriesDataset out;
  out.experiment_id = ds.experiment_id;
  out.channels = ds.channels;
  out.sample_rate_hz = ds.sample_rate_hz / factor;
  const Index n = ds.row_count();
  const Index kept = (n + factor - 1) / factor;
  out.data.resize(kept, ds.data.cols());
  for (Index i = 0; i < kept; ++i) out.data.row(i) = ds.data.row(i * factor);
  return out;
}

std::vector<std::string> zero_variance_channels(std::span<const TimeSeriesDataset> datasets,
                                                std::span<const std::string> candidates) {
  std::vector<std::string> out;
  for (const auto& name : candidates) {
    std::optional<double> first;
    bool constant = true;
    for (const auto& ds : datasets) {
      const auto col = ds.data.col(ds.index_of(name));
      for (Index i = 0; i < col.size() && constant; ++i) {
        if (!first) first = col(i);
        constant = col(i) == *first;
      }
    }
    if (constant) out.push_back(name);
  }
  return out;
}

ExperimentManifest ExperimentManifest::load(const fs::path& path) {
  const auto j = read_json(path);
  ExperimentManifest m;
  m.base_dir = path.parent_path();
  std::set<std::string> ids;
  try {
    for (const auto& e : j.at("experiments")) {
      ManifestEntry entry{e.at("id").get<std::string>(), e.at("path").get<std::string>(),
                          e.at("sample_rate_hz").get<double>()};
      if (!ids.insert(entry.experiment_id).second)
        throw Error(ErrorCode::InvalidConfig, "duplicate experiment id '" + entry.experiment_id + "'");
      if (!fs::exists(m.resolve(entry)))
        throw Error(ErrorCode::InvalidConfig, "manifest references missing file " + m.resolve(entry).string());
      m.entries.push_back(std::move(entry));
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::InvalidConfig, path.string() + ": " + e.what());
  }
  return m;
}

void ExperimentManifest::save(const fs::path& path) const {
  nlohmann::json j;
  j["experiments"] = nlohmann::json::array();
  for (const auto& e : entries)
    j["experiments"].push_back({{"id", e.experiment_id}, {"path", e.path.generic_string()},
                                {"sample_rate_hz", e.sample_rate_hz}});
  write_text(path, j.dump(2) + "\n");
}

nlohmann::json to_json(const ChannelSpec& c) {
  return {{"name", c.name}, {"unit", c.unit}, {"kind", c.kind == ChannelKind::Input ? "input" : "observable"}};
}

ChannelSpec channel_from_json(const nlohmann::json& j) {
  ChannelSpec c;
  c.name = j.at("name").get<std::string>();
  c.unit = j.value("unit", "");
  const auto kind = j.at("kind").get<std::string>();
  if (kind == "input") {
    c.kind = ChannelKind::Input;
  } else if (kind == "observable") {
    c.kind = ChannelKind::Observable;
  } else {
    throw Error(ErrorCode::InvalidConfig, "channel '" + c.name + "' has unknown kind '" + kind + "'");
  }
  return c;
}

std::vector<ChannelSpec> load_schema(const fs::path& path) {
  const auto j = read_json(path);
  std::vector<ChannelSpec> out;
  try {
    for (const auto& c : j.at("channels")) out.push_back(channel_from_json(c));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::InvalidConfig, path.string() + ": " + e.what());
  }
  return out;
}

void save_schema(std::span<const ChannelSpec> schema, const fs::path& path) {
  nlohmann::json j;
  j["channels"] = nlohmann::json::array();
  for (const auto& c : schema) j["channels"].push_back(to_json(c));
  write_text(path, j.dump(2) + "\n");
}

std::vector<Ingested> load_experiments(const ExperimentManifest& manifest, std::span<const ChannelSpec> schema) {
  std::vector<Ingested> out;
  for (const auto& e : manifest.entries)
    out.push_back(ingest_csv(manifest.resolve(e), schema, {e.experiment_id, e.sample_rate_hz}));
  return out;
}

nlohmann::json to_json(const StandardizationParams& p) {
  nlohmann::json j;
  j["names"] = p.names;
  j["mean"] = std::vector<double>(p.mean.begin(), p.mean.end());
  j["scale"] = std::vector<double>(p.scale.begin(), p.scale.end());
  j["constant_channels"] = p.constant_channels;
  return j;
}

StandardizationParams standardizer_from_json(const nlohmann::json& j) {
  StandardizationParams p;
  p.names = j.at("names").get<std::vector<std::string>>();
  const auto mean = j.at("mean").get<std::vector<double>>();
  const auto scale = j.at("scale").get<std::vector<double>>();
  if (mean.size() != p.names.size() || scale.size() != p.names.size())
    throw Error(ErrorCode::CorruptFile, "standardizer arrays do not match channel count");
  p.mean = Eigen::Map<const VectorXd>(mean.data(), static_cast<Index>(mean.size()));
  p.scale = Eigen::Map<const VectorXd>(scale.data(), static_cast<Index>(scale.size()));
  p.constant_channels = j.value("constant_channels", std::vector<std::string>{});
  return p;
}

nlohmann::json to_json(const IngestReport& r) {
  return {{"excluded", r.excluded}, {"warnings", r.warnings}, {"had_time_column", r.had_time_column}};
}

}  // namespace omm
