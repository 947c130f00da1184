#include "omm/pipeline.hpp"

#include <omp.h>

#include <chrono>
#include <fstream>
#include <iostream>
#include <random>
#include <set>
#include <sstream>

#include "omm/distribution.hpp"
#include "omm/error.hpp"
#include "omm/linalg.hpp"
#include "omm/stats.hpp"
#include "omm/synthetic.hpp"

namespace omm {

namespace fs = std::filesystem;
using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;
using nlohmann::json;

// ---------------------------------------------------------------------------
// Configuration

namespace {

fs::path resolve(const fs::path& base, const std::string& p) {
  if (p.empty()) return {};
  const fs::path path(p);
  return path.is_absolute() ? path : (base / path).lexically_normal();
}

void reject_unknown(const json& j, std::initializer_list<const char*> allowed, const std::string& where) {
  if (!j.is_object()) throw Error(ErrorCode::InvalidConfig, where + " must be an object");
  const std::set<std::string> ok(allowed.begin(), allowed.end());
  for (const auto& [key, value] : j.items())
    if (!ok.count(key)) throw Error(ErrorCode::InvalidConfig, "unknown key '" + key + "' in " + where);
}

EvalMode parse_mode(const std::string& s) {
  if (s == "rollout") return EvalMode::Rollout;
  if (s == "one_step") return EvalMode::OneStep;
  throw Error(ErrorCode::InvalidConfig, "eval_mode must be 'rollout' or 'one_step', got '" + s + "'");
}

}  // namespace

RunConfig run_config_from_json(const json& j, const fs::path& base_dir) {
  RunConfig c;
  try {
    reject_unknown(j,
                   {"manifest", "schema", "output_dir", "seed", "vif", "lpocv", "eval_mode", "standardize_observables",
                    "compare_standardization", "impute", "decimation_factors", "spectrogram", "predict", "bench"},
                   "config");
    c.manifest = resolve(base_dir, j.value("manifest", std::string{}));
    c.schema = resolve(base_dir, j.value("schema", std::string{}));
    if (j.contains("output_dir")) c.output_dir = resolve(base_dir, j["output_dir"].get<std::string>());
    c.seed = j.value("seed", std::uint64_t{0});
    if (j.contains("vif")) {
      const auto& v = j["vif"];
      reject_unknown(v, {"enabled", "remove_above", "accept_below"}, "vif");
      c.vif_enabled = v.value("enabled", true);
      c.vif.remove_above = v.value("remove_above", c.vif.remove_above);
      c.vif.accept_below = v.value("accept_below", c.vif.accept_below);
    }
    if (j.contains("lpocv")) {
      const auto& l = j["lpocv"];
      reject_unknown(l, {"p", "repeats"}, "lpocv");
      c.p = l.value("p", c.p);
      c.repeats = l.value("repeats", c.repeats);
    }
    c.eval_mode = parse_mode(j.value("eval_mode", std::string("rollout")));
    c.standardize_observables = j.value("standardize_observables", true);
    c.compare_standardization = j.value("compare_standardization", false);
    for (const auto& d : j.value("impute", json::array())) {
      reject_unknown(d, {"channel", "sentinel", "gate"}, "impute entry");
      c.impute.push_back({d.at("channel").get<std::string>(), d.value("sentinel", -1.0), d.at("gate").get<std::string>()});
    }
    c.decimation_factors = j.value("decimation_factors", std::vector<int>{});
    if (j.contains("spectrogram")) {
      const auto& s = j["spectrogram"];
      reject_unknown(s, {"observable", "power_channel", "pulse_lengths", "frequencies", "cap_hz"}, "spectrogram");
      c.spectrogram.observable = s.value("observable", std::string{});
      c.spectrogram.power_channel = s.value("power_channel", c.spectrogram.power_channel);
      c.spectrogram.grid.pulse_lengths = s.value("pulse_lengths", c.spectrogram.grid.pulse_lengths);
      c.spectrogram.grid.frequencies = s.value("frequencies", c.spectrogram.grid.frequencies);
      c.spectrogram.grid.cap_hz = s.value("cap_hz", c.spectrogram.grid.cap_hz);
    }
    if (j.contains("predict")) {
      const auto& p = j["predict"];
      reject_unknown(p, {"experiment", "histogram_bins"}, "predict");
      c.predict_experiment = p.value("experiment", std::string{});
      c.histogram_bins = p.value("histogram_bins", c.histogram_bins);
    }
    if (j.contains("bench")) {
      const auto& b = j["bench"];
      reject_unknown(b, {"points", "q", "p", "fit_target_us", "rollout_target_us"}, "bench");
      c.bench.points = b.value("points", c.bench.points);
      c.bench.q = b.value("q", c.bench.q);
      c.bench.p = b.value("p", c.bench.p);
      c.bench.fit_target_us = b.value("fit_target_us", c.bench.fit_target_us);
      c.bench.rollout_target_us = b.value("rollout_target_us", c.bench.rollout_target_us);
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::InvalidConfig, e.what());
  }
  return c;
}

RunConfig load_run_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::InvalidConfig, "cannot open config " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::InvalidConfig, path.string() + ": " + e.what());
  }
  return run_config_from_json(j, path.parent_path());
}

json to_json(const RunConfig& c) {
  json j;
  j["manifest"] = c.manifest.string();
  j["schema"] = c.schema.string();
  j["output_dir"] = c.output_dir.string();
  j["seed"] = c.seed;
  j["vif"] = {{"enabled", c.vif_enabled}, {"remove_above", c.vif.remove_above}, {"accept_below", c.vif.accept_below}};
  j["lpocv"] = {{"p", c.p}, {"repeats", c.repeats}};
  j["eval_mode"] = to_string(c.eval_mode);
  j["standardize_observables"] = c.standardize_observables;
  j["compare_standardization"] = c.compare_standardization;
  j["impute"] = json::array();
  for (const auto& d : c.impute) j["impute"].push_back({{"channel", d.channel}, {"sentinel", d.sentinel}, {"gate", d.gate}});
  j["decimation_factors"] = c.decimation_factors;
  j["spectrogram"] = {{"observable", c.spectrogram.observable},
                      {"power_channel", c.spectrogram.power_channel},
                      {"pulse_lengths", c.spectrogram.grid.pulse_lengths},
                      {"frequencies", c.spectrogram.grid.frequencies},
                      {"cap_hz", c.spectrogram.grid.cap_hz}};
  j["predict"] = {{"experiment", c.predict_experiment}, {"histogram_bins", c.histogram_bins}};
  j["bench"] = {{"points", c.bench.points},
                {"q", c.bench.q},
                {"p", c.bench.p},
                {"fit_target_us", c.bench.fit_target_us},
                {"rollout_target_us", c.bench.rollout_target_us}};
  return j;
}

void validate(const RunConfig& c) {
  auto bad = [](const std::string& m) { throw Error(ErrorCode::InvalidConfig, m); };
  if (c.manifest.empty()) bad("manifest path is required");
  if (c.schema.empty()) bad("schema path is required");
  if (!fs::exists(c.manifest)) bad("manifest not found: " + c.manifest.string());
  if (!fs::exists(c.schema)) bad("schema not found: " + c.schema.string());
  if (c.p == 0) bad("lpocv.p must be at least 1");
  if (c.repeats == 0) bad("lpocv.repeats must be at least 1");
  if (!(c.vif.accept_below > 1.0) || c.vif.accept_below > c.vif.remove_above)
    bad("vif thresholds need 1 < accept_below <= remove_above");
  for (int f : c.decimation_factors)
    if (f < 1) bad("decimation factors must be >= 1");
  if (c.spectrogram.grid.pulse_lengths < 2 || c.spectrogram.grid.frequencies < 2 || !(c.spectrogram.grid.cap_hz > 0.0))
    bad("spectrogram grid needs >= 2 points per axis and cap_hz > 0");
  if (c.histogram_bins == 0) bad("predict.histogram_bins must be positive");
  ExperimentManifest manifest;
  try {
    manifest = ExperimentManifest::load(c.manifest);
  } catch (const Error& e) {
    throw Error(ErrorCode::InvalidConfig, "manifest: " + e.detail());
  }
  if (c.p >= manifest.entries.size()) {
    bad("lpocv.p = " + std::to_string(c.p) + " needs more than " + std::to_string(manifest.entries.size()) +
        " experiments");
  }
  if (!c.predict_experiment.empty()) {
    bool found = false;
    for (const auto& e : manifest.entries) found = found || e.experiment_id == c.predict_experiment;
    if (!found) bad("predict.experiment '" + c.predict_experiment + "' is not in the manifest");
  }
}

std::string config_hash(const RunConfig& c) {
  json j = to_json(c);
  j.erase("output_dir");
  return fnv1a_hex(j.dump());
}

std::string fnv1a_hex(std::string_view text) {
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 1099511628211ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string Provenance::comment() const {
  return "omm config_hash=" + config_hash + " seed=" + std::to_string(seed);
}

json Provenance::as_json() const { return {{"config_hash", config_hash}, {"seed", seed}}; }

// ---------------------------------------------------------------------------
// Stages

PreparedData prepare(const RunConfig& c) {
  const auto manifest = ExperimentManifest::load(c.manifest);
  const auto schema = load_schema(c.schema);
  auto ingested = load_experiments(manifest, schema);

  PreparedData out;
  std::set<std::string> excluded;
  for (auto& in : ingested) {
    for (const auto& e : in.report.excluded) excluded.insert(e);
    out.reports.push_back(in.report);
    out.datasets.push_back(std::move(in.dataset));
  }
  // A channel missing from any experiment is dropped from all of them.
  for (const auto& ch : schema) {
    if (excluded.count(ch.name)) continue;
    (ch.kind == ChannelKind::Input ? out.inputs : out.observables).push_back(ch.name);
  }
  if (out.observables.empty()) throw Error(ErrorCode::SchemaMismatch, "no observable channels survive ingest");

  for (const auto& d : c.impute) {
    Index total = 0;
    for (auto& ds : out.datasets) {
      const VectorXd before = ds.column(d.channel);
      ds = impute_off_state(ds, d.channel, d.sentinel, d.gate);
      total += (before.array() != ds.column(d.channel).array()).count();
    }
    out.imputed.push_back(d.channel + ": " + std::to_string(total) + " samples");
  }

  out.zero_variance = zero_variance_channels(out.datasets, out.inputs);
  std::erase_if(out.inputs, [&](const std::string& n) {
    return std::find(out.zero_variance.begin(), out.zero_variance.end(), n) != out.zero_variance.end();
  });
  if (out.inputs.empty()) throw Error(ErrorCode::SchemaMismatch, "no varying input channels");
  return out;
}

VifSelectionReport select_inputs(const PreparedData& data, const RunConfig& c) {
  Index rows = 0;
  for (const auto& ds : data.datasets) rows += ds.row_count();
  MatrixXd pooled(rows, static_cast<Index>(data.inputs.size()));
  Index at = 0;
  for (const auto& ds : data.datasets) {
    pooled.middleRows(at, ds.row_count()) = ds.columns(data.inputs);
    at += ds.row_count();
  }
  if (c.vif_enabled) return select_features(pooled, data.inputs, c.vif);

  // Disabled: keep everything but still report where the inputs stand.
  VifSelectionReport r;
  r.surviving_features = data.inputs;
  r.thresholds = c.vif;
  r.final_vifs = vif_all(pooled);
  const MatrixXd centred = pooled.rowwise() - pooled.colwise().mean();
  r.final_rank = linalg::matrix_rank(centred);
  return r;
}

CvConfig cv_config(const RunConfig& c, std::vector<std::string> inputs, std::vector<std::string> observables) {
  CvConfig cv;
  cv.inputs = std::move(inputs);
  cv.observables = std::move(observables);
  cv.model.standardize_observables = c.standardize_observables;
  cv.mode = c.eval_mode;
  cv.p = c.p;
  cv.repeats = c.repeats;
  cv.seed = c.seed;
  return cv;
}

SpectrogramPair spectrogram_pair(const StateSpaceModel& model, std::span<const TimeSeriesDataset> datasets,
                                 const RunConfig& c) {
  const std::string obs =
      c.spectrogram.observable.empty() ? model.observable_names.front() : c.spectrogram.observable;
  Index obs_row = -1;
  for (size_t i = 0; i < model.observable_names.size(); ++i)
    if (model.observable_names[i] == obs) obs_row = static_cast<Index>(i);
  if (obs_row < 0) throw Error(ErrorCode::UnknownChannel, "spectrogram observable " + obs + " is not modelled");

  PulseSpectra measured;
  PulseSpectra modelled;
  for (const auto& ds : datasets) {
    const VectorXd power = ds.column(c.spectrogram.power_channel);
    const auto segments =
        segment_pulses(std::span<const double>(power.data(), static_cast<size_t>(power.size())), ds.sample_rate_hz);
    const VectorXd y = ds.column(obs);
    VectorXd y_hat(y.size());
    y_hat(0) = y(0);
    y_hat.tail(y.size() - 1) = predict_experiment(model, ds).row(obs_row).transpose();
    merge_spectra(measured, pulse_spectra(std::span<const double>(y.data(), static_cast<size_t>(y.size())),
                                          ds.sample_rate_hz, segments));
    merge_spectra(modelled, pulse_spectra(std::span<const double>(y_hat.data(), static_cast<size_t>(y_hat.size())),
                                          ds.sample_rate_hz, segments));
  }
  SpectrogramPair out;
  out.experiment = build_spectrogram(measured, c.spectrogram.grid);
  out.model = build_spectrogram(modelled, c.spectrogram.grid);
  out.similarity = compare_spectrograms(out.experiment, out.model);
  return out;
}

// ---------------------------------------------------------------------------
// Writers

namespace {

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  out << text;
  if (!out) throw Error(ErrorCode::IoError, "write failed for " + path.string());
}

std::vector<double> row_of(const MatrixXd& m, Index r) {
  std::vector<double> v(static_cast<size_t>(m.cols()));
  for (Index k = 0; k < m.cols(); ++k) v[static_cast<size_t>(k)] = m(r, k);
  return v;
}

}  // namespace

void write_json(const json& j, const fs::path& path, const Provenance& prov) {
  json doc = j.is_object() ? j : json{{"data", j}};
  doc["provenance"] = prov.as_json();
  write_text(path, doc.dump(2) + "\n");
}

void write_bounded_csv(const BoundedPrediction& b, double sample_rate_hz, const fs::path& path,
                       const Provenance& prov) {
  std::string text = "# " + prov.comment() + "\nt_s";
  for (const auto& o : b.observables)
    text += "," + o + "_predicted," + o + "_lower," + o + "_upper," + o + "_measured," + o + "_violation";
  text += '\n';
  std::vector<std::set<Index>> violated(b.observables.size());
  for (size_t i = 0; i < b.violations.size(); ++i)
    for (const auto& v : b.violations[i]) violated[i].insert(v.t);
  for (Index t = 0; t < b.predictions.cols(); ++t) {
    text += format_double(static_cast<double>(t + 1) / sample_rate_hz);
    for (size_t i = 0; i < b.observables.size(); ++i) {
      const auto r = static_cast<Index>(i);
      text += ',' + format_double(b.predictions(r, t)) + ',' + format_double(b.lower(r, t)) + ',' +
              format_double(b.upper(r, t)) + ',';
      if (b.measured) text += format_double((*b.measured)(r, t));
      text += ',';
      if (b.measured) text += violated[i].count(t) ? '1' : '0';
    }
    text += '\n';
  }
  write_text(path, text);
}

void write_parity_csv(const std::vector<std::string>& observables, const MatrixXd& actual, const MatrixXd& predicted,
                      const fs::path& path, const Provenance& prov) {
  std::string text = "# " + prov.comment() + "\nobservable,actual,predicted\n";
  for (size_t i = 0; i < observables.size(); ++i)
    for (Index t = 0; t < actual.cols(); ++t)
      text += observables[i] + ',' + format_double(actual(static_cast<Index>(i), t)) + ',' +
              format_double(predicted(static_cast<Index>(i), t)) + '\n';
  write_text(path, text);
}

void write_histogram_csv(const std::vector<std::string>& observables, const MatrixXd& actual,
                         const MatrixXd& predicted, size_t bins, const fs::path& path, const Provenance& prov) {
  std::string text = "# " + prov.comment() + "\nobservable,bin_lo,bin_hi,count,skewness\n";
  for (size_t i = 0; i < observables.size(); ++i) {
    const auto a = row_of(actual, static_cast<Index>(i));
    const auto p = row_of(predicted, static_cast<Index>(i));
    const auto h = residual_histogram(a, p, bins);
    for (size_t k = 0; k < h.counts.size(); ++k)
      text += observables[i] + ',' + format_double(h.edges[k]) + ',' + format_double(h.edges[k + 1]) + ',' +
              std::to_string(h.counts[k]) + ',' + format_double(h.skewness) + '\n';
  }
  write_text(path, text);
}

void write_spectrogram_csv(const Spectrogram& s, const fs::path& path, const Provenance& prov) {
  std::string text = "# " + prov.comment() + "\npulse_length_s";
  for (double f : s.frequency_axis) text += ",f_" + format_double(f);
  text += '\n';
  for (Index i = 0; i < s.intensity.rows(); ++i) {
    text += format_double(s.pulse_length_axis[static_cast<size_t>(i)]);
    for (Index j = 0; j < s.intensity.cols(); ++j) text += ',' + format_double(s.intensity(i, j));
    text += '\n';
  }
  write_text(path, text);
}

void write_geometry_csv(const TimeSeriesDataset& ds, const BoundedPrediction& b, const fs::path& path,
                        const Provenance& prov) {
  const char* axes[] = {"x_mm", "y_mm", "z_mm"};
  MatrixXd xyz(ds.row_count(), 3);
  for (int k = 0; k < 3; ++k) xyz.col(k) = ds.column(axes[k]);
  std::string text = "# " + prov.comment() + "\nt_s,x_mm,y_mm,z_mm";
  for (const auto& o : b.observables) text += "," + o + "_predicted," + o + "_measured";
  text += '\n';
  for (Index t = 0; t < b.predictions.cols(); ++t) {
    const Index row = t + 1;
    text += format_double(static_cast<double>(row) / ds.sample_rate_hz);
    for (int k = 0; k < 3; ++k) text += ',' + format_double(xyz(row, k));
    for (size_t i = 0; i < b.observables.size(); ++i) {
      text += ',' + format_double(b.predictions(static_cast<Index>(i), t)) + ',';
      if (b.measured) text += format_double((*b.measured)(static_cast<Index>(i), t));
    }
    text += '\n';
  }
  write_text(path, text);
}

// ---------------------------------------------------------------------------
// Pipeline

namespace {

template <typename F>
auto stage(const char* name, F&& f) {
  std::cerr << "[omm] " << name << "\n";
  try {
    return f();
  } catch (const Error& e) {
    throw e.in_context(std::string("stage ") + name);
  }
}

json ingest_json(const PreparedData& d) {
  json j;
  j["experiments"] = json::array();
  for (size_t i = 0; i < d.datasets.size(); ++i) {
    j["experiments"].push_back({{"id", d.datasets[i].experiment_id},
                                {"rows", d.datasets[i].row_count()},
                                {"sample_rate_hz", d.datasets[i].sample_rate_hz},
                                {"report", to_json(d.reports[i])}});
  }
  j["inputs"] = d.inputs;
  j["observables"] = d.observables;
  j["zero_variance_dropped"] = d.zero_variance;
  j["imputed"] = d.imputed;
  return j;
}

std::string dist_csv(std::span<const WassersteinResult> results, const Provenance& prov) {
  std::string text = "# " + prov.comment() + "\nchannel,pair,mean_distance,ci95_halfwidth,repeats\n";
  for (const auto& r : results)
    text += r.channel + ',' + r.pair_label + ',' + format_double(r.mean_distance) + ',' +
            format_double(r.ci95_halfwidth) + ',' + std::to_string(r.repeats) + '\n';
  return text;
}

json freq_json(std::span<const FrequencyRow> rows, const std::vector<std::string>& observables) {
  json j = json::array();
  for (const auto& r : rows) {
    json row = {{"factor", r.factor}, {"hz", r.hz}};
    for (size_t i = 0; i < observables.size(); ++i) {
      row["r2_test"][observables[i]] = {{"mean", r.r2_test[i].mean}, {"ci95", r.r2_test[i].ci95}};
      row["rmse_test"][observables[i]] = {{"mean", r.rmse_test[i].mean}, {"ci95", r.rmse_test[i].ci95}};
    }
    j.push_back(row);
  }
  return json{{"rows", j}};
}

}  // namespace

PreparedData stage_ingest(const RunConfig& c, const fs::path& out, const Provenance& prov, bool write_datasets) {
  auto d = prepare(c);
  write_json(ingest_json(d), out / "ingest_report.json", prov);
  if (write_datasets)
    for (const auto& ds : d.datasets) write_csv(ds, out / "ingested" / (ds.experiment_id + ".csv"), prov.comment());
  return d;
}

VifSelectionReport stage_select(const PreparedData& data, const RunConfig& c, const fs::path& out,
                                const Provenance& prov, bool write_datasets) {
  auto r = select_inputs(data, c);
  write_json(to_json(r), out / "vif_report.json", prov);
  if (write_datasets) {
    std::vector<std::string> keep = r.surviving_features;
    keep.insert(keep.end(), data.observables.begin(), data.observables.end());
    for (const auto& ds : data.datasets)
      write_csv(ds.select(keep), out / "reduced" / (ds.experiment_id + ".csv"), prov.comment());
  }
  return r;
}

void stage_dist(const PreparedData& data, const std::vector<std::string>& inputs, const RunConfig& c,
                const fs::path& out, const Provenance& prov) {
  if (data.datasets.size() <= c.p)
    throw Error(ErrorCode::TooFewExperiments, "dist-report needs more than p experiments");
  const auto splits = draw_splits(data.datasets.size(), c.p, c.repeats, c.seed);
  std::vector<std::string> channels = inputs;
  channels.insert(channels.end(), data.observables.begin(), data.observables.end());
  const auto results = split_shift_report(data.datasets, splits, channels);
  write_json(to_json(results), out / "dist_report.json", prov);
  write_text(out / "dist_report.csv", dist_csv(results, prov));
}

CvOutcome stage_cv(const PreparedData& data, const std::vector<std::string>& inputs, const RunConfig& c,
                   const fs::path& out, const Provenance& prov) {
  const auto cfg = cv_config(c, inputs, data.observables);
  auto outcome = run_lpocv(data.datasets, cfg);
  json j = to_json(outcome.report);
  j["envelope"] = to_json(outcome.envelope);
  if (c.compare_standardization) {
    auto raw_cfg = cfg;
    raw_cfg.model.standardize_inputs = false;
    raw_cfg.model.standardize_observables = false;
    const auto raw = run_lpocv(data.datasets, raw_cfg);
    for (size_t i = 0; i < data.observables.size(); ++i) {
      j["standardization_comparison"][data.observables[i]] = {
          {"r2_test_standardized", outcome.report.r2_test[i].mean},
          {"r2_test_unstandardized", raw.report.r2_test[i].mean}};
    }
  }
  write_json(j, out / "cv_report.json", prov);
  return outcome;
}

void stage_freq(const PreparedData& data, const std::vector<std::string>& inputs, const RunConfig& c,
                const fs::path& out, const Provenance& prov) {
  const auto rows = frequency_study(data.datasets, cv_config(c, inputs, data.observables), c.decimation_factors);
  write_json(freq_json(rows, data.observables), out / "freq_study.json", prov);
}

StateSpaceModel stage_fit(const PreparedData& data, const std::vector<std::string>& inputs, const RunConfig& c,
                          const fs::path& out, const Provenance& prov) {
  auto m = train(data.datasets, inputs, data.observables, cv_config(c, inputs, data.observables).model);
  write_json(to_json(m), out / "model.json", prov);
  return m;
}

const TimeSeriesDataset& predict_target(const PreparedData& data, const RunConfig& c) {
  for (const auto& ds : data.datasets)
    if (ds.experiment_id == c.predict_experiment) return ds;
  if (!c.predict_experiment.empty())
    throw Error(ErrorCode::InvalidConfig, "unknown experiment " + c.predict_experiment);
  return data.datasets.front();
}

BoundedPrediction stage_predict(const StateSpaceModel& model, const UncertaintyEnvelope& envelope,
                                const TimeSeriesDataset& target, const RunConfig& c, const fs::path& out,
                                const Provenance& prov) {
  const MatrixXd pred = predict_experiment(model, target, c.eval_mode == EvalMode::OneStep);
  const MatrixXd truth =
      target.columns(model.observable_names).bottomRows(target.row_count() - 1).transpose();
  auto b = bound(model.observable_names, pred, envelope, truth);
  write_bounded_csv(b, target.sample_rate_hz, out / "bounded_predictions.csv", prov);
  write_parity_csv(model.observable_names, truth, pred, out / "parity.csv", prov);
  write_histogram_csv(model.observable_names, truth, pred, c.histogram_bins, out / "histogram.csv", prov);
  write_geometry_csv(target, b, out / "geometry.csv", prov);

  json summary = {{"experiment", target.experiment_id}, {"mode", to_string(c.eval_mode)}};
  for (size_t i = 0; i < model.observable_names.size(); ++i) {
    const auto a = row_of(truth, static_cast<Index>(i));
    const auto p = row_of(pred, static_cast<Index>(i));
    const auto parity = parity_data(a, p);
    summary["observables"][model.observable_names[i]] = {{"r2", r2(a, p)},
                                                         {"rmse", rmse(a, p)},
                                                         {"parity_slope", parity.slope},
                                                         {"parity_intercept", parity.intercept},
                                                         {"violations", b.violations[i].size()},
                                                         {"half_width", envelope.half_width(i)}};
  }
  write_json(summary, out / "prediction_summary.json", prov);
  return b;
}

SpectrogramPair stage_spectrogram(const StateSpaceModel& model, const PreparedData& data, const RunConfig& c,
                                  const fs::path& out, const Provenance& prov) {
  auto pair = spectrogram_pair(model, data.datasets, c);
  write_spectrogram_csv(pair.experiment, out / "spectrogram.csv", prov);
  write_spectrogram_csv(pair.model, out / "spectrogram_model.csv", prov);
  json j = to_json(pair.experiment);
  j["model_peak_before_normalization"] = pair.model.peak_before_normalization;
  j["similarity"] = pair.similarity;
  write_json(j, out / "spectrogram.json", prov);
  return pair;
}

void cmd_pipeline(const RunConfig& c) {
  validate(c);
  const auto prov = Provenance::of(c);
  const fs::path& out = c.output_dir;
  fs::create_directories(out);

  const auto data = stage("ingest", [&] { return stage_ingest(c, out, prov); });
  const auto vif = stage("select-features", [&] { return stage_select(data, c, out, prov); });
  const auto& inputs = vif.surviving_features;
  stage("dist-report", [&] { stage_dist(data, inputs, c, out, prov); });
  const auto cv = stage("cv", [&] { return stage_cv(data, inputs, c, out, prov); });
  if (!c.decimation_factors.empty()) stage("freq-study", [&] { stage_freq(data, inputs, c, out, prov); });
  const auto model = stage("fit", [&] { return stage_fit(data, inputs, c, out, prov); });
  stage("predict", [&] { stage_predict(model, cv.envelope, predict_target(data, c), c, out, prov); });
  stage("spectrogram", [&] { stage_spectrogram(model, data, c, out, prov); });
}

// ---------------------------------------------------------------------------
// Throughput

std::string hardware_descriptor() {
  std::string model = "unknown cpu";
  std::ifstream in("/proc/cpuinfo");
  for (std::string line; std::getline(in, line);) {
    if (line.rfind("model name", 0) == 0) {
      const auto colon = line.find(':');
      if (colon != std::string::npos) model = line.substr(colon + 2);
      break;
    }
  }
  return model + ", " + std::to_string(omp_get_max_threads()) + " OpenMP thread(s)";
}

BenchReport cmd_bench(const BenchConfig& c, std::uint64_t seed) {
  if (c.points < c.q + c.p || c.q < 1 || c.p < 1) throw Error(ErrorCode::InvalidConfig, "bench needs points >= q + p");
  const auto plant = random_stable_plant(c.q, c.p, 0.9, seed);
  std::mt19937_64 rng(seed + 1);
  std::normal_distribution<double> n01;

  SnapshotSet s;
  s.u_t.resize(c.p, c.points);
  for (Index t = 0; t < c.points; ++t)
    for (Index i = 0; i < c.p; ++i) s.u_t(i, t) = n01(rng);
  s.y_t.resize(c.q, c.points);
  s.y_t1.resize(c.q, c.points);
  VectorXd y = VectorXd::Zero(c.q);
  for (Index t = 0; t < c.points; ++t) {
    s.y_t.col(t) = y;
    y = plant.a_true * y + plant.b_true * s.u_t.col(t);
    s.y_t1.col(t) = y;
  }
  s.observable_names = plant.observable_names();
  s.input_names = plant.input_names();

  using clock = std::chrono::steady_clock;
  BenchReport r;
  r.points = c.points;
  r.q = c.q;
  r.p = c.p;
  r.fit_target_us = c.fit_target_us;
  r.rollout_target_us = c.rollout_target_us;
  r.hardware = hardware_descriptor();

  auto t0 = clock::now();
  const auto model = fit(s);
  auto t1 = clock::now();
  r.fit_us_per_point = std::chrono::duration<double, std::micro>(t1 - t0).count() / static_cast<double>(c.points);
  MatrixXd g_true(c.q, c.q + c.p);
  g_true << plant.a_true, plant.b_true;
  MatrixXd g_fit(c.q, c.q + c.p);
  g_fit << model.a, model.b;
  r.fit_relative_error = (g_fit - g_true).norm() / g_true.norm();

  t0 = clock::now();
  const MatrixXd traj = rollout(model, VectorXd::Zero(c.q), s.u_t);
  t1 = clock::now();
  r.rollout_us_per_point = std::chrono::duration<double, std::micro>(t1 - t0).count() / static_cast<double>(c.points);
  if (!traj.allFinite()) throw Error(ErrorCode::InsufficientPairs, "bench rollout diverged");
  return r;
}

json to_json(const BenchReport& r) {
  return {{"points", r.points},
          {"q", r.q},
          {"p", r.p},
          {"fit_us_per_point", r.fit_us_per_point},
          {"rollout_us_per_point", r.rollout_us_per_point},
          {"fit_target_us", r.fit_target_us},
          {"rollout_target_us", r.rollout_target_us},
          {"fit_within_target", r.fit_ok()},
          {"rollout_within_target", r.rollout_ok()},
          {"fit_relative_error", r.fit_relative_error},
          {"hardware", r.hardware}};
}

}  // namespace omm
