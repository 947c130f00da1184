// omm: command-line front end for the on-machine-monitoring surrogate toolkit.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include <CLI11.hpp>
#include <json.hpp>

#include "omm/error.hpp"
#include "omm/pipeline.hpp"
#include "omm/synthetic.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitData = 3;
constexpr int kExitNumeric = 4;

// Flags shared by every data-driven subcommand; unset ones fall back to the
// config file, then to RunConfig defaults.
struct CommonFlags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string manifest;
  std::string schema;
  std::string out;
  std::optional<size_t> p;
  std::optional<size_t> repeats;
};

void add_common(CLI::App* cmd, CommonFlags& f) {
  cmd->add_option("--config", f.config, "run configuration JSON");
  cmd->add_option("--seed", f.seed, "override the seed");
  cmd->add_option("--manifest", f.manifest, "experiment manifest JSON");
  cmd->add_option("--schema", f.schema, "channel schema JSON");
  cmd->add_option("--out", f.out, "output directory");
  cmd->add_option("--p", f.p, "experiments held out per fold");
  cmd->add_option("--repeats", f.repeats, "number of LpOCV draws");
}

omm::RunConfig build_config(const CommonFlags& f) {
  omm::RunConfig c = f.config.empty() ? omm::RunConfig{} : omm::load_run_config(f.config);
  if (f.seed) c.seed = *f.seed;
  if (!f.manifest.empty()) c.manifest = fs::absolute(f.manifest);
  if (!f.schema.empty()) c.schema = fs::absolute(f.schema);
  if (!f.out.empty()) c.output_dir = f.out;
  if (f.p) c.p = *f.p;
  if (f.repeats) c.repeats = *f.repeats;
  return c;
}

void print_json(const json& j) { std::cout << j.dump(2) << "\n"; }

struct SynthFlags {
  std::string out = "synthetic";
  size_t experiments = 8;
  double rate = 100.0;
  std::uint64_t seed = 1;
  double noise_scale = 1.0;
  double dropout = 0.0;
  std::string plant;
};

int run_synth(const SynthFlags& f) {
  omm::CampaignOptions o;
  o.experiments = f.experiments;
  o.sample_rate_hz = f.rate;
  o.seed = f.seed;
  o.noise_scale = f.noise_scale;
  o.dropout_probability = f.dropout;
  if (!f.plant.empty()) {
    std::ifstream in(f.plant);
    if (!in) throw omm::Error(omm::ErrorCode::InvalidConfig, "cannot open plant " + f.plant);
    json j;
    try {
      in >> j;
    } catch (const json::exception& e) {
      throw omm::Error(omm::ErrorCode::InvalidConfig, f.plant + ": " + e.what());
    }
    o.plant = omm::plant_from_json(j);
  }
  if (o.experiments < 2) throw omm::Error(omm::ErrorCode::InvalidConfig, "synth needs at least 2 experiments");

  const json options = {{"experiments", o.experiments}, {"sample_rate_hz", o.sample_rate_hz}, {"seed", o.seed},
                        {"noise_scale", o.noise_scale}, {"dropout_probability", o.dropout_probability},
                        {"plant", f.plant.empty() ? json() : omm::to_json(*o.plant)}};
  const std::string comment = "omm synth options_hash=" + omm::fnv1a_hex(options.dump()) + " seed=" +
                              std::to_string(o.seed);

  const fs::path out(f.out);
  fs::create_directories(out);
  const auto campaign = omm::synthesize_campaign(o);
  omm::ExperimentManifest manifest;
  manifest.base_dir = out;
  for (const auto& ex : campaign) {
    const auto& ds = ex.sim.data;
    omm::write_csv(ds, out / (ds.experiment_id + ".csv"), comment);
    std::ofstream(out / (ds.experiment_id + ".gcode")) << ex.gcode;
    manifest.entries.push_back({ds.experiment_id, ds.experiment_id + ".csv", ds.sample_rate_hz});
  }
  manifest.save(out / "manifest.json");
  std::vector<omm::ChannelSpec> schema = campaign.front().sim.data.channels;
  omm::save_schema(schema, out / "schema.json");
  std::ofstream(out / "plant.json") << omm::to_json(o.plant ? *o.plant : omm::ded_plant(o.noise_scale)).dump(2)
                                    << "\n";

  // A ready-to-run pipeline configuration next to the data.
  json config = {{"manifest", "manifest.json"},
                 {"schema", "schema.json"},
                 {"output_dir", "out"},
                 {"seed", o.seed},
                 {"lpocv", {{"p", 2}, {"repeats", 10}}},
                 {"compare_standardization", true}};
  if (!o.plant) {
    config["spectrogram"] = {{"observable", "melt_pool_temp_c"}, {"power_channel", "power_w"}};
    if (o.dropout_probability > 0.0)
      config["impute"] = json::array({{{"channel", "working_distance_mm"}, {"sentinel", -1.0}, {"gate", "power_w"}}});
  }
  std::ofstream(out / "config.json") << config.dump(2) << "\n";
  std::cout << "wrote " << campaign.size() << " experiments to " << out.string() << "\n";
  return 0;
}

std::optional<omm::UncertaintyEnvelope> load_envelope(const std::string& path) {
  if (path.empty()) return std::nullopt;
  std::ifstream in(path);
  if (!in) throw omm::Error(omm::ErrorCode::IoError, "cannot open " + path);
  json j;
  try {
    in >> j;
    return omm::envelope_from_json(j.contains("envelope") ? j["envelope"] : j);
  } catch (const json::exception& e) {
    throw omm::Error(omm::ErrorCode::CorruptFile, path + ": " + e.what());
  }
}

int exit_code(const omm::Error& e) {
  switch (e.category()) {
    case omm::ErrorCategory::Config: return kExitConfig;
    case omm::ErrorCategory::Data: return kExitData;
    case omm::ErrorCategory::Numeric: return kExitNumeric;
  }
  return kExitData;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"omm: data-driven surrogate modelling of on-machine monitoring data"};
  app.require_subcommand(1);

  CommonFlags common;
  SynthFlags synth;
  std::string model_path;
  std::string envelope_path;
  std::string experiment;
  std::vector<int> factors;
  std::optional<long> bench_points;
  bool write_datasets = false;

  auto* c_synth = app.add_subcommand("synth", "generate a synthetic DED campaign with known ground truth");
  c_synth->add_option("--out", synth.out, "output directory");
  c_synth->add_option("--experiments", synth.experiments, "number of experiments");
  c_synth->add_option("--rate", synth.rate, "sample rate in Hz");
  c_synth->add_option("--seed", synth.seed, "seed");
  c_synth->add_option("--noise-scale", synth.noise_scale, "multiplier on the default sensor noise");
  c_synth->add_option("--dropout", synth.dropout, "gated sentinel dropout probability for working distance");
  c_synth->add_option("--plant", synth.plant, "plant spec JSON replacing the built-in plant");

  auto* c_ingest = app.add_subcommand("ingest", "ingest, impute and screen experiments");
  auto* c_select = app.add_subcommand("select-features", "iterative VIF feature elimination");
  auto* c_dist = app.add_subcommand("dist-report", "Wasserstein split-shift report");
  auto* c_fit = app.add_subcommand("fit", "fit a DMDc model on every experiment");
  auto* c_cv = app.add_subcommand("cv", "leave-p-out cross-validation and uncertainty envelope");
  auto* c_predict = app.add_subcommand("predict", "bounded prediction for one experiment");
  auto* c_spec = app.add_subcommand("spectrogram", "pulse-length spectrograms of experiment and model");
  auto* c_freq = app.add_subcommand("freq-study", "cross-validation accuracy versus sample rate");
  auto* c_pipe = app.add_subcommand("pipeline", "run every stage in order");
  auto* c_bench = app.add_subcommand("bench", "fit and rollout throughput");

  for (auto* c : {c_ingest, c_select, c_dist, c_fit, c_cv, c_predict, c_spec, c_freq, c_pipe, c_bench})
    add_common(c, common);
  c_ingest->add_flag("--write-datasets", write_datasets, "also write the cleaned experiments as CSV");
  c_select->add_flag("--write-datasets", write_datasets, "also write the reduced experiments as CSV");
  for (auto* c : {c_predict, c_spec}) c->add_option("--model", model_path, "model JSON from `omm fit`");
  c_predict->add_option("--envelope", envelope_path, "cv_report.json or envelope JSON");
  c_predict->add_option("--experiment", experiment, "experiment id to predict");
  c_freq->add_option("--factors", factors, "decimation factors")->delimiter(',');
  c_bench->add_option("--points", bench_points, "snapshot pairs");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitConfig;
  }

  try {
    if (c_synth->parsed()) return run_synth(synth);

    auto cfg = build_config(common);
    const auto prov = omm::Provenance::of(cfg);
    const fs::path out = cfg.output_dir;

    if (c_bench->parsed()) {
      if (bench_points) cfg.bench.points = *bench_points;
      const auto r = omm::cmd_bench(cfg.bench, cfg.seed);
      const json j = omm::to_json(r);
      omm::write_json(j, out / "bench.json", prov);
      print_json(j);
      return 0;
    }
    if (c_pipe->parsed()) {
      omm::cmd_pipeline(cfg);
      std::cout << "artifacts in " << out.string() << "\n";
      return 0;
    }

    if (!experiment.empty()) cfg.predict_experiment = experiment;
    if (!factors.empty()) cfg.decimation_factors = factors;
    omm::validate(cfg);
    fs::create_directories(out);
    const auto data = omm::stage_ingest(cfg, out, prov, write_datasets && c_ingest->parsed());
    if (c_ingest->parsed()) return 0;

    const auto vif = omm::stage_select(data, cfg, out, prov, write_datasets && c_select->parsed());
    const auto& inputs = vif.surviving_features;
    if (c_select->parsed()) {
      std::cout << "surviving inputs:";
      for (const auto& s : inputs) std::cout << " " << s;
      std::cout << "\n";
      return 0;
    }
    if (c_dist->parsed()) {
      omm::stage_dist(data, inputs, cfg, out, prov);
      return 0;
    }
    if (c_cv->parsed()) {
      const auto cv = omm::stage_cv(data, inputs, cfg, out, prov);
      print_json(omm::to_json(cv.envelope));
      return 0;
    }
    if (c_freq->parsed()) {
      if (cfg.decimation_factors.empty()) cfg.decimation_factors = {1, 2, 5, 10};
      omm::stage_freq(data, inputs, cfg, out, prov);
      return 0;
    }

    const auto model = model_path.empty() ? omm::stage_fit(data, inputs, cfg, out, prov) : omm::load_model(model_path);
    if (c_fit->parsed()) return 0;
    if (c_spec->parsed()) {
      const auto pair = omm::stage_spectrogram(model, data, cfg, out, prov);
      std::cout << "similarity " << pair.similarity << "\n";
      return 0;
    }
    if (c_predict->parsed()) {
      auto env = load_envelope(envelope_path);
      if (!env) env = omm::stage_cv(data, inputs, cfg, out, prov).envelope;
      omm::stage_predict(model, *env, omm::predict_target(data, cfg), cfg, out, prov);
      return 0;
    }
  } catch (const omm::Error& e) {
    std::cerr << "omm: " << e.what() << "\n";
    return exit_code(e);
  } catch (const fs::filesystem_error& e) {
    std::cerr << "omm: IoError: " << e.what() << "\n";
    return kExitData;
  } catch (const std::exception& e) {
    std::cerr << "omm: " << e.what() << "\n";
    return kExitNumeric;
  }
  return 0;
}
