#include "omm/validation.hpp"

#include <algorithm>
#include <cmath>
#include <exception>

#include "omm/error.hpp"

namespace omm {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

void check_lengths(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size() || a.empty())
    throw Error(ErrorCode::DimensionMismatch, "metric inputs need equal nonzero lengths, got " +
                                                  std::to_string(a.size()) + " and " + std::to_string(b.size()));
}

}  // namespace

double r2(std::span<const double> actual, std::span<const double> predicted) {
  check_lengths(actual, predicted);
  double mean = 0.0;
  for (double v : actual) mean += v;
  mean /= static_cast<double>(actual.size());
  double ss_tot = 0.0;
  double ss_res = 0.0;
  for (size_t i = 0; i < actual.size(); ++i) {
    ss_tot += (actual[i] - mean) * (actual[i] - mean);
    ss_res += (actual[i] - predicted[i]) * (actual[i] - predicted[i]);
  }
  if (ss_tot == 0.0) throw Error(ErrorCode::ConstantActual, "R^2 undefined for a constant series");
  return 1.0 - ss_res / ss_tot;
}

double rmse(std::span<const double> actual, std::span<const double> predicted) {
  check_lengths(actual, predicted);
  double ss = 0.0;
  for (size_t i = 0; i < actual.size(); ++i) ss += (actual[i] - predicted[i]) * (actual[i] - predicted[i]);
  return std::sqrt(ss / static_cast<double>(actual.size()));
}

FoldMetrics evaluate(const StateSpaceModel& model, std::span<const TimeSeriesDataset> datasets,
                     std::span<const size_t> which, EvalMode mode) {
  const auto q = static_cast<size_t>(model.q());
  std::vector<std::vector<double>> actual(q);
  std::vector<std::vector<double>> predicted(q);
  for (size_t k : which) {
    const auto& ds = datasets[k];
    const MatrixXd pred = predict_experiment(model, ds, mode == EvalMode::OneStep);
    const MatrixXd meas = ds.columns(model.observable_names).bottomRows(ds.row_count() - 1).transpose();
    for (size_t o = 0; o < q; ++o) {
      const auto row = static_cast<Index>(o);
      for (Index t = 0; t < pred.cols(); ++t) {
        actual[o].push_back(meas(row, t));
        predicted[o].push_back(pred(row, t));
      }
    }
  }
  FoldMetrics m;
  for (size_t o = 0; o < q; ++o) {
    m.r2.push_back(r2(actual[o], predicted[o]));
    m.rmse.push_back(rmse(actual[o], predicted[o]));
  }
  return m;
}

CvOutcome aggregate_folds(std::vector<FoldResult> folds, const CvConfig& config) {
  CvOutcome out;
  auto& rep = out.report;
  rep.observables = config.observables;
  rep.repeats = folds.size();
  rep.p = config.p;
  rep.seed = config.seed;
  rep.mode = config.mode;
  rep.folds = std::move(folds);

  auto across = [&](auto member, size_t o) {
    std::vector<double> v;
    for (const auto& f : rep.folds) v.push_back((f.*member)[o]);
    return mean_ci95(v);
  };
  for (size_t o = 0; o < config.observables.size(); ++o) {
    rep.r2_train.push_back(across(&FoldResult::r2_train, o));
    rep.r2_test.push_back(across(&FoldResult::r2_test, o));
    rep.rmse_train.push_back(across(&FoldResult::rmse_train, o));
    rep.rmse_test.push_back(across(&FoldResult::rmse_test, o));
  }
  out.envelope.observables = config.observables;
  for (const auto& m : rep.rmse_test) {
    out.envelope.rmse.push_back(m.mean);
    out.envelope.ci95.push_back(m.ci95);
  }
  return out;
}

CvOutcome run_lpocv(std::span<const TimeSeriesDataset> datasets, const CvConfig& config) {
  if (datasets.size() <= config.p) {
    throw Error(ErrorCode::TooFewExperiments, std::to_string(datasets.size()) + " experiments for p = " +
                                                  std::to_string(config.p));
  }
  const auto splits = draw_splits(datasets.size(), config.p, config.repeats, config.seed);
  std::vector<FoldResult> folds(splits.size());
  std::vector<std::exception_ptr> errors(splits.size());

  const auto n = static_cast<long>(splits.size());
#pragma omp parallel for schedule(dynamic) if (config.parallel)
  for (long f = 0; f < n; ++f) {
    const auto& split = splits[static_cast<size_t>(f)];
    auto& fold = folds[static_cast<size_t>(f)];
    try {
      std::vector<TimeSeriesDataset> train_sets;
      for (size_t k : split.train) train_sets.push_back(datasets[k]);
      const auto model = train(train_sets, config.inputs, config.observables, config.model);

      fold.fold_index = static_cast<int>(f);
      for (size_t k : split.train) fold.train_ids.push_back(datasets[k].experiment_id);
      for (size_t k : split.test) fold.test_ids.push_back(datasets[k].experiment_id);
      fold.svd_rank_used = model.svd_rank_used;
      const auto tr = evaluate(model, datasets, split.train, config.mode);
      const auto te = evaluate(model, datasets, split.test, config.mode);
      fold.r2_train = tr.r2;
      fold.rmse_train = tr.rmse;
      fold.r2_test = te.r2;
      fold.rmse_test = te.rmse;
    } catch (...) {
      errors[static_cast<size_t>(f)] = std::current_exception();
    }
  }
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);
  return aggregate_folds(std::move(folds), config);
}

BoundedPrediction bound(const std::vector<std::string>& observables, const MatrixXd& predictions,
                        const UncertaintyEnvelope& envelope, const std::optional<MatrixXd>& ground_truth) {
  if (envelope.observables != observables)
    throw Error(ErrorCode::DimensionMismatch, "envelope observables do not match the model");
  if (ground_truth && (ground_truth->rows() != predictions.rows() || ground_truth->cols() != predictions.cols()))
    throw Error(ErrorCode::DimensionMismatch, "ground truth shape differs from predictions");

  BoundedPrediction out;
  out.observables = observables;
  out.predictions = predictions;
  out.lower = predictions;
  out.upper = predictions;
  for (Index o = 0; o < predictions.rows(); ++o) {
    const double w = envelope.half_width(static_cast<size_t>(o));
    out.lower.row(o).array() -= w;
    out.upper.row(o).array() += w;
  }
  out.violations.resize(observables.size());
  if (ground_truth) {
    out.measured = *ground_truth;
    for (Index o = 0; o < predictions.rows(); ++o) {
      for (Index t = 0; t < predictions.cols(); ++t) {
        const double y = (*ground_truth)(o, t);
        if (y < out.lower(o, t)) out.violations[static_cast<size_t>(o)].push_back({t, y, out.lower(o, t)});
        if (y > out.upper(o, t)) out.violations[static_cast<size_t>(o)].push_back({t, y, out.upper(o, t)});
      }
    }
  }
  return out;
}

BoundedPrediction bound_predictions(const StateSpaceModel& model, const UncertaintyEnvelope& envelope,
                                    const VectorXd& y0_raw, const MatrixXd& inputs_raw,
                                    const std::optional<MatrixXd>& ground_truth) {
  return bound(model.observable_names, predict(model, y0_raw, inputs_raw), envelope, ground_truth);
}

Histogram residual_histogram(std::span<const double> actual, std::span<const double> predicted, size_t bins) {
  if (actual.size() != predicted.size())
    throw Error(ErrorCode::DimensionMismatch, "histogram inputs differ in length");
  Histogram h;
  if (actual.empty()) return h;
  bins = std::max<size_t>(bins, 1);
  std::vector<double> res(actual.size());
  for (size_t i = 0; i < res.size(); ++i) res[i] = actual[i] - predicted[i];
  const auto [lo_it, hi_it] = std::minmax_element(res.begin(), res.end());
  const double lo = *lo_it;
  const double hi = *hi_it;
  if (hi == lo) bins = 1;
  h.edges.resize(bins + 1);
  for (size_t b = 0; b <= bins; ++b) h.edges[b] = lo + (hi - lo) * static_cast<double>(b) / static_cast<double>(bins);
  h.counts.assign(bins, 0);
  for (double r : res) {
    size_t b = hi == lo ? 0 : static_cast<size_t>((r - lo) / (hi - lo) * static_cast<double>(bins));
    ++h.counts[std::min(b, bins - 1)];
  }

  const double n = static_cast<double>(res.size());
  double mean = 0.0;
  for (double r : res) mean += r;
  mean /= n;
  double m2 = 0.0;
  double m3 = 0.0;
  for (double r : res) {
    const double d = r - mean;
    m2 += d * d;
    m3 += d * d * d;
  }
  m2 /= n;
  m3 /= n;
  h.skewness = m2 > 0.0 ? m3 / std::pow(m2, 1.5) : 0.0;
  return h;
}

ParityData parity_data(std::span<const double> actual, std::span<const double> predicted) {
  check_lengths(actual, predicted);
  ParityData p;
  p.actual.assign(actual.begin(), actual.end());
  p.predicted.assign(predicted.begin(), predicted.end());
  const double n = static_cast<double>(actual.size());
  double ma = 0.0;
  double mp = 0.0;
  for (size_t i = 0; i < actual.size(); ++i) {
    ma += actual[i];
    mp += predicted[i];
  }
  ma /= n;
  mp /= n;
  double sxx = 0.0;
  double sxy = 0.0;
  for (size_t i = 0; i < actual.size(); ++i) {
    sxx += (actual[i] - ma) * (actual[i] - ma);
    sxy += (actual[i] - ma) * (predicted[i] - mp);
  }
  p.slope = sxx > 0.0 ? sxy / sxx : 1.0;
  p.intercept = mp - p.slope * ma;
  return p;
}

std::vector<FrequencyRow> frequency_study(std::span<const TimeSeriesDataset> datasets, const CvConfig& config,
                                          std::span<const int> factors) {
  if (datasets.empty()) throw Error(ErrorCode::TooFewExperiments, "frequency study needs experiments");
  std::vector<FrequencyRow> out;
  for (int factor : factors) {
    if (factor < 1) throw Error(ErrorCode::InvalidConfig, "decimation factors must be >= 1");
    std::vector<TimeSeriesDataset> coarse;
    for (const auto& ds : datasets) coarse.push_back(decimate(ds, factor));
    const auto cv = run_lpocv(coarse, config);
    FrequencyRow row;
    row.factor = factor;
    row.hz = datasets.front().sample_rate_hz / factor;
    row.r2_test = cv.report.r2_test;
    row.rmse_test = cv.report.rmse_test;
    out.push_back(std::move(row));
  }
  return out;
}

const char* to_string(EvalMode mode) { return mode == EvalMode::Rollout ? "rollout" : "one_step"; }

namespace {

nlohmann::json per_observable(const std::vector<std::string>& names, const std::vector<MeanCi>& v) {
  nlohmann::json j = nlohmann::json::object();
  for (size_t i = 0; i < names.size(); ++i) j[names[i]] = {{"mean", v[i].mean}, {"ci95", v[i].ci95}};
  return j;
}

nlohmann::json per_observable(const std::vector<std::string>& names, const std::vector<double>& v) {
  nlohmann::json j = nlohmann::json::object();
  for (size_t i = 0; i < names.size(); ++i) j[names[i]] = v[i];
  return j;
}

}  // namespace

nlohmann::json to_json(const CvReport& r) {
  nlohmann::json j;
  j["mode"] = to_string(r.mode);
  j["p"] = r.p;
  j["repeats"] = r.repeats;
  j["seed"] = r.seed;
  j["observables"] = r.observables;
  j["aggregates"] = {{"r2_train", per_observable(r.observables, r.r2_train)},
                     {"r2_test", per_observable(r.observables, r.r2_test)},
                     {"rmse_train", per_observable(r.observables, r.rmse_train)},
                     {"rmse_test", per_observable(r.observables, r.rmse_test)}};
  j["folds"] = nlohmann::json::array();
  for (const auto& f : r.folds) {
    j["folds"].push_back({{"fold", f.fold_index},
                          {"test_ids", f.test_ids},
                          {"train_ids", f.train_ids},
                          {"svd_rank_used", f.svd_rank_used},
                          {"r2_train", per_observable(r.observables, f.r2_train)},
                          {"r2_test", per_observable(r.observables, f.r2_test)},
                          {"rmse_train", per_observable(r.observables, f.rmse_train)},
                          {"rmse_test", per_observable(r.observables, f.rmse_test)}});
  }
  return j;
}

nlohmann::json to_json(const UncertaintyEnvelope& e) {
  nlohmann::json j = nlohmann::json::object();
  j["observables"] = e.observables;
  j["rmse"] = e.rmse;
  j["ci95"] = e.ci95;
  return j;
}

UncertaintyEnvelope envelope_from_json(const nlohmann::json& j) {
  UncertaintyEnvelope e;
  try {
    e.observables = j.at("observables").get<std::vector<std::string>>();
    e.rmse = j.at("rmse").get<std::vector<double>>();
    e.ci95 = j.at("ci95").get<std::vector<double>>();
  } catch (const nlohmann::json::exception& ex) {
    throw Error(ErrorCode::CorruptFile, std::string("envelope: ") + ex.what());
  }
  if (e.rmse.size() != e.observables.size() || e.ci95.size() != e.observables.size())
    throw Error(ErrorCode::CorruptFile, "envelope arrays do not match observable count");
  return e;
}

}  // namespace omm
