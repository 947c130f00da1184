#include "omm/dmdc.hpp"

#include <fstream>

#include "omm/error.hpp"
#include "omm/linalg.hpp"

namespace omm {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

SnapshotSet build_snapshots(std::span<const TimeSeriesDataset> datasets, std::span<const std::string> inputs,
                            std::span<const std::string> observables) {
  if (datasets.empty()) throw Error(ErrorCode::TooShort, "no datasets to build snapshots from");
  const double rate = datasets.front().sample_rate_hz;
  Index total = 0;
  for (const auto& ds : datasets) {
    if (ds.sample_rate_hz != rate)
      throw Error(ErrorCode::SchemaMismatch, ds.experiment_id + " sample rate differs from " +
                                                 datasets.front().experiment_id);
    for (const auto& name : inputs)
      if (!ds.find(name)) throw Error(ErrorCode::SchemaMismatch, ds.experiment_id + " lacks input " + name);
    for (const auto& name : observables)
      if (!ds.find(name)) throw Error(ErrorCode::SchemaMismatch, ds.experiment_id + " lacks observable " + name);
    if (ds.row_count() < 2) throw Error(ErrorCode::TooShort, ds.experiment_id);
    total += ds.row_count() - 1;
  }

  const auto q = static_cast<Index>(observables.size());
  const auto p = static_cast<Index>(inputs.size());
  SnapshotSet s;
  s.observable_names.assign(observables.begin(), observables.end());
  s.input_names.assign(inputs.begin(), inputs.end());
  s.y_t.resize(q, total);
  s.y_t1.resize(q, total);
  s.u_t.resize(p, total);

  Index offset = 0;
  for (const auto& ds : datasets) {
    const Index pairs = ds.row_count() - 1;
    const MatrixXd y = ds.columns(observables).transpose();
    const MatrixXd u = ds.columns(inputs).transpose();
    s.y_t.middleCols(offset, pairs) = y.leftCols(pairs);
    s.y_t1.middleCols(offset, pairs) = y.rightCols(pairs);
    s.u_t.middleCols(offset, pairs) = u.leftCols(pairs);
    offset += pairs;
  }
  return s;
}

namespace {

void check_pairs(const SnapshotSet& s) {
  const Index k = s.y_t.rows() + s.u_t.rows();
  if (s.y_t.cols() != s.y_t1.cols() || s.y_t.cols() != s.u_t.cols() || s.y_t1.rows() != s.y_t.rows())
    throw Error(ErrorCode::DimensionMismatch, "snapshot matrices disagree in shape");
  if (s.pair_count() < k) {
    throw Error(ErrorCode::InsufficientPairs, std::to_string(s.pair_count()) + " snapshot pairs for " +
                                                  std::to_string(k) + " regressors");
  }
}

Index retained_rank(const VectorXd& sigma, Index rows, Index cols, const FitOptions& options) {
  if (sigma.size() == 0 || sigma(0) == 0.0) return 0;
  const double cut = options.rel_tol.value_or(linalg::default_rank_tolerance(rows, cols)) * sigma(0);
  Index r = (sigma.array() > cut).count();
  if (options.rank) r = std::min(r, std::max<Index>(*options.rank, 0));
  return r;
}

StateSpaceModel assemble(const SnapshotSet& s, const MatrixXd& g, const VectorXd& sigma, Index rank) {
  const Index q = s.y_t.rows();
  StateSpaceModel m;
  m.a = g.leftCols(q);
  m.b = g.rightCols(s.u_t.rows());
  m.observable_names = s.observable_names;
  m.input_names = s.input_names;
  m.singular_values = sigma;
  m.svd_rank_used = rank;
  return m;
}

StandardizationParams identity_standardizer(std::span<const std::string> names) {
  StandardizationParams p;
  p.names.assign(names.begin(), names.end());
  p.mean = VectorXd::Zero(static_cast<Index>(names.size()));
  p.scale = VectorXd::Ones(static_cast<Index>(names.size()));
  return p;
}

}  // namespace

StateSpaceModel fit(const SnapshotSet& s, const FitOptions& options) {
  check_pairs(s);
  const Index q = s.y_t.rows();
  const Index p = s.u_t.rows();
  const Index k = q + p;
  const Index n = s.pair_count();

  // Omega^T = Q R. With R = U_R S V_R^T, Omega = V_R S (Q U_R)^T, so
  // eta = V_R, zeta = Q U_R and Y_t1 zeta = (Q^T Y_t1^T)^T U_R.
  const auto red = linalg::reduce_tall_blocks(
      n, k, q,
      [&](Index begin, Index count, MatrixXd& xb, MatrixXd& yb) {
        xb.leftCols(q) = s.y_t.middleCols(begin, count).transpose();
        xb.rightCols(p) = s.u_t.middleCols(begin, count).transpose();
        yb = s.y_t1.middleCols(begin, count).transpose();
      });
  Eigen::JacobiSVD<MatrixXd> svd(red.r, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const VectorXd& sigma = svd.singularValues();
  const Index r = retained_rank(sigma, k, n, options);

  const MatrixXd yz = red.qty.transpose() * svd.matrixU().leftCols(r);  // Y_t1 zeta, q x r
  const MatrixXd eta = svd.matrixV().leftCols(r);                       // k x r
  const MatrixXd g = yz * sigma.head(r).cwiseInverse().asDiagonal() * eta.transpose();
  auto m = assemble(s, g, sigma, r);
  m.input_standardizer = identity_standardizer(s.input_names);
  m.observable_standardizer = identity_standardizer(s.observable_names);
  return m;
}

StateSpaceModel fit_reference(const SnapshotSet& s, const FitOptions& options) {
  check_pairs(s);
  const Index q = s.y_t.rows();
  const Index p = s.u_t.rows();
  MatrixXd omega(q + p, s.pair_count());
  omega.topRows(q) = s.y_t;
  omega.bottomRows(p) = s.u_t;

  Eigen::BDCSVD<MatrixXd> svd(omega, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const VectorXd& sigma = svd.singularValues();
  const Index r = retained_rank(sigma, omega.rows(), omega.cols(), options);
  const MatrixXd eta = svd.matrixU().leftCols(r);   // (q+p) x r
  const MatrixXd zeta = svd.matrixV().leftCols(r);  // N x r
  const MatrixXd core = s.y_t1 * zeta * sigma.head(r).cwiseInverse().asDiagonal();

  MatrixXd g(q, q + p);
  g.leftCols(q) = core * eta.topRows(q).transpose();
  g.rightCols(p) = core * eta.bottomRows(p).transpose();
  auto m = assemble(s, g, sigma, r);
  m.input_standardizer = identity_standardizer(s.input_names);
  m.observable_standardizer = identity_standardizer(s.observable_names);
  return m;
}

MatrixXd rollout(const MatrixXd& a, const MatrixXd& b, const VectorXd& y0, const MatrixXd& inputs) {
  if (a.rows() != a.cols() || y0.size() != a.rows() || b.rows() != a.rows() || inputs.rows() != b.cols()) {
    throw Error(ErrorCode::DimensionMismatch, "rollout: A " + std::to_string(a.rows()) + "x" +
                                                  std::to_string(a.cols()) + ", B " + std::to_string(b.rows()) +
                                                  "x" + std::to_string(b.cols()) + ", y0 " +
                                                  std::to_string(y0.size()) + ", inputs " +
                                                  std::to_string(inputs.rows()) + " rows");
  }
  const MatrixXd forced = b * inputs;
  MatrixXd out(a.rows(), inputs.cols());
  VectorXd y = y0;
  for (Index t = 0; t < inputs.cols(); ++t) {
    y = a * y + forced.col(t);
    out.col(t) = y;
  }
  return out;
}

MatrixXd rollout(const StateSpaceModel& model, const VectorXd& y0, const MatrixXd& inputs) {
  return rollout(model.a, model.b, y0, inputs);
}

MatrixXd one_step(const StateSpaceModel& model, const MatrixXd& measured, const MatrixXd& inputs) {
  if (measured.rows() != model.q() || inputs.rows() != model.p() || measured.cols() != inputs.cols())
    throw Error(ErrorCode::DimensionMismatch, "one_step: measured/inputs do not match the model");
  return model.a * measured + model.b * inputs;
}

StateSpaceModel train(std::span<const TimeSeriesDataset> datasets, std::span<const std::string> inputs,
                      std::span<const std::string> observables, const ModelOptions& options) {
  if (datasets.empty()) throw Error(ErrorCode::TooFewExperiments, "no training experiments");
  const auto in_std =
      options.standardize_inputs ? fit_standardizer(datasets, inputs) : identity_standardizer(inputs);
  const auto obs_std = options.standardize_observables ? fit_standardizer(datasets, observables)
                                                       : identity_standardizer(observables);
  std::vector<TimeSeriesDataset> scaled;
  scaled.reserve(datasets.size());
  for (const auto& ds : datasets) scaled.push_back(apply_standardizer(apply_standardizer(ds, in_std), obs_std));

  auto model = fit(build_snapshots(scaled, inputs, observables), options.fit);
  model.input_standardizer = in_std;
  model.observable_standardizer = obs_std;
  model.sample_rate_hz = datasets.front().sample_rate_hz;
  return model;
}

MatrixXd predict_experiment(const StateSpaceModel& model, const TimeSeriesDataset& ds, bool one_step_mode) {
  if (ds.row_count() < 2) throw Error(ErrorCode::TooShort, ds.experiment_id);
  const Index steps = ds.row_count() - 1;
  const MatrixXd u = standardize_rows(ds.columns(model.input_names).transpose(), model.input_standardizer);
  const MatrixXd y = standardize_rows(ds.columns(model.observable_names).transpose(), model.observable_standardizer);
  const MatrixXd pred = one_step_mode ? one_step(model, y.leftCols(steps), u.leftCols(steps))
                                      : rollout(model, y.col(0), u.leftCols(steps));
  return unstandardize_rows(pred, model.observable_standardizer);
}

MatrixXd predict(const StateSpaceModel& model, const VectorXd& y0_raw, const MatrixXd& inputs_raw) {
  if (y0_raw.size() != model.q() || inputs_raw.rows() != model.p())
    throw Error(ErrorCode::DimensionMismatch, "predict: initial state or inputs do not match the model");
  const VectorXd y0 = standardize_rows(y0_raw, model.observable_standardizer);
  const MatrixXd u = standardize_rows(inputs_raw, model.input_standardizer);
  return unstandardize_rows(rollout(model, y0, u), model.observable_standardizer);
}

namespace {

constexpr const char* kFormatTag = "omm-dmdc-model";

nlohmann::json matrix_json(const MatrixXd& m) {
  std::vector<double> row_major;
  row_major.reserve(static_cast<size_t>(m.size()));
  for (Index i = 0; i < m.rows(); ++i)
    for (Index j = 0; j < m.cols(); ++j) row_major.push_back(m(i, j));
  return {{"rows", m.rows()}, {"cols", m.cols()}, {"data", row_major}};
}

MatrixXd matrix_from_json(const nlohmann::json& j) {
  const auto rows = j.at("rows").get<Index>();
  const auto cols = j.at("cols").get<Index>();
  const auto data = j.at("data").get<std::vector<double>>();
  if (rows < 0 || cols < 0 || static_cast<Index>(data.size()) != rows * cols)
    throw Error(ErrorCode::CorruptFile, "matrix payload size does not match its shape");
  MatrixXd m(rows, cols);
  for (Index i = 0; i < rows; ++i)
    for (Index j2 = 0; j2 < cols; ++j2) m(i, j2) = data[static_cast<size_t>(i * cols + j2)];
  return m;
}

}  // namespace

nlohmann::json to_json(const StateSpaceModel& m) {
  nlohmann::json j;
  j["format"] = kFormatTag;
  j["version"] = kModelFormatVersion;
  j["sample_rate_hz"] = m.sample_rate_hz;
  j["svd_rank_used"] = m.svd_rank_used;
  j["observable_names"] = m.observable_names;
  j["input_names"] = m.input_names;
  j["observable_standardizer"] = to_json(m.observable_standardizer);
  j["input_standardizer"] = to_json(m.input_standardizer);
  j["A"] = matrix_json(m.a);
  j["B"] = matrix_json(m.b);
  j["singular_values"] = std::vector<double>(m.singular_values.begin(), m.singular_values.end());
  return j;
}

StateSpaceModel model_from_json(const nlohmann::json& j) {
  try {
    if (j.at("format").get<std::string>() != kFormatTag)
      throw Error(ErrorCode::CorruptFile, "not a model file");
    const int version = j.at("version").get<int>();
    if (version != kModelFormatVersion) {
      throw Error(ErrorCode::VersionMismatch, "model format version " + std::to_string(version) +
                                                  ", this build reads " + std::to_string(kModelFormatVersion));
    }
    StateSpaceModel m;
    m.sample_rate_hz = j.at("sample_rate_hz").get<double>();
    m.svd_rank_used = j.at("svd_rank_used").get<Index>();
    m.observable_names = j.at("observable_names").get<std::vector<std::string>>();
    m.input_names = j.at("input_names").get<std::vector<std::string>>();
    m.observable_standardizer = standardizer_from_json(j.at("observable_standardizer"));
    m.input_standardizer = standardizer_from_json(j.at("input_standardizer"));
    m.a = matrix_from_json(j.at("A"));
    m.b = matrix_from_json(j.at("B"));
    const auto sv = j.at("singular_values").get<std::vector<double>>();
    m.singular_values = Eigen::Map<const VectorXd>(sv.data(), static_cast<Index>(sv.size()));
    const auto q = static_cast<Index>(m.observable_names.size());
    const auto p = static_cast<Index>(m.input_names.size());
    if (m.a.rows() != q || m.a.cols() != q || m.b.rows() != q || m.b.cols() != p)
      throw Error(ErrorCode::CorruptFile, "operator shapes do not match channel names");
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::CorruptFile, e.what());
  }
}

void save_model(const StateSpaceModel& m, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  out << to_json(m).dump(2) << "\n";
}

StateSpaceModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::CorruptFile, path.string() + ": " + e.what());
  }
  return model_from_json(j);
}

}  // namespace omm
