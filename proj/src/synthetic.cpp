#include "omm/synthetic.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

#include <Eigen/Eigenvalues>

#include "omm/error.hpp"

namespace omm {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::Vector3d;
using Eigen::VectorXd;

double spectral_radius(const MatrixXd& a) {
  if (a.size() == 0) return 0.0;
  return Eigen::EigenSolver<MatrixXd>(a, false).eigenvalues().cwiseAbs().maxCoeff();
}

PlantSpec PlantSpec::make(MatrixXd a, MatrixXd b, std::vector<ChannelSpec> observables,
                          std::vector<ChannelSpec> inputs, std::vector<double> noise_sd, double max_radius) {
  const auto q = static_cast<Index>(observables.size());
  const auto p = static_cast<Index>(inputs.size());
  if (a.rows() != q || a.cols() != q || b.rows() != q || b.cols() != p)
    throw Error(ErrorCode::DimensionMismatch, "plant operators do not match channel counts");
  if (noise_sd.empty()) noise_sd.assign(static_cast<size_t>(q), 0.0);
  if (static_cast<Index>(noise_sd.size()) != q)
    throw Error(ErrorCode::DimensionMismatch, "noise_sd needs one entry per observable");
  for (auto& c : observables) c.kind = ChannelKind::Observable;
  for (auto& c : inputs) c.kind = ChannelKind::Input;
  const double rho = spectral_radius(a);
  if (rho >= 1.0) a *= max_radius / rho;
  return PlantSpec{std::move(a), std::move(b), std::move(observables), std::move(inputs), std::move(noise_sd), {}, {}};
}

std::vector<std::string> PlantSpec::observable_names() const {
  std::vector<std::string> out;
  for (const auto& c : observables) out.push_back(c.name);
  return out;
}

std::vector<std::string> PlantSpec::input_names() const {
  std::vector<std::string> out;
  for (const auto& c : inputs) out.push_back(c.name);
  return out;
}

namespace {

MatrixXd gaussian_matrix(Index rows, Index cols, std::mt19937_64& rng) {
  std::normal_distribution<double> n01;
  MatrixXd m(rows, cols);
  for (Index j = 0; j < cols; ++j)
    for (Index i = 0; i < rows; ++i) m(i, j) = n01(rng);
  return m;
}

std::vector<ChannelSpec> numbered(const std::string& prefix, Index n, ChannelKind kind) {
  std::vector<ChannelSpec> out;
  for (Index i = 0; i < n; ++i) out.push_back({prefix + std::to_string(i), "", kind});
  return out;
}

}  // namespace

PlantSpec random_stable_plant(Index q, Index p, double radius, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  MatrixXd a = gaussian_matrix(q, q, rng);
  const double rho = spectral_radius(a);
  if (rho > 0.0) a *= radius / rho;
  MatrixXd b = gaussian_matrix(q, p, rng);
  return PlantSpec::make(std::move(a), std::move(b), numbered("y", q, ChannelKind::Observable),
                         numbered("u", p, ChannelKind::Input));
}

PlantSpec with_unit_variance_observables(const PlantSpec& spec, const TimeSeriesDataset& inputs,
                                         const VectorXd& y0) {
  PlantSpec clean = spec;
  std::fill(clean.noise_sd.begin(), clean.noise_sd.end(), 0.0);
  clean.dropout.reset();
  const auto sim = simulate(clean, inputs, y0, 0);
  const VectorXd mean = sim.clean.colwise().mean();
  const VectorXd sd = ((sim.clean.rowwise() - mean.transpose()).colwise().squaredNorm() /
                       static_cast<double>(sim.clean.rows()))
                          .cwiseSqrt();
  if ((sd.array() <= 0.0).any())
    throw Error(ErrorCode::ConstantChannel, "an observable is constant under the given inputs");
  const VectorXd d = sd.cwiseInverse();
  PlantSpec out = spec;
  out.a_true = d.asDiagonal() * spec.a_true * sd.asDiagonal();
  out.b_true = d.asDiagonal() * spec.b_true;
  if (spec.offset.size() > 0) out.offset = d.asDiagonal() * spec.offset;
  return out;
}

Simulation simulate(const PlantSpec& spec, const TimeSeriesDataset& inputs, const VectorXd& y0,
                    std::uint64_t seed) {
  const Index q = spec.a_true.rows();
  if (y0.size() != q) throw Error(ErrorCode::DimensionMismatch, "y0 length differs from observable count");
  const MatrixXd u = inputs.columns(spec.input_names());  // rows x p
  const Index n = inputs.row_count();

  Simulation out;
  out.clean.resize(n, q);
  if (n > 0) {
    VectorXd y = y0;
    out.clean.row(0) = y.transpose();
    for (Index t = 0; t + 1 < n; ++t) {
      y = spec.a_true * y + spec.b_true * u.row(t).transpose();
      out.clean.row(t + 1) = y.transpose();
    }
  }
  if (spec.offset.size() == q) out.clean.rowwise() += spec.offset.transpose();
  else if (spec.offset.size() != 0) throw Error(ErrorCode::DimensionMismatch, "offset length differs from q");

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n01;
  MatrixXd observed = out.clean;
  for (Index t = 0; t < n; ++t)
    for (Index o = 0; o < q; ++o)
      if (spec.noise_sd[static_cast<size_t>(o)] > 0.0) observed(t, o) += spec.noise_sd[static_cast<size_t>(o)] * n01(rng);

  if (spec.dropout && spec.dropout->probability > 0.0) {
    const auto& d = *spec.dropout;
    Index col = -1;
    for (Index o = 0; o < q; ++o)
      if (spec.observables[static_cast<size_t>(o)].name == d.channel) col = o;
    if (col < 0) throw Error(ErrorCode::UnknownChannel, "dropout channel " + d.channel);
    std::optional<VectorXd> gate;
    if (!d.gate_channel.empty()) gate = inputs.column(d.gate_channel);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    for (Index t = 0; t < n; ++t) {
      if (gate && !((*gate)(t) > 0.0)) continue;
      ++out.eligible;
      if (unif(rng) < d.probability) {
        observed(t, col) = d.sentinel;
        ++out.dropped;
      }
    }
  }

  out.data = inputs.select(spec.input_names());
  for (auto& c : out.data.channels) c.kind = ChannelKind::Input;
  const Index p = out.data.data.cols();
  out.data.data.conservativeResize(Eigen::NoChange, p + q);
  out.data.data.rightCols(q) = observed;
  for (const auto& c : spec.observables) out.data.channels.push_back(c);
  return out;
}

TimeSeriesDataset piecewise_constant_inputs(std::span<const ChannelSpec> channels, Index rows, double sample_rate_hz,
                                            Index min_hold, Index max_hold, std::uint64_t seed,
                                            std::string experiment_id) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> level;
  std::uniform_int_distribution<Index> hold(std::max<Index>(min_hold, 1), std::max(min_hold, max_hold));
  TimeSeriesDataset ds;
  ds.experiment_id = std::move(experiment_id);
  ds.sample_rate_hz = sample_rate_hz;
  ds.channels.assign(channels.begin(), channels.end());
  for (auto& c : ds.channels) c.kind = ChannelKind::Input;
  ds.data.resize(rows, static_cast<Index>(channels.size()));
  for (Index j = 0; j < ds.data.cols(); ++j) {
    Index t = 0;
    while (t < rows) {
      const Index len = std::min(hold(rng), rows - t);
      ds.data.col(j).segment(t, len).setConstant(level(rng));
      t += len;
    }
  }
  return ds;
}

// ---------------------------------------------------------------------------
// G-code

namespace {

struct Word {
  char letter;
  double value;
};

std::string line_error(size_t line_no, std::string_view what) {
  return "line " + std::to_string(line_no) + ": " + std::string(what);
}

std::vector<Word> tokenize(std::string_view line, size_t line_no) {
  std::vector<Word> words;
  size_t i = 0;
  while (i < line.size()) {
    const char c = line[i];
    if (std::isspace(static_cast<unsigned char>(c))) {
      ++i;
      continue;
    }
    if (!std::isalpha(static_cast<unsigned char>(c)))
      throw Error(ErrorCode::MalformedNumber, line_error(line_no, std::string("unexpected '") + c + "'"));
    const char letter = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
    size_t j = i + 1;
    while (j < line.size() && (std::isdigit(static_cast<unsigned char>(line[j])) || line[j] == '.' ||
                               line[j] == '-' || line[j] == '+'))
      ++j;
    std::string_view num = line.substr(i + 1, j - i - 1);
    if (!num.empty() && num.front() == '+') num.remove_prefix(1);
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(num.data(), num.data() + num.size(), v);
    if (num.empty() || ec != std::errc{} || ptr != num.data() + num.size()) {
      throw Error(ErrorCode::MalformedNumber,
                  line_error(line_no, std::string("bad number after '") + letter + "': '" + std::string(num) + "'"));
    }
    words.push_back({letter, v});
    i = j;
  }
  return words;
}

std::string strip_comments(std::string_view raw) {
  std::string out;
  int depth = 0;
  for (char c : raw) {
    if (c == ';' && depth == 0) break;
    if (c == '(') {
      ++depth;
      continue;
    }
    if (c == ')' && depth > 0) {
      --depth;
      continue;
    }
    if (depth == 0) out += c;
  }
  return out;
}

std::string word_text(const Word& w) {
  std::ostringstream s;
  s << w.letter << w.value;
  return s.str();
}

}  // namespace

ToolpathProgram parse_gcode_subset(std::string_view text) {
  ToolpathProgram program;
  double feed = 0.0;
  size_t line_no = 0;
  size_t pos = 0;
  while (pos <= text.size()) {
    const size_t nl = text.find('\n', pos);
    const std::string_view raw = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
    pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
    ++line_no;

    const auto words = tokenize(strip_comments(raw), line_no);
    if (words.empty()) continue;
    const Word& head = words.front();
    const bool integral = head.value == std::floor(head.value);
    const int code = static_cast<int>(head.value);

    if (head.letter == 'G' && integral && (code == 0 || code == 1)) {
      LinearMove m;
      m.rapid = code == 0;
      for (size_t k = 1; k < words.size(); ++k) {
        const auto& w = words[k];
        switch (w.letter) {
          case 'X': m.x = w.value; break;
          case 'Y': m.y = w.value; break;
          case 'Z': m.z = w.value; break;
          case 'F':
            if (w.value < 0.0) throw Error(ErrorCode::MalformedNumber, line_error(line_no, "negative feed"));
            feed = w.value;
            break;
          default:
            throw Error(ErrorCode::UnsupportedWord, line_error(line_no, word_text(w)));
        }
      }
      m.feed_mm_min = feed;
      program.commands.emplace_back(m);
    } else if (head.letter == 'G' && integral && code == 4) {
      if (words.size() != 2 || words[1].letter != 'P')
        throw Error(ErrorCode::UnsupportedWord, line_error(line_no, "G4 takes exactly one P word (seconds)"));
      if (words[1].value < 0.0) throw Error(ErrorCode::MalformedNumber, line_error(line_no, "negative dwell"));
      program.commands.emplace_back(Dwell{words[1].value});
    } else if (head.letter == 'M' && integral && code == 3) {
      if (words.size() != 2 || words[1].letter != 'S')
        throw Error(ErrorCode::UnsupportedWord, line_error(line_no, "M3 takes exactly one S word (watts)"));
      if (words[1].value < 0.0) throw Error(ErrorCode::MalformedNumber, line_error(line_no, "negative power"));
      program.commands.emplace_back(SetPower{words[1].value});
    } else if (head.letter == 'M' && integral && code == 5) {
      if (words.size() != 1) throw Error(ErrorCode::UnsupportedWord, line_error(line_no, word_text(words[1])));
      program.commands.emplace_back(SetPower{0.0});
    } else {
      throw Error(ErrorCode::UnsupportedWord, line_error(line_no, word_text(head)));
    }
  }
  return program;
}

namespace {

struct Segment {
  double t0 = 0.0;
  double duration = 0.0;
  Vector3d from = Vector3d::Zero();
  Vector3d to = Vector3d::Zero();
  double feed = 0.0;  // 0 for dwells
  double power = 0.0;
  double distance_before = 0.0;
  double laser_on_before = 0.0;
};

std::vector<Segment> to_segments(const ToolpathProgram& program) {
  std::vector<Segment> segs;
  Vector3d pos = Vector3d::Zero();
  double power = 0.0;
  double t = 0.0;
  double dist = 0.0;
  double on = 0.0;
  for (const auto& cmd : program.commands) {
    if (const auto* sp = std::get_if<SetPower>(&cmd)) {
      power = sp->watts;
      continue;
    }
    Segment s;
    s.t0 = t;
    s.from = pos;
    s.power = power;
    s.distance_before = dist;
    s.laser_on_before = on;
    if (const auto* m = std::get_if<LinearMove>(&cmd)) {
      Vector3d target = pos;
      if (m->x) target.x() = *m->x;
      if (m->y) target.y() = *m->y;
      if (m->z) target.z() = *m->z;
      const double len = (target - pos).norm();
      if (len == 0.0) continue;
      if (!(m->feed_mm_min > 0.0)) throw Error(ErrorCode::ZeroFeedMove, "move of " + format_double(len) + " mm");
      s.to = target;
      s.feed = m->feed_mm_min;
      s.duration = len / (m->feed_mm_min / 60.0);
      dist += len;
      pos = target;
    } else {
      const auto& d = std::get<Dwell>(cmd);
      if (d.seconds == 0.0) continue;
      s.to = pos;
      s.duration = d.seconds;
    }
    if (power > 0.0) on += s.duration;
    t += s.duration;
    segs.push_back(s);
  }
  return segs;
}

}  // namespace

double path_length(const ToolpathProgram& program) {
  double total = 0.0;
  for (const auto& s : to_segments(program)) total += (s.to - s.from).norm();
  return total;
}

TimeSeriesDataset program_to_timeseries(const ToolpathProgram& program, double sample_rate_hz,
                                        std::string experiment_id) {
  if (!(sample_rate_hz > 0.0)) throw Error(ErrorCode::InvalidConfig, "sample rate must be positive");
  const auto segs = to_segments(program);
  const double total = segs.empty() ? 0.0 : segs.back().t0 + segs.back().duration;
  const auto n = static_cast<Index>(std::llround(total * sample_rate_hz));

  TimeSeriesDataset ds;
  ds.experiment_id = std::move(experiment_id);
  ds.sample_rate_hz = sample_rate_hz;
  for (const char* name : {channel::kX, channel::kY, channel::kZ, channel::kScanRate, channel::kHeading,
                           channel::kDistance, channel::kPower, channel::kProgramTime, channel::kLaserOnTime})
    ds.channels.push_back({name, "", ChannelKind::Input});
  ds.channels[0].unit = ds.channels[1].unit = ds.channels[2].unit = ds.channels[5].unit = "mm";
  ds.channels[3].unit = "mm/min";
  ds.channels[4].unit = "deg";
  ds.channels[6].unit = "W";
  ds.channels[7].unit = ds.channels[8].unit = "s";
  ds.data.resize(n, static_cast<Index>(ds.channels.size()));

  size_t k = 0;
  double heading = 0.0;
  size_t heading_seg = segs.size();
  for (Index i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) / sample_rate_hz;
    while (k + 1 < segs.size() && t >= segs[k].t0 + segs[k].duration) ++k;
    const Segment& s = segs[k];
    const double frac = std::clamp((t - s.t0) / s.duration, 0.0, 1.0);
    const Vector3d delta = s.to - s.from;
    const Vector3d p = s.from + frac * delta;
    if (heading_seg != k && (delta.x() != 0.0 || delta.y() != 0.0)) {
      heading = std::atan2(delta.y(), delta.x()) * 180.0 / std::numbers::pi;
      if (heading < 0.0) heading += 360.0;
      heading_seg = k;
    }
    ds.data(i, 0) = p.x();
    ds.data(i, 1) = p.y();
    ds.data(i, 2) = p.z();
    ds.data(i, 3) = s.feed;
    ds.data(i, 4) = heading;
    ds.data(i, 5) = s.distance_before + frac * delta.norm();
    ds.data(i, 6) = s.power;
    ds.data(i, 7) = t;
    ds.data(i, 8) = s.laser_on_before + (s.power > 0.0 ? std::min(t - s.t0, s.duration) : 0.0);
  }
  return ds;
}

// ---------------------------------------------------------------------------
// Synthetic campaign

std::string serpentine_gcode(const RasterPart& part) {
  std::ostringstream g;
  g << "; serpentine raster " << part.width_mm << " x " << part.height_mm << " mm, " << part.layers << " layers\n";
  const int lines = std::max(1, static_cast<int>(std::floor(part.height_mm / part.hatch_mm + 1e-9)) + 1);
  size_t power_idx = 0;
  for (int layer = 0; layer < part.layers; ++layer) {
    const double z = part.layer_mm * (layer + 1);
    g << "G0 X0 Y0 Z" << z << " F" << part.travel_feed_mm_min << "\n";
    for (int l = 0; l < lines; ++l) {
      const double y = l * part.hatch_mm;
      const bool forward = l % 2 == 0;
      if (l > 0) g << "G0 Y" << y << " F" << part.travel_feed_mm_min << "\n";
      g << "M3 S" << part.line_powers_w[power_idx++ % part.line_powers_w.size()] << "\n";
      g << "G1 X" << (forward ? part.width_mm : 0.0) << " F" << part.feed_mm_min << "\n";
      g << "M5\n";
    }
    g << "G4 P" << part.layer_delay_s << " ; post layer delay\n";
  }
  return g.str();
}

namespace {

constexpr const char* kMeltPoolSize = "melt_pool_size_mm";
constexpr const char* kMeltPoolTemp = "melt_pool_temp_c";
constexpr const char* kWorkingDistance = "working_distance_mm";
constexpr const char* kLayer = "layer";
constexpr const char* kInfillFlag = "infill_flag";
constexpr const char* kContourFlag = "contour_flag";
constexpr const char* kShieldGas = "shield_gas_l_min";

}  // namespace

std::vector<ChannelSpec> ded_schema() {
  std::vector<ChannelSpec> s = {
      {channel::kX, "mm", ChannelKind::Input},
      {channel::kY, "mm", ChannelKind::Input},
      {channel::kZ, "mm", ChannelKind::Input},
      {channel::kScanRate, "mm/min", ChannelKind::Input},
      {channel::kHeading, "deg", ChannelKind::Input},
      {channel::kDistance, "mm", ChannelKind::Input},
      {channel::kPower, "W", ChannelKind::Input},
      {channel::kProgramTime, "s", ChannelKind::Input},
      {channel::kLaserOnTime, "s", ChannelKind::Input},
      {kLayer, "#", ChannelKind::Input},
      {kInfillFlag, "0/1", ChannelKind::Input},
      {kContourFlag, "0/1", ChannelKind::Input},
      {kShieldGas, "l/min", ChannelKind::Input},
      {kMeltPoolSize, "mm", ChannelKind::Observable},
      {kMeltPoolTemp, "C", ChannelKind::Observable},
      {kWorkingDistance, "mm", ChannelKind::Observable},
  };
  return s;
}

PlantSpec ded_plant(double noise_scale) {
  std::vector<ChannelSpec> inputs;
  std::vector<ChannelSpec> observables;
  for (const auto& c : ded_schema()) (c.kind == ChannelKind::Input ? inputs : observables).push_back(c);

  // Coupled size/temperature pair plus a slower working-distance mode.
  MatrixXd a(3, 3);
  a << 0.90, 5e-5, 0.0,
       20.0, 0.92, 0.0,
       0.0,  0.0,  0.94;
  // Steady-state gains from (power, scan rate, layer); B = (I - A) K.
  MatrixXd gains = MatrixXd::Zero(3, static_cast<Index>(inputs.size()));
  auto col = [&](const char* name) {
    for (size_t j = 0; j < inputs.size(); ++j)
      if (inputs[j].name == name) return static_cast<Index>(j);
    return Index{-1};
  };
  gains(0, col(channel::kPower)) = 0.0022;
  gains(0, col(channel::kScanRate)) = -0.0004;
  gains(0, col(kLayer)) = 0.01;
  gains(1, col(channel::kPower)) = 2.6;
  gains(1, col(channel::kScanRate)) = -0.25;
  gains(1, col(kLayer)) = 8.0;
  gains(2, col(channel::kPower)) = 0.012;
  gains(2, col(channel::kScanRate)) = 0.002;
  gains(2, col(kLayer)) = -0.05;
  MatrixXd b = (MatrixXd::Identity(3, 3) - a) * gains;

  std::vector<double> noise = {0.01 * noise_scale, 5.0 * noise_scale, 0.05 * noise_scale};
  auto plant = PlantSpec::make(a, b, observables, inputs, noise);
  // Baselines with the laser off: small pool, ambient-ish reading, nominal standoff.
  plant.offset = Eigen::Vector3d(0.3, 300.0, 0.5);
  return plant;
}

std::vector<CampaignExperiment> synthesize_campaign(const CampaignOptions& options) {
  std::mt19937_64 rng(options.seed);
  std::uniform_real_distribution<double> width(8.0, 30.0);
  std::uniform_real_distribution<double> height(3.0, 6.0);
  std::uniform_real_distribution<double> power(100.0, 900.0);
  std::uniform_real_distribution<double> delay(0.5, 2.0);
  std::uniform_int_distribution<int> layers(2, 3);
  const double feeds[] = {600.0, 900.0, 1200.0, 1500.0};
  std::uniform_int_distribution<int> feed_pick(0, 3);

  auto plant = options.plant ? *options.plant : ded_plant(options.noise_scale);
  if (options.dropout_probability > 0.0 && !plant.dropout)
    plant.dropout = SentinelDropout{kWorkingDistance, options.dropout_probability, -1.0, channel::kPower};

  std::vector<CampaignExperiment> out;
  for (size_t e = 0; e < options.experiments; ++e) {
    RasterPart part;
    part.width_mm = std::round(width(rng));
    part.height_mm = std::round(height(rng));
    part.layers = layers(rng);
    part.feed_mm_min = feeds[feed_pick(rng)];
    part.layer_delay_s = std::round(delay(rng) * 10.0) / 10.0;
    part.line_powers_w = {std::round(power(rng)), std::round(power(rng)), std::round(power(rng))};

    CampaignExperiment ex;
    ex.gcode = serpentine_gcode(part);
    char id[32];
    std::snprintf(id, sizeof(id), "exp%02zu", e + 1);
    auto ds = program_to_timeseries(parse_gcode_subset(ex.gcode), options.sample_rate_hz, id);

    const Index n = ds.row_count();
    const VectorXd z = ds.column(channel::kZ);
    const VectorXd p = ds.column(channel::kPower);
    MatrixXd extra(n, 4);
    for (Index i = 0; i < n; ++i) {
      extra(i, 0) = std::round(z(i) / part.layer_mm);
      extra(i, 1) = p(i) > 0.0 ? 1.0 : 0.0;
      extra(i, 2) = 1.0 - extra(i, 1);
      extra(i, 3) = 12.0;
    }
    for (const char* name : {kLayer, kInfillFlag, kContourFlag, kShieldGas})
      ds.channels.push_back({name, "", ChannelKind::Input});
    ds.data.conservativeResize(Eigen::NoChange, ds.data.cols() + 4);
    ds.data.rightCols(4) = extra;
    for (auto& c : ds.channels)
      for (const auto& s : ded_schema())
        if (s.name == c.name) c.unit = s.unit;

    ex.sim = simulate(plant, ds, VectorXd::Zero(3), options.seed * 1000003ULL + e);
    out.push_back(std::move(ex));
  }
  return out;
}

namespace {

nlohmann::json matrix_rows(const MatrixXd& m) {
  nlohmann::json j = nlohmann::json::array();
  for (Index i = 0; i < m.rows(); ++i) {
    std::vector<double> row(static_cast<size_t>(m.cols()));
    for (Index k = 0; k < m.cols(); ++k) row[static_cast<size_t>(k)] = m(i, k);
    j.push_back(row);
  }
  return j;
}

MatrixXd rows_matrix(const nlohmann::json& j, Index rows, Index cols) {
  if (static_cast<Index>(j.size()) != rows) throw Error(ErrorCode::InvalidConfig, "plant matrix row count");
  MatrixXd m(rows, cols);
  for (Index i = 0; i < rows; ++i) {
    const auto row = j[static_cast<size_t>(i)].get<std::vector<double>>();
    if (static_cast<Index>(row.size()) != cols) throw Error(ErrorCode::InvalidConfig, "plant matrix column count");
    for (Index k = 0; k < cols; ++k) m(i, k) = row[static_cast<size_t>(k)];
  }
  return m;
}

}  // namespace

nlohmann::json to_json(const PlantSpec& spec) {
  nlohmann::json j;
  j["A"] = matrix_rows(spec.a_true);
  j["B"] = matrix_rows(spec.b_true);
  j["observables"] = nlohmann::json::array();
  for (const auto& c : spec.observables) j["observables"].push_back(to_json(c));
  j["inputs"] = nlohmann::json::array();
  for (const auto& c : spec.inputs) j["inputs"].push_back(to_json(c));
  j["noise_sd"] = spec.noise_sd;
  if (spec.offset.size() > 0) j["offset"] = std::vector<double>(spec.offset.begin(), spec.offset.end());
  if (spec.dropout) {
    j["dropout"] = {{"channel", spec.dropout->channel},
                    {"probability", spec.dropout->probability},
                    {"sentinel", spec.dropout->sentinel},
                    {"gate_channel", spec.dropout->gate_channel}};
  }
  return j;
}

PlantSpec plant_from_json(const nlohmann::json& j) {
  try {
    std::vector<ChannelSpec> obs;
    std::vector<ChannelSpec> in;
    for (const auto& c : j.at("observables")) obs.push_back(channel_from_json(c));
    for (const auto& c : j.at("inputs")) in.push_back(channel_from_json(c));
    const auto q = static_cast<Index>(obs.size());
    const auto p = static_cast<Index>(in.size());
    auto spec = PlantSpec::make(rows_matrix(j.at("A"), q, q), rows_matrix(j.at("B"), q, p), obs, in,
                                j.value("noise_sd", std::vector<double>{}));
    if (j.contains("offset")) {
      const auto off = j["offset"].get<std::vector<double>>();
      if (static_cast<Index>(off.size()) != q) throw Error(ErrorCode::InvalidConfig, "plant offset length");
      spec.offset = Eigen::Map<const VectorXd>(off.data(), q);
    }
    if (j.contains("dropout")) {
      const auto& d = j["dropout"];
      spec.dropout = SentinelDropout{d.at("channel").get<std::string>(), d.at("probability").get<double>(),
                                     d.value("sentinel", -1.0), d.value("gate_channel", "")};
    }
    return spec;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::InvalidConfig, std::string("plant spec: ") + e.what());
  }
}

}  // namespace omm
