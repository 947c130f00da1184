#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "omm/dataset.hpp"

namespace omm {

// ---------------------------------------------------------------------------
// Ground-truth plant

struct SentinelDropout {
  std::string channel;
  double probability = 0.0;
  double sentinel = -1.0;
  std::string gate_channel;  // empty: every row is eligible; otherwise rows with gate > 0
};

struct PlantSpec {
  Eigen::MatrixXd a_true;  // q x q, spectral radius < 1
  Eigen::MatrixXd b_true;  // q x p
  std::vector<ChannelSpec> observables;
  std::vector<ChannelSpec> inputs;
  std::vector<double> noise_sd;  // per observable
  std::optional<SentinelDropout> dropout;
  Eigen::VectorXd offset;  // added to every observation; empty means zero

  // Validates shapes and rescales A onto spectral radius `max_radius` if it
  // is not already below 1.
  static PlantSpec make(Eigen::MatrixXd a, Eigen::MatrixXd b, std::vector<ChannelSpec> observables,
                        std::vector<ChannelSpec> inputs, std::vector<double> noise_sd = {},
                        double max_radius = 0.99);

  std::vector<std::string> observable_names() const;
  std::vector<std::string> input_names() const;
};

double spectral_radius(const Eigen::MatrixXd& a);

// Random A rescaled to the given spectral radius, Gaussian B. Channels are
// named y0.. and u0...
PlantSpec random_stable_plant(Eigen::Index q, Eigen::Index p, double radius, std::uint64_t seed);

// Row-wise rescaling of the observables so that, under `inputs` from the
// given initial state, every noise-free observable has unit population
// variance. The rescaled plant is the same system in different units.
PlantSpec with_unit_variance_observables(const PlantSpec& spec, const TimeSeriesDataset& inputs,
                                         const Eigen::VectorXd& y0);

struct Simulation {
  TimeSeriesDataset data;     // inputs then observables, with noise and dropout
  Eigen::MatrixXd clean;      // rows x q noise-free observables
  Eigen::Index dropped = 0;   // samples replaced by the sentinel
  Eigen::Index eligible = 0;  // rows where dropout could apply
};

// x[0] = y0, x[t+1] = A x[t] + B u[t], observed as x[t] + offset plus
// Gaussian noise, then optional sentinel dropout, all from one seeded
// generator. `clean` holds x[t] + offset.
Simulation simulate(const PlantSpec& spec, const TimeSeriesDataset& inputs, const Eigen::VectorXd& y0,
                    std::uint64_t seed);

// Inputs held constant for a random number of samples in [min_hold,
// max_hold], each level drawn from N(0, 1).
TimeSeriesDataset piecewise_constant_inputs(std::span<const ChannelSpec> channels, Eigen::Index rows,
                                            double sample_rate_hz, Eigen::Index min_hold, Eigen::Index max_hold,
                                            std::uint64_t seed, std::string experiment_id = "inputs");

// ---------------------------------------------------------------------------
// Minimal G-code front end. Supported lines:
//   G0/G1 [X..] [Y..] [Z..] [F..]   linear move, F in mm/min and modal
//   G4 P<seconds>                   dwell
//   M3 S<watts>                     laser on at the given power
//   M5                              laser off
// ';' starts a comment, '(...)' is a comment, blank lines are skipped.

struct LinearMove {
  std::optional<double> x, y, z;  // absolute; absent axes keep their value
  double feed_mm_min = 0.0;       // modal feed in effect
  bool rapid = false;
};
struct SetPower {
  double watts = 0.0;
};
struct Dwell {
  double seconds = 0.0;
};
using ToolpathCommand = std::variant<LinearMove, SetPower, Dwell>;

struct ToolpathProgram {
  std::vector<ToolpathCommand> commands;
};

ToolpathProgram parse_gcode_subset(std::string_view text);

// Channel names written by program_to_timeseries.
namespace channel {
inline constexpr const char* kX = "x_mm";
inline constexpr const char* kY = "y_mm";
inline constexpr const char* kZ = "z_mm";
inline constexpr const char* kScanRate = "scan_rate_mm_min";
inline constexpr const char* kHeading = "heading_deg";
inline constexpr const char* kDistance = "distance_mm";
inline constexpr const char* kPower = "power_w";
inline constexpr const char* kProgramTime = "program_time_s";
inline constexpr const char* kLaserOnTime = "laser_on_time_s";
}  // namespace channel

// Samples the machine state at t = i / rate for i < round(duration * rate),
// starting from the origin with the laser off. Positions move at constant
// feed along each segment; power holds between commands.
TimeSeriesDataset program_to_timeseries(const ToolpathProgram& program, double sample_rate_hz,
                                        std::string experiment_id = "program");

// Analytic path length of all moves.
double path_length(const ToolpathProgram& program);

// ---------------------------------------------------------------------------
// DED-flavoured synthetic campaign

struct RasterPart {
  double width_mm = 20.0;   // raster line length along X
  double height_mm = 10.0;  // extent along Y
  double hatch_mm = 1.0;
  int layers = 2;
  double layer_mm = 0.5;
  double feed_mm_min = 900.0;
  std::vector<double> line_powers_w = {400.0};  // cycled per raster line
  double travel_feed_mm_min = 3000.0;
  double layer_delay_s = 1.0;
};

// Serpentine raster: each layer scans lines along +X/-X alternately with the
// laser on, stepping in Y with the laser off.
std::string serpentine_gcode(const RasterPart& part);

struct CampaignOptions {
  size_t experiments = 8;
  double sample_rate_hz = 100.0;
  std::uint64_t seed = 1;
  double noise_scale = 1.0;
  double dropout_probability = 0.0;  // gated on power, working distance channel
  // Replaces the built-in plant; its inputs must be campaign channels.
  std::optional<PlantSpec> plant;
};

struct CampaignExperiment {
  std::string gcode;
  Simulation sim;
};

// Plant with melt pool size / temperature / working distance observables
// driven by the process inputs below. The input list includes a
// complementary flag pair and a constant channel on purpose.
PlantSpec ded_plant(double noise_scale = 1.0);
std::vector<ChannelSpec> ded_schema();
std::vector<CampaignExperiment> synthesize_campaign(const CampaignOptions& options);

nlohmann::json to_json(const PlantSpec& spec);
PlantSpec plant_from_json(const nlohmann::json& j);

}  // namespace omm
