#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "vfl/diagnostics.hpp"
#include "vfl/evolution.hpp"
#include "vfl/reconnection.hpp"
#include "vfl/scenarios.hpp"

namespace vfl {

enum class Scenario { Eye, PolygonalEye, PairReconnection, RhombusCheck, GridImpulse, RiemannReference };

std::string to_string(Scenario s);
Scenario scenario_from_string(const std::string& s);

enum class SliceAxis { Coordinate, Parameter };

struct ObserverConfig {
  double sample_dt = 1.5339807878856412e-3;  // pi / 2048
  std::optional<int> corner_stride = 1;
  std::optional<int> impulse_stride = 1;
  double impulse_window = kTwoPi;  ///< l of the centred window; 2pi is the full impulse
  std::optional<int> slice_stride;
  double slice_dq = 0.05;
  SliceAxis slice_axis = SliceAxis::Coordinate;
  double spectrum_window = 1.5707963267948966;  // pi / 2
  int dominance_n_max = 8;
};

struct CurvatureConfig {
  double resolution = kTwoPi / 128;  ///< target chord length of the coarse polygon
  double half_width = 0.19634954084936207;  // pi / 16
};

struct PairRunConfig {
  PairParams params{};
  double t_max = 3.0;    ///< give up waiting for the trigger after this time
  double t_after = 3.141592653589793;
  std::optional<double> t_rec_reference;
  /// x3 bins count as occupied above this fraction of the largest slice
  /// modulus at t_rec.
  double support_threshold = 0.05;
  /// The separation fit stops once the support has shrunk by this fraction
  /// of its half-extent at t_rec.
  double support_fit_fraction = 0.25;
  std::optional<double> exponent_reference;
};

struct GridRunConfig {
  std::string header;  ///< empty: synthetic ring
  int n = 64;
  double half_width = 2.0;
  double radius = 1.0;
  double gamma = 1.0;
  double core = 0.2;
  double slab_dz = 0.0;  ///< 0: one slab covering the grid
};

struct RunConfig {
  Scenario scenario = Scenario::Eye;
  EyeParams eye{1.0, 0.0, 1024};
  PolyEyeParams polygonal_eye{};
  int nodes_per_side = 64;
  double t_end = 1.5707963267948966;
  PairRunConfig pair{};
  int rhombus_tuples = 1000;
  std::uint64_t seed = 1;
  GridRunConfig grid{};
  int riemann_truncation = 20;
  int riemann_samples = 1024;
  RhsConfig rhs{};
  StepController controller{};
  double tau_initial = 0.0;
  ObserverConfig observers{};
  CurvatureConfig curvature{};
  ReconnectionCriterion criterion = ReconnectionCriterion::DistanceThreshold;
  double th_x1 = kDefaultThX1;
  double th_F = 0.0;
  /// "<metric>_min" / "<metric>_max" thresholds; only these gate the exit code.
  std::map<std::string, double> acceptance;
  std::filesystem::path output_dir = "out";
};

/// Parses a JSON config. Unknown keys and out-of-range values raise ConfigError.
RunConfig parse_run_config(const nlohmann::json& j);
nlohmann::json to_json(const RunConfig& cfg);

/// Sets a dotted key path ("rhs.epsilon") in a JSON document; the value is
/// read as JSON when it parses and as a string otherwise.
void apply_override(nlohmann::json& doc, const std::string& assignment);

struct Metric {
  std::string name;
  double value = 0.0;
  std::optional<double> min;
  std::optional<double> max;

  bool gated() const { return min.has_value() || max.has_value(); }
  bool passed() const { return (!min || value >= *min) && (!max || value <= *max); }
};

struct SliceRecord {
  double t = 0.0;
  SliceProfile profile;
};

struct SeriesBundle {
  std::optional<CornerTrack> corner;
  std::optional<ImpulseSeries> impulse;
  std::optional<Spectrum> spectrum;
  std::optional<std::vector<SliceRecord>> slices;
};

struct RunManifest {
  nlohmann::json config;
  std::string code_version;
  double wall_time_seconds = 0.0;
  std::vector<ReconnectionEvent> events;
  std::vector<Metric> metrics;
  std::vector<std::string> outputs;
  std::vector<std::string> notes;

  bool all_passed() const;
};

struct RunResult {
  RunManifest manifest;
  SeriesBundle series;
};

/// Runs the configured pipeline without touching the file system.
RunResult execute_scenario(const RunConfig& cfg);

/// Writes the CSV files for the series present and then manifest.json
/// (atomically, via a temporary file and rename). Returns the file names.
std::vector<std::string> write_outputs(const SeriesBundle& series, RunManifest& manifest,
                                       const std::filesystem::path& dir);

/// execute_scenario followed by write_outputs into cfg.output_dir.
RunManifest run_scenario(const RunConfig& cfg);

nlohmann::ordered_json to_json(const RunManifest& m);

/// Shortest decimal string that reads back to the same double.
std::string format_double(double v);

std::string code_version();

}  // namespace vfl
