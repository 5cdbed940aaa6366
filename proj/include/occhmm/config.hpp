#pragma once

// Run configuration: a flat text file of `key = value` lines. Keys use dotted
// sections (`model.mu = 1.5`); a `[model]` header prefixes the keys after it.
// `#` and `;` start comments. Unknown keys are rejected.

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "occhmm/control.hpp"
#include "occhmm/hmm_filter.hpp"
#include "occhmm/scene_simulator.hpp"
#include "occhmm/subspace_model.hpp"

namespace occhmm {

inline constexpr int kFormatVersion = 1;
inline constexpr const char* kConfigEnvVar = "OCCHMM_CONFIG";

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct TrackerParams {
  std::size_t num_features = 64;
  int search_radius = 6;
  std::uint64_t feature_seed = 7;
};

struct CalibrationParams {
  bool enabled = false;
  std::size_t window = 50;
  /// m_max is at least this multiple of the calibrated mu.
  double min_separation = 10.0;
};

struct RunConfig {
  std::uint64_t seed = 1;
  std::size_t n_cameras = 4;

  EmissionParams emission;
  std::pair<double, double> s_stay{0.99, 0.80};
  std::pair<double, double> o_stay{0.95, 0.70};
  std::map<std::size_t, std::pair<double, double>> o_stay_per_camera;
  double prior_normal = 0.99;
  CalibrationParams calibration;

  subspace::ModelConfig subspace;
  TrackerParams tracker;
  control::ControlConfig control;
  sim::ScenarioConfig scenario;

  std::string stream_path;
  std::string out_path;
  std::string truth_path;

  ModelParams model_params() const;
  /// Copies the shared fields (seed, camera count, model) into the scenario.
  sim::ScenarioConfig resolved_scenario() const;
  /// Throws ConfigError describing the first invalid value.
  void validate() const;
  /// Non-fatal issues worth reporting.
  std::vector<std::string> warnings() const;

  /// Named starting points: "paper-analog", "detection", "drift".
  static RunConfig preset(const std::string& name, std::uint64_t seed = 1);
};

/// Raw key/value pairs after section expansion, in file order.
std::vector<std::pair<std::string, std::string>> parse_key_values(
    const std::string& text);

/// Applies `text` on top of `base`. Throws ConfigError on malformed lines,
/// bad values or unknown keys (all unknown keys are listed).
RunConfig apply_config_text(const std::string& text, RunConfig base = {});

RunConfig load_config_file(const std::filesystem::path& path,
                           RunConfig base = {});

/// Explicit path, else $OCCHMM_CONFIG, else nothing.
std::optional<std::filesystem::path> resolve_config_path(
    const std::optional<std::string>& explicit_path);

/// The effective configuration as config-file text.
std::string dump_config(const RunConfig& config);

}  // namespace occhmm
