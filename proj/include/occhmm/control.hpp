#pragma once

// Maps filter posteriors to per-camera learning rates and the alarm flag.

#include <cstddef>
#include <optional>
#include <vector>

namespace occhmm::control {

struct ControlConfig {
  double alarm_threshold = 0.9;
  double occlusion_threshold = 0.5;
  double lambda_normal = 0.85;
  double lambda_frozen = 1.0;
  /// Freeze learning on a likely appearance change as well as on occlusion.
  bool freeze_on_change = true;
  /// Consecutive frames above alarm_threshold required to raise the alarm.
  std::size_t alarm_debounce = 1;
  /// When set, a frozen camera is released only once its probability drops
  /// to or below this value.
  std::optional<double> release_threshold;

  void validate() const;
};

/// lambda_frozen if max(p_occlusion, p_change) > occlusion_threshold,
/// lambda_normal otherwise (p_change ignored unless freeze_on_change).
double lambda_for(double p_occlusion, double p_change,
                  const ControlConfig& cfg);

/// True iff p_change > alarm_threshold.
bool alarm(double p_change, const ControlConfig& cfg);

/// Per-frame controller state for the optional hysteresis and debounce
/// settings. With the defaults it reproduces lambda_for() and alarm().
class Controller {
 public:
  Controller(ControlConfig cfg, std::size_t num_cameras);

  struct Decision {
    std::vector<double> lambdas;
    bool alarm = false;
  };

  Decision update(const std::vector<double>& p_occlusion, double p_change);

 private:
  ControlConfig cfg_;
  std::vector<bool> frozen_;
  std::size_t above_alarm_ = 0;
};

}  // namespace occhmm::control
