#include "occhmm/control.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>

namespace occhmm::control {

namespace {

bool in_unit(double v) { return v >= 0.0 && v <= 1.0; }

}  // namespace

void ControlConfig::validate() const {
  if (!in_unit(alarm_threshold)) {
    throw std::invalid_argument("control.alarm_threshold must be in [0, 1]");
  }
  if (!in_unit(occlusion_threshold)) {
    throw std::invalid_argument(
        "control.occlusion_threshold must be in [0, 1]");
  }
  if (!in_unit(lambda_normal)) {
    throw std::invalid_argument("control.lambda_normal must be in [0, 1]");
  }
  if (!in_unit(lambda_frozen)) {
    throw std::invalid_argument("control.lambda_frozen must be in [0, 1]");
  }
  if (alarm_debounce < 1) {
    throw std::invalid_argument("control.alarm_debounce must be >= 1");
  }
  if (release_threshold &&
      (!in_unit(*release_threshold) ||
       *release_threshold > occlusion_threshold)) {
    throw std::invalid_argument(
        "control.release_threshold must be in [0, occlusion_threshold]");
  }
}

double lambda_for(double p_occlusion, double p_change,
                  const ControlConfig& cfg) {
  const double p =
      cfg.freeze_on_change ? std::max(p_occlusion, p_change) : p_occlusion;
  return p > cfg.occlusion_threshold ? cfg.lambda_frozen : cfg.lambda_normal;
}

bool alarm(double p_change, const ControlConfig& cfg) {
  return p_change > cfg.alarm_threshold;
}

Controller::Controller(ControlConfig cfg, std::size_t num_cameras)
    : cfg_(cfg), frozen_(num_cameras, false) {
  cfg_.validate();
}

Controller::Decision Controller::update(const std::vector<double>& p_occlusion,
                                        double p_change) {
  if (p_occlusion.size() != frozen_.size()) {
    throw std::invalid_argument("controller expects " +
                                std::to_string(frozen_.size()) + " cameras");
  }
  Decision d;
  d.lambdas.resize(frozen_.size());
  for (std::size_t n = 0; n < frozen_.size(); ++n) {
    const double p = cfg_.freeze_on_change
                         ? std::max(p_occlusion[n], p_change)
                         : p_occlusion[n];
    if (p > cfg_.occlusion_threshold) {
      frozen_[n] = true;
    } else if (!cfg_.release_threshold || p <= *cfg_.release_threshold) {
      frozen_[n] = false;
    }
    d.lambdas[n] = frozen_[n] ? cfg_.lambda_frozen : cfg_.lambda_normal;
  }
  above_alarm_ = alarm(p_change, cfg_) ? above_alarm_ + 1 : 0;
  d.alarm = above_alarm_ >= cfg_.alarm_debounce;
  return d;
}

}  // namespace occhmm::control
