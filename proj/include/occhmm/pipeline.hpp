#pragma once

// End-to-end drivers: residuals -> filter -> controller, optionally with
// per-camera subspace predictors in front and trackers behind.

#include <cstddef>
#include <optional>
#include <vector>

#include "occhmm/config.hpp"
#include "occhmm/control.hpp"
#include "occhmm/hmm_filter.hpp"
#include "occhmm/image.hpp"
#include "occhmm/stream_io.hpp"

namespace occhmm::pipeline {

/// Emission parameters fitted to residuals from normal operation: mu is
/// their mean, m_max is twice their 99.9th percentile but at least
/// min_separation * mu.
EmissionParams calibrate_emission(const std::vector<double>& residuals,
                                  double min_separation);

/// Online filter + controller. With calibration enabled, the first
/// `window` calibration frames are filtered with the configured emission
/// parameters; afterwards the fitted ones are used.
class ResidualFilter {
 public:
  explicit ResidualFilter(const RunConfig& config);

  struct Output {
    io::PosteriorRow row;
    BeliefState belief;
  };

  /// `calibration_ready` marks frames whose residuals may feed calibration.
  Output push(const ObservationVector& z, bool calibration_ready = true);

  const ModelParams& params() const noexcept { return params_; }
  bool calibrated() const noexcept { return calibrated_; }

 private:
  ModelParams params_;
  CalibrationParams calibration_;
  control::Controller controller_;
  BeliefState belief_;
  std::vector<double> calibration_residuals_;
  std::size_t calibration_frames_ = 0;
  bool calibrated_ = false;
};

struct FilterResult {
  std::vector<io::PosteriorRow> rows;
  std::vector<BeliefState> beliefs;
  std::vector<std::vector<double>> residuals;  // [t-1][camera]
  EmissionParams emission;                     // parameters in force at the end
};

/// Filters a parsed stream. Patch streams go through one subspace model per
/// camera first, updated with gated_update semantics.
FilterResult filter_stream(const io::Stream& stream, const RunConfig& config);

struct TrackRow {
  std::size_t t = 0;
  std::size_t camera = 0;
  BoundingBox box;
  BoundingBox truth;
  double iou = 0.0;
  double score = 0.0;
  double z = 0.0;
  double lambda = 0.0;
  double p_occlusion = 0.0;
  double p_change = 0.0;
  bool alarm = false;
};

struct TrackResult {
  std::vector<TrackRow> rows;  // ordered by (t, camera)
  std::vector<io::PosteriorRow> posterior;

  /// IoU of camera `camera` at frame t (1-based).
  double iou_at(std::size_t t, std::size_t camera) const;
};

/// Runs one tracker per camera on the rendered scenario. With
/// `fixed_lambda` every tracker learns at that rate; otherwise the rate
/// comes from the controller.
TrackResult track(const RunConfig& config, std::optional<double> fixed_lambda,
                  std::optional<int> radius_override = std::nullopt);

void write_track_header(std::ostream& os);
void write_track_row(std::ostream& os, const TrackRow& row);

}  // namespace occhmm::pipeline
