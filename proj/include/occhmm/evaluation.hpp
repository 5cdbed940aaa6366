#pragma once

// Detection metrics of a posterior trace against ground truth.

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "occhmm/control.hpp"
#include "occhmm/scene_simulator.hpp"
#include "occhmm/stream_io.hpp"

namespace occhmm::eval {

class EvalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Maximal runs of nonzero entries, as 1-based intervals.
std::vector<sim::Interval> runs(const std::vector<std::uint8_t>& labels);

struct EventMetrics {
  bool is_change = false;
  std::size_t camera = 0;  // occlusions only
  sim::Interval span;
  bool detected = false;
  std::size_t delay = 0;  // frames from start to first detection
  double peak = 0.0;      // max posterior over the event
};

struct Report {
  std::size_t frames = 0;
  std::vector<EventMetrics> events;
  std::size_t false_alarms = 0;
  double false_alarm_rate = 0.0;  // per 1000 frames
  std::vector<double> final_iou;  // per camera, empty if not tracked
};

/// Alarms count as hits within `tolerance` frames of a change; every other
/// alarm frame is a false alarm. An occlusion is detected once
/// P[O_n] > occlusion_threshold inside the same window.
Report evaluate(const std::vector<io::PosteriorRow>& trace,
                const sim::GroundTruth& truth,
                const control::ControlConfig& thresholds,
                std::size_t tolerance = 2);

/// Last-frame IoU per camera from a track CSV table.
std::vector<double> final_iou(const io::CsvTable& track);

void write_report(std::ostream& os, const Report& report);

}  // namespace occhmm::eval
