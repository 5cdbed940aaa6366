#include "occhmm/evaluation.hpp"

#include <algorithm>
#include <map>
#include <ostream>

#include "occhmm/format.hpp"

namespace occhmm::eval {

std::vector<sim::Interval> runs(const std::vector<std::uint8_t>& labels) {
  std::vector<sim::Interval> out;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (!labels[i]) continue;
    if (!out.empty() && out.back().last() == i) {
      ++out.back().duration;
    } else {
      out.push_back({i + 1, 1});
    }
  }
  return out;
}

namespace {

template <typename Detect, typename Value>
EventMetrics measure(const std::vector<io::PosteriorRow>& trace,
                     sim::Interval span, std::size_t tolerance, Detect detect,
                     Value value) {
  EventMetrics m;
  m.span = span;
  const std::size_t end = std::min(span.last() + tolerance, trace.size());
  for (std::size_t t = span.start; t <= end; ++t) {
    if (detect(trace[t - 1])) {
      m.detected = true;
      m.delay = t - span.start;
      break;
    }
  }
  for (std::size_t t = span.start; t <= span.last(); ++t) {
    m.peak = std::max(m.peak, value(trace[t - 1]));
  }
  return m;
}

}  // namespace

Report evaluate(const std::vector<io::PosteriorRow>& trace,
                const sim::GroundTruth& truth,
                const control::ControlConfig& thresholds,
                std::size_t tolerance) {
  if (trace.size() != truth.n_frames()) {
    throw EvalError("trace has " + std::to_string(trace.size()) +
                    " frames, ground truth has " +
                    std::to_string(truth.n_frames()));
  }
  for (std::size_t i = 0; i < trace.size(); ++i) {
    if (trace[i].t != i + 1) {
      throw EvalError("trace rows must be t = 1, 2, ...");
    }
    if (trace[i].p_occlusion.size() != truth.n_cameras()) {
      throw EvalError("trace has " + std::to_string(trace[i].p_occlusion.size()) +
                      " cameras, ground truth has " +
                      std::to_string(truth.n_cameras()));
    }
  }

  Report r;
  r.frames = trace.size();
  const auto changes = runs(truth.s);
  for (const auto& span : changes) {
    auto m = measure(
        trace, span, tolerance, [](const io::PosteriorRow& p) { return p.alarm; },
        [](const io::PosteriorRow& p) { return p.p_change; });
    m.is_change = true;
    r.events.push_back(m);
  }
  for (std::size_t n = 0; n < truth.n_cameras(); ++n) {
    for (const auto& span : runs(truth.o[n])) {
      auto m = measure(
          trace, span, tolerance,
          [&](const io::PosteriorRow& p) {
            return p.p_occlusion[n] > thresholds.occlusion_threshold;
          },
          [&](const io::PosteriorRow& p) { return p.p_occlusion[n]; });
      m.camera = n;
      r.events.push_back(m);
    }
  }

  for (std::size_t t = 1; t <= trace.size(); ++t) {
    if (!trace[t - 1].alarm) continue;
    const bool near_change =
        std::any_of(changes.begin(), changes.end(), [&](const auto& span) {
          return t + tolerance >= span.start && t <= span.last() + tolerance;
        });
    if (!near_change) ++r.false_alarms;
  }
  r.false_alarm_rate = r.frames ? 1000.0 * static_cast<double>(r.false_alarms) /
                                      static_cast<double>(r.frames)
                                : 0.0;
  return r;
}

std::vector<double> final_iou(const io::CsvTable& track) {
  const auto t_col = track.column("t");
  const auto cam_col = track.column("camera");
  const auto iou_col = track.column("iou");
  if (t_col < 0 || cam_col < 0 || iou_col < 0) {
    throw EvalError("track table needs t, camera and iou columns");
  }
  std::map<std::size_t, std::pair<std::size_t, double>> last;  // camera -> (t, iou)
  for (const auto& row : track.rows) {
    const std::size_t t = std::stoul(row[t_col]);
    const std::size_t cam = std::stoul(row[cam_col]);
    const double v = std::stod(row[iou_col]);
    auto& slot = last[cam];
    if (t >= slot.first) slot = {t, v};
  }
  std::vector<double> out;
  for (const auto& [cam, tv] : last) out.push_back(tv.second);
  return out;
}

void write_report(std::ostream& os, const Report& r) {
  os << "format_version=1\n";
  os << "frames=" << r.frames << '\n';
  std::size_t change_idx = 0;
  std::size_t occ_idx = 0;
  std::size_t n_changes = 0;
  for (const auto& e : r.events) n_changes += e.is_change ? 1 : 0;
  os << "change_events=" << n_changes << '\n';
  os << "occlusion_events=" << r.events.size() - n_changes << '\n';
  for (const auto& e : r.events) {
    std::string prefix;
    if (e.is_change) {
      prefix = "change." + std::to_string(++change_idx) + ".";
    } else {
      prefix = "occlusion." + std::to_string(++occ_idx) + ".";
      os << prefix << "camera=" << e.camera + 1 << '\n';
    }
    os << prefix << "start=" << e.span.start << '\n';
    os << prefix << "end=" << e.span.last() << '\n';
    os << prefix << "detected=" << (e.detected ? 1 : 0) << '\n';
    if (e.detected) os << prefix << "delay=" << e.delay << '\n';
    os << prefix << "peak=" << format_double(e.peak) << '\n';
  }
  os << "false_alarms=" << r.false_alarms << '\n';
  os << "false_alarm_rate_per_1000=" << format_double(r.false_alarm_rate) << '\n';
  if (!r.final_iou.empty()) {
    double sum = 0.0;
    for (std::size_t n = 0; n < r.final_iou.size(); ++n) {
      os << "final_iou." << n + 1 << '=' << format_double(r.final_iou[n]) << '\n';
      sum += r.final_iou[n];
    }
    os << "final_iou.mean="
       << format_double(sum / static_cast<double>(r.final_iou.size())) << '\n';
  }
}

}  // namespace occhmm::eval
