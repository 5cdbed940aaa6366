#include "occhmm/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <stdexcept>

#include "occhmm/format.hpp"
#include "occhmm/scene_simulator.hpp"
#include "occhmm/subspace_model.hpp"
#include "occhmm/tracker_sim.hpp"

namespace occhmm::pipeline {

EmissionParams calibrate_emission(const std::vector<double>& residuals,
                                  double min_separation) {
  if (residuals.empty()) {
    throw std::invalid_argument("calibration needs at least one residual");
  }
  double sum = 0.0;
  for (double r : residuals) sum += r;
  const double mu = sum / static_cast<double>(residuals.size());
  if (!(mu > 0.0)) {
    throw std::invalid_argument("calibration residuals have zero mean");
  }
  std::vector<double> sorted = residuals;
  std::sort(sorted.begin(), sorted.end());
  // nearest-rank percentile
  const auto rank = static_cast<std::size_t>(
      std::ceil(0.999 * static_cast<double>(sorted.size())));
  const double q999 = sorted[std::max<std::size_t>(rank, 1) - 1];
  return EmissionParams{mu, std::max(2.0 * q999, min_separation * mu)};
}

ResidualFilter::ResidualFilter(const RunConfig& config)
    : params_(config.model_params()),
      calibration_(config.calibration),
      controller_(config.control, config.n_cameras),
      belief_(params_.transitions.prior) {
  params_.validate();
  belief_.t = 0;
}

ResidualFilter::Output ResidualFilter::push(const ObservationVector& z,
                                            bool calibration_ready) {
  const bool collecting =
      calibration_.enabled && !calibrated_ && calibration_ready;
  if (collecting) {
    calibration_residuals_.insert(calibration_residuals_.end(), z.z.begin(),
                                  z.z.end());
    ++calibration_frames_;
  }
  belief_ = step(belief_, z, params_);
  const Marginals m = marginals(belief_);
  const auto decision = controller_.update(m.p_occlusion, m.p_change);

  Output out;
  out.row.t = belief_.t;
  out.row.p_change = m.p_change;
  out.row.p_occlusion = m.p_occlusion;
  out.row.lambdas = decision.lambdas;
  out.row.alarm = decision.alarm;
  out.belief = belief_;

  if (collecting && calibration_frames_ >= calibration_.window) {
    params_.emission =
        calibrate_emission(calibration_residuals_, calibration_.min_separation);
    calibrated_ = true;
  }
  return out;
}

namespace {

std::vector<subspace::CameraModel> make_camera_models(const RunConfig& config) {
  std::vector<subspace::CameraModel> models;
  for (std::size_t n = 0; n < config.n_cameras; ++n) {
    subspace::ModelConfig mc = config.subspace;
    mc.seed = config.seed + n;
    models.emplace_back(mc);
  }
  return models;
}

bool all_initialized(const std::vector<subspace::CameraModel>& models) {
  return std::all_of(models.begin(), models.end(),
                     [](const auto& m) { return m.initialized(); });
}

}  // namespace

FilterResult filter_stream(const io::Stream& stream, const RunConfig& config) {
  if (stream.n_cameras != config.n_cameras) {
    throw std::invalid_argument(
        "stream has " + std::to_string(stream.n_cameras) +
        " cameras but the configuration expects " +
        std::to_string(config.n_cameras));
  }
  ResidualFilter filter(config);
  FilterResult result;
  result.rows.reserve(stream.frames.size());

  if (stream.mode == sim::Mode::kDirectZ) {
    for (const auto& frame : stream.frames) {
      ObservationVector z{frame.z};
      try {
        auto out = filter.push(z);
        out.row.t = frame.t;
        out.belief.t = frame.t;
        result.rows.push_back(std::move(out.row));
        result.beliefs.push_back(std::move(out.belief));
      } catch (const std::exception& e) {
        throw StepError(frame.t, e.what());
      }
      result.residuals.push_back(frame.z);
    }
  } else {
    auto models = make_camera_models(config);
    for (const auto& frame : stream.frames) {
      std::vector<Eigen::VectorXd> patches;
      ObservationVector z;
      for (std::size_t n = 0; n < config.n_cameras; ++n) {
        const auto& p = frame.patches[n];
        patches.emplace_back(
            Eigen::Map<const Eigen::VectorXd>(p.data(),
                                              static_cast<Eigen::Index>(p.size())));
        z.z.push_back(models[n].score(patches.back()));
      }
      const bool ready = all_initialized(models);
      ResidualFilter::Output out;
      try {
        out = filter.push(z, ready);
      } catch (const std::exception& e) {
        throw StepError(frame.t, e.what());
      }
      for (std::size_t n = 0; n < config.n_cameras; ++n) {
        models[n].observe(patches[n], out.row.p_occlusion[n]);
      }
      out.row.t = frame.t;
      out.belief.t = frame.t;
      result.rows.push_back(std::move(out.row));
      result.beliefs.push_back(std::move(out.belief));
      result.residuals.push_back(z.z);
    }
  }
  result.emission = filter.params().emission;
  return result;
}

double TrackResult::iou_at(std::size_t t, std::size_t camera) const {
  for (const auto& r : rows) {
    if (r.t == t && r.camera == camera) return r.iou;
  }
  throw std::out_of_range("no track row for t=" + std::to_string(t) +
                          " camera=" + std::to_string(camera));
}

TrackResult track(const RunConfig& config, std::optional<double> fixed_lambda,
                  std::optional<int> radius_override) {
  if (fixed_lambda && !(*fixed_lambda >= 0.0 && *fixed_lambda <= 1.0)) {
    throw std::invalid_argument("fixed lambda must be in [0, 1]");
  }
  const sim::ScenarioConfig scenario_cfg = config.resolved_scenario();
  if (scenario_cfg.mode != sim::Mode::kPatch) {
    throw std::invalid_argument("tracking needs a patch-mode scenario");
  }
  const sim::VideoScenario video = sim::generate_video(scenario_cfg);
  const std::size_t n_cam = config.n_cameras;
  const int ph = scenario_cfg.patch_height;
  const int pw = scenario_cfg.patch_width;
  const int radius = radius_override.value_or(config.tracker.search_radius);

  std::vector<tracker::Tracker> trackers;
  for (std::size_t n = 0; n < n_cam; ++n) {
    const auto& view = video.views.front()[n];
    trackers.emplace_back(
        tracker::SparseFeatureExtractor(config.tracker.num_features, ph, pw,
                                        config.tracker.feature_seed + n),
        view.image, view.target, radius,
        fixed_lambda.value_or(config.control.lambda_normal));
  }
  auto models = make_camera_models(config);
  ResidualFilter filter(config);

  TrackResult result;
  for (std::size_t t = 1; t <= video.views.size(); ++t) {
    const auto& views = video.views[t - 1];
    std::vector<tracker::Tracker::Result> located(n_cam);
    std::vector<Eigen::VectorXd> patches;
    ObservationVector z;
    for (std::size_t n = 0; n < n_cam; ++n) {
      if (t == 1) {
        located[n].box = trackers[n].box();
      } else {
        located[n] = trackers[n].locate(views[n].image);
      }
      const auto patch = tracker::resample(views[n].image, located[n].box, ph, pw);
      patches.emplace_back(Eigen::Map<const Eigen::VectorXd>(
          patch.data(), static_cast<Eigen::Index>(patch.size())));
      z.z.push_back(models[n].score(patches.back()));
    }

    auto out = filter.push(z, all_initialized(models));
    if (fixed_lambda) {
      std::fill(out.row.lambdas.begin(), out.row.lambdas.end(), *fixed_lambda);
    }

    for (std::size_t n = 0; n < n_cam; ++n) {
      if (t > 1) trackers[n].learn(views[n].image, out.row.lambdas[n]);
      models[n].observe(patches[n], out.row.p_occlusion[n]);

      TrackRow row;
      row.t = t;
      row.camera = n;
      row.box = located[n].box;
      row.truth = views[n].target;
      row.iou = iou(row.box, row.truth);
      row.score = located[n].score;
      row.z = z.z[n];
      row.lambda = out.row.lambdas[n];
      row.p_occlusion = out.row.p_occlusion[n];
      row.p_change = out.row.p_change;
      row.alarm = out.row.alarm;
      result.rows.push_back(row);
    }
    result.posterior.push_back(std::move(out.row));
  }
  return result;
}

void write_track_header(std::ostream& os) {
  os << "# format_version=" << kFormatVersion << '\n'
     << "t,camera,x,y,w,h,truth_x,truth_y,truth_w,truth_h,iou,score,z,lambda,"
        "p_O,p_S,alarm\n";
}

void write_track_row(std::ostream& os, const TrackRow& r) {
  os << r.t << ',' << r.camera + 1 << ',' << r.box.x << ',' << r.box.y << ','
     << r.box.w << ',' << r.box.h << ',' << r.truth.x << ',' << r.truth.y << ','
     << r.truth.w << ',' << r.truth.h << ',' << format_double(r.iou) << ','
     << format_double(r.score) << ',' << format_double(r.z) << ','
     << format_double(r.lambda) << ',' << format_double(r.p_occlusion) << ','
     << format_double(r.p_change) << ',' << (r.alarm ? 1 : 0) << '\n';
}

}  // namespace occhmm::pipeline
