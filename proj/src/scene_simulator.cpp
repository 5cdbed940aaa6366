#include "occhmm/scene_simulator.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "occhmm/random.hpp"

namespace occhmm::sim {

namespace {

// Independent RNG streams per concern, so adding an event does not shift
// the noise drawn elsewhere.
constexpr std::uint64_t kLatentStream = 0x9e3779b97f4a7c15ULL;
constexpr std::uint64_t kNoiseStream = 0xbf58476d1ce4e5b9ULL;
constexpr std::uint64_t kOccluderStream = 0x94d049bb133111ebULL;
constexpr std::uint64_t kGeometryStream = 0x2545f4914f6cdd1dULL;

std::vector<Interval> merge(std::vector<Interval> spans) {
  std::sort(spans.begin(), spans.end(), [](const Interval& a, const Interval& b) {
    return a.start < b.start || (a.start == b.start && a.duration < b.duration);
  });
  std::vector<Interval> out;
  for (const auto& s : spans) {
    if (!out.empty() && s.start <= out.back().last() + 1) {
      const std::size_t last = std::max(out.back().last(), s.last());
      out.back().duration = last - out.back().start + 1;
    } else {
      out.push_back(s);
    }
  }
  return out;
}

void check_interval(const Interval& span, std::size_t n_frames,
                    const std::string& what) {
  if (span.start < 1 || span.duration < 1 || span.last() > n_frames) {
    throw std::invalid_argument(what + " [" + std::to_string(span.start) +
                                ", +" + std::to_string(span.duration) +
                                ") lies outside frames 1.." +
                                std::to_string(n_frames));
  }
}

struct LinearModel {
  std::vector<double> loadings;  // d x r, row-major
  std::vector<double> mean;      // d
};

LinearModel draw_model(std::size_t d, std::size_t r, double scale, Rng& rng) {
  LinearModel m;
  m.loadings.resize(d * r);
  for (double& v : m.loadings) v = rng.normal(0.0, scale);
  m.mean.resize(d);
  for (double& v : m.mean) v = rng.uniform(0.2, 0.8);
  return m;
}

std::vector<double> random_direction(std::size_t r, Rng& rng) {
  std::vector<double> u(r);
  double norm = 0.0;
  while (norm == 0.0) {
    for (double& v : u) v = rng.normal();
    norm = 0.0;
    for (double v : u) norm += v * v;
    norm = std::sqrt(norm);
  }
  for (double& v : u) v /= norm;
  return u;
}

double norm2(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

class LatentWalk {
 public:
  LatentWalk(std::size_t rank, double step, double bound, Rng& rng)
      : step_(step), bound_(bound) {
    a_ = random_direction(rank, rng);
    for (double& v : a_) v *= 0.5 * bound;
  }

  void advance(Rng& rng) {
    const auto u = random_direction(a_.size(), rng);
    const double len = step_ * std::max(norm2(a_), 0.05 * bound_);
    for (std::size_t i = 0; i < a_.size(); ++i) a_[i] += len * u[i];
    const double n = norm2(a_);
    if (n > bound_) {
      for (double& v : a_) v *= bound_ / n;
    }
  }

  const std::vector<double>& value() const noexcept { return a_; }

 private:
  double step_;
  double bound_;
  std::vector<double> a_;
};

std::vector<double> render_patch(const LinearModel& m,
                                 const std::vector<double>& a, double sigma,
                                 Rng& noise) {
  const std::size_t d = m.mean.size();
  const std::size_t r = a.size();
  std::vector<double> p(d);
  for (std::size_t i = 0; i < d; ++i) {
    double v = m.mean[i];
    for (std::size_t j = 0; j < r; ++j) v += m.loadings[i * r + j] * a[j];
    p[i] = v + (sigma > 0.0 ? sigma * noise.normal() : 0.0);
  }
  return p;
}

// Target and occluder appearances for every camera, frame by frame.
class AppearanceProcess {
 public:
  explicit AppearanceProcess(const ScenarioConfig& cfg)
      : cfg_(cfg),
        latent_rng_(cfg.seed ^ kLatentStream),
        noise_rng_(cfg.seed ^ kNoiseStream),
        occluder_rng_(cfg.seed ^ kOccluderStream),
        target_walk_(cfg.latent_rank, cfg.walk_step, cfg.latent_bound,
                     latent_rng_),
        occluder_walk_(cfg.latent_rank, cfg.walk_step, cfg.latent_bound,
                       occluder_rng_) {
    const std::size_t d = cfg.patch_dim();
    for (std::size_t n = 0; n < cfg.n_cameras; ++n) {
      targets_.push_back(
          draw_model(d, cfg.latent_rank, cfg.loading_scale, latent_rng_));
      occluders_.push_back(
          draw_model(d, cfg.latent_rank, cfg.loading_scale, occluder_rng_));
    }
  }

  void advance(std::size_t t) {
    if (t > 1) {
      target_walk_.advance(latent_rng_);
      occluder_walk_.advance(occluder_rng_);
    }
    for (const auto& change : cfg_.changes) {
      if (change.start != t) continue;
      for (auto& m : targets_) {
        m = draw_model(cfg_.patch_dim(), cfg_.latent_rank, cfg_.loading_scale,
                       latent_rng_);
      }
    }
    target_patches_.clear();
    occluder_patches_.clear();
    for (std::size_t n = 0; n < cfg_.n_cameras; ++n) {
      target_patches_.push_back(render_patch(targets_[n], target_walk_.value(),
                                             cfg_.noise_sigma, noise_rng_));
      occluder_patches_.push_back(render_patch(
          occluders_[n], occluder_walk_.value(), cfg_.noise_sigma, noise_rng_));
    }
  }

  const std::vector<double>& target(std::size_t n) const {
    return target_patches_[n];
  }
  const std::vector<double>& occluder(std::size_t n) const {
    return occluder_patches_[n];
  }

 private:
  const ScenarioConfig& cfg_;
  Rng latent_rng_;
  Rng noise_rng_;
  Rng occluder_rng_;
  LatentWalk target_walk_;
  LatentWalk occluder_walk_;
  std::vector<LinearModel> targets_;
  std::vector<LinearModel> occluders_;
  std::vector<std::vector<double>> target_patches_;
  std::vector<std::vector<double>> occluder_patches_;
};

GroundTruth planted_truth(const ScenarioConfig& cfg) {
  GroundTruth gt;
  gt.s.assign(cfg.n_frames, 0);
  gt.o.assign(cfg.n_cameras, std::vector<std::uint8_t>(cfg.n_frames, 0));
  for (const auto& c : cfg.changes) {
    for (std::size_t t = c.start; t <= c.last(); ++t) gt.s[t - 1] = 1;
  }
  for (const auto& e : cfg.occlusions) {
    for (std::size_t t = e.span.start; t <= e.span.last(); ++t) {
      gt.o[e.camera][t - 1] = 1;
    }
  }
  return gt;
}

std::size_t sample_categorical(const std::vector<double>& probs, Rng& rng) {
  const double u = rng.uniform();
  double acc = 0.0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    acc += probs[i];
    if (u < acc) return i;
  }
  return probs.size() - 1;
}

void attach_truth(FrameRecord& rec, const GroundTruth& gt) {
  rec.truth_s = gt.s[rec.t - 1];
  rec.truth_o.resize(gt.n_cameras());
  for (std::size_t n = 0; n < gt.n_cameras(); ++n) {
    rec.truth_o[n] = gt.o[n][rec.t - 1];
  }
}

Scenario generate_direct_z(const ScenarioConfig& cfg) {
  const ModelParams& mp = cfg.model_params;
  Rng rng(cfg.seed);
  GroundTruth gt = planted_truth(cfg);

  if (cfg.sample_hidden) {
    const std::size_t n_cam = cfg.n_cameras;
    const std::size_t x0 = sample_categorical(mp.transitions.prior.probs, rng);
    std::uint8_t s = (x0 >> n_cam) & 1U;
    std::vector<std::uint8_t> o(n_cam);
    for (std::size_t n = 0; n < n_cam; ++n) o[n] = (x0 >> n) & 1U;
    for (std::size_t t = 1; t <= cfg.n_frames; ++t) {
      s = rng.bernoulli(mp.transitions.s_chain[s][1]) ? 1 : 0;
      for (std::size_t n = 0; n < n_cam; ++n) {
        o[n] = rng.bernoulli(mp.transitions.o_chains[n][o[n]][1]) ? 1 : 0;
        gt.o[n][t - 1] |= o[n];
      }
      gt.s[t - 1] |= s;
    }
  }

  Scenario out;
  out.mode = Mode::kDirectZ;
  out.frames.reserve(cfg.n_frames);
  for (std::size_t t = 1; t <= cfg.n_frames; ++t) {
    FrameRecord rec;
    rec.t = t;
    rec.z.resize(cfg.n_cameras);
    for (std::size_t n = 0; n < cfg.n_cameras; ++n) {
      const bool anomalous = gt.s[t - 1] || gt.o[n][t - 1];
      rec.z[n] = anomalous ? rng.uniform(0.0, mp.emission.m_max)
                           : rng.exponential(mp.emission.mu);
    }
    attach_truth(rec, gt);
    out.frames.push_back(std::move(rec));
  }
  out.truth = std::move(gt);
  return out;
}

Scenario generate_patches(const ScenarioConfig& cfg) {
  AppearanceProcess process(cfg);
  Scenario out;
  out.mode = Mode::kPatch;
  out.truth = planted_truth(cfg);
  out.frames.reserve(cfg.n_frames);
  for (std::size_t t = 1; t <= cfg.n_frames; ++t) {
    process.advance(t);
    FrameRecord rec;
    rec.t = t;
    for (std::size_t n = 0; n < cfg.n_cameras; ++n) {
      rec.patches.push_back(out.truth.o[n][t - 1] ? process.occluder(n)
                                                  : process.target(n));
    }
    attach_truth(rec, out.truth);
    out.frames.push_back(std::move(rec));
  }
  return out;
}

void paste(Frame& frame, const std::vector<double>& patch, int ph, int pw,
           const BoundingBox& at) {
  for (int i = 0; i < ph; ++i) {
    const int y = at.y + i;
    if (y < 0 || y >= frame.height) continue;
    for (int j = 0; j < pw; ++j) {
      const int x = at.x + j;
      if (x < 0 || x >= frame.width) continue;
      frame.at(y, x) = patch[static_cast<std::size_t>(i * pw + j)];
    }
  }
}

bool overlaps_frame(const BoundingBox& b, int width, int height) {
  return b.x < width && b.y < height && b.x + b.w > 0 && b.y + b.h > 0;
}

}  // namespace

void ScenarioConfig::normalize_events() {
  std::vector<OcclusionEvent> merged;
  for (std::size_t n = 0; n < n_cameras; ++n) {
    std::vector<Interval> spans;
    for (const auto& e : occlusions) {
      if (e.camera == n) spans.push_back(e.span);
    }
    for (const auto& s : merge(std::move(spans))) merged.push_back({n, s});
  }
  // Events on unknown cameras survive so validate() can report them.
  for (const auto& e : occlusions) {
    if (e.camera >= n_cameras) merged.push_back(e);
  }
  occlusions = std::move(merged);
  changes = merge(std::move(changes));
}

void ScenarioConfig::validate() const {
  if (n_cameras < 1 || n_cameras > kMaxCameras) {
    throw std::invalid_argument("scenario.n_cameras must be in [1, 16]");
  }
  if (n_frames < 1) throw std::invalid_argument("scenario.n_frames must be >= 1");
  if (patch_height < 1 || patch_width < 1) {
    throw std::invalid_argument("scenario patch dimensions must be positive");
  }
  if (latent_rank < 1 || latent_rank > patch_dim()) {
    throw std::invalid_argument("scenario.latent_rank must be in [1, patch_dim]");
  }
  if (!(noise_sigma >= 0.0)) {
    throw std::invalid_argument("scenario.noise_sigma must be >= 0");
  }
  if (!(walk_step >= 0.0) || !(latent_bound > 0.0) || !(loading_scale >= 0.0)) {
    throw std::invalid_argument("scenario latent walk parameters out of range");
  }
  for (const auto& e : occlusions) {
    if (e.camera >= n_cameras) {
      throw std::invalid_argument("occlusion event on camera " +
                                  std::to_string(e.camera) + " but only " +
                                  std::to_string(n_cameras) + " cameras");
    }
    check_interval(e.span, n_frames, "occlusion event");
  }
  for (const auto& c : changes) check_interval(c, n_frames, "change event");
  if (mode == Mode::kDirectZ) {
    model_params.validate();
    if (model_params.num_cameras() != n_cameras) {
      throw std::invalid_argument(
          "direct_z model parameters have the wrong camera count");
    }
  }
  if (frame_width < patch_width + 4 || frame_height < patch_height + 4) {
    throw std::invalid_argument("scenario frame is too small for the patch");
  }
  if (occluder_speed < 1) {
    throw std::invalid_argument("scenario.occluder_speed must be >= 1");
  }
  if (!(target_jitter >= 0.0 && target_jitter <= 1.0)) {
    throw std::invalid_argument("scenario.target_jitter must be in [0, 1]");
  }
}

Scenario generate(ScenarioConfig config) {
  config.normalize_events();
  config.validate();
  return config.mode == Mode::kDirectZ ? generate_direct_z(config)
                                       : generate_patches(config);
}

VideoScenario generate_video(ScenarioConfig config) {
  config.normalize_events();
  config.validate();
  const int ph = config.patch_height;
  const int pw = config.patch_width;
  const int fw = config.frame_width;
  const int fh = config.frame_height;

  Rng geometry(config.seed ^ kGeometryStream);
  std::vector<Frame> backgrounds;
  std::vector<BoundingBox> targets;
  for (std::size_t n = 0; n < config.n_cameras; ++n) {
    Frame bg(fw, fh);
    for (double& v : bg.pixels) v = geometry.uniform();
    backgrounds.push_back(std::move(bg));
    targets.push_back({fw / 4 - pw / 2, (fh - ph) / 2, pw, ph});
  }

  AppearanceProcess process(config);
  Rng pixel_noise(config.seed ^ kNoiseStream ^ kGeometryStream);
  VideoScenario out;
  out.truth = planted_truth(config);
  out.views.resize(config.n_frames);

  const int margin = 2;
  for (std::size_t t = 1; t <= config.n_frames; ++t) {
    process.advance(t);
    auto& views = out.views[t - 1];
    for (std::size_t n = 0; n < config.n_cameras; ++n) {
      BoundingBox& target = targets[n];
      if (t > 1) {
        if (geometry.bernoulli(config.target_jitter)) {
          target.x += geometry.bernoulli(0.5) ? 1 : -1;
        }
        if (geometry.bernoulli(config.target_jitter)) {
          target.y += geometry.bernoulli(0.5) ? 1 : -1;
        }
        target.x = std::clamp(target.x, margin, fw - pw - margin);
        target.y = std::clamp(target.y, margin, fh - ph - margin);
      }

      CameraView view;
      view.image = backgrounds[n];
      if (config.noise_sigma > 0.0) {
        for (double& v : view.image.pixels) {
          v += config.noise_sigma * pixel_noise.normal();
        }
      }
      view.target = target;
      paste(view.image, process.target(n), ph, pw, target);

      for (const auto& e : config.occlusions) {
        if (e.camera != n) continue;
        BoundingBox occ = target;
        const int speed = config.occluder_speed;
        if (t < e.span.start) {
          occ.x -= speed * static_cast<int>(e.span.start - t);
        } else if (t > e.span.last()) {
          occ.x += speed * static_cast<int>(t - e.span.last());
        }
        // The occluder is pinned to the target box only while the event
        // runs; outside it is a moving object on its own path.
        if (!overlaps_frame(occ, fw, fh)) continue;
        paste(view.image, process.occluder(n), ph, pw, occ);
        view.occluder = occ;
      }
      views.push_back(std::move(view));
    }
  }
  return out;
}

std::size_t scale_frame(std::size_t frame, std::size_t reference_length,
                        std::size_t length) {
  if (reference_length == 0) throw std::invalid_argument("empty reference");
  return frame * length / reference_length;
}

ScenarioConfig paper_analog_preset() {
  ScenarioConfig cfg;
  cfg.n_cameras = 4;
  cfg.n_frames = 1000;
  cfg.mode = Mode::kPatch;
  cfg.occlusions.push_back({0, {scale_frame(577, 3000, cfg.n_frames), 15}});
  cfg.changes.push_back({scale_frame(851, 3000, cfg.n_frames), 10});
  cfg.model_params = ModelParams::defaults(cfg.n_cameras);
  return cfg;
}

ScenarioConfig detection_preset(std::uint64_t seed) {
  ScenarioConfig cfg;
  cfg.n_cameras = 4;
  cfg.n_frames = 300;
  cfg.mode = Mode::kDirectZ;
  cfg.seed = seed;
  cfg.model_params = ModelParams::symmetric(4, 0.95, EmissionParams{1.0, 20.0});
  cfg.sample_hidden = false;
  cfg.occlusions.push_back(
      {static_cast<std::size_t>(seed % 4),
       {scale_frame(577, 3000, cfg.n_frames), 10}});
  cfg.changes.push_back({scale_frame(851, 3000, cfg.n_frames), 10});
  return cfg;
}

ScenarioConfig drift_preset(std::uint64_t seed) {
  ScenarioConfig cfg;
  cfg.n_cameras = 4;
  cfg.n_frames = 100;
  cfg.mode = Mode::kPatch;
  cfg.seed = seed;
  cfg.patch_height = 12;
  cfg.patch_width = 12;
  cfg.noise_sigma = 0.02;
  cfg.occlusions.push_back({0, {40, 15}});
  cfg.model_params = ModelParams::defaults(cfg.n_cameras);
  return cfg;
}

}  // namespace occhmm::sim
