#pragma once

// Synthetic multi-camera scenarios with ground-truth occlusion and
// appearance-change labels.
//
// Patch mode: a latent appearance a(t) performs a bounded random walk; camera
// n sees L_n a(t) + mean_n + noise. An occlusion on camera n replaces that
// camera's patch with one drawn from an independent occluder model; an
// appearance change redraws every L_n and mean_n at once.
//
// Direct-Z mode: hidden chains and residuals are sampled from the filter's
// own generative model, optionally with planted events.
//
// Frame indices are 1-based throughout.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

#include "occhmm/hmm_filter.hpp"
#include "occhmm/image.hpp"

namespace occhmm::sim {

enum class Mode { kPatch, kDirectZ };

struct Interval {
  std::size_t start = 1;     // first frame
  std::size_t duration = 1;  // number of frames

  std::size_t last() const noexcept { return start + duration - 1; }
  bool contains(std::size_t t) const noexcept {
    return t >= start && t <= last();
  }
  friend bool operator==(const Interval&, const Interval&) = default;
};

struct OcclusionEvent {
  std::size_t camera = 0;
  Interval span;
  friend bool operator==(const OcclusionEvent&, const OcclusionEvent&) = default;
};

struct ScenarioConfig {
  std::size_t n_cameras = 4;
  std::size_t n_frames = 1000;
  int patch_height = 8;
  int patch_width = 8;
  std::size_t latent_rank = 2;
  std::vector<OcclusionEvent> occlusions;
  std::vector<Interval> changes;
  double noise_sigma = 0.01;
  std::uint64_t seed = 1;
  Mode mode = Mode::kPatch;

  // latent walk
  double walk_step = 0.02;      // step length as a fraction of ||a||
  double latent_bound = 1.0;    // ||a|| is kept at or below this
  double loading_scale = 0.15;  // std. dev. of the entries of L_n

  // direct-Z mode
  ModelParams model_params = ModelParams::defaults(4);
  /// Sample hidden chains from model_params; planted events are OR-ed in.
  /// When false the hidden state is exactly the planted events.
  bool sample_hidden = true;

  // rendered video (tracking)
  int frame_width = 96;
  int frame_height = 40;
  int occluder_speed = 4;     // pixels per frame while entering / leaving
  double target_jitter = 0.1; // per-axis probability of a 1 px target step

  std::size_t patch_dim() const noexcept {
    return static_cast<std::size_t>(patch_height) *
           static_cast<std::size_t>(patch_width);
  }

  /// Throws std::invalid_argument on out-of-range events or parameters.
  void validate() const;
  /// Sorts events and merges overlapping or adjacent intervals per camera.
  void normalize_events();
};

struct GroundTruth {
  std::vector<std::uint8_t> s;               // [t-1]
  std::vector<std::vector<std::uint8_t>> o;  // [camera][t-1]

  std::size_t n_frames() const noexcept { return s.size(); }
  std::size_t n_cameras() const noexcept { return o.size(); }
};

struct FrameRecord {
  std::size_t t = 0;
  std::vector<double> z;                     // direct-Z mode
  std::vector<std::vector<double>> patches;  // patch mode, one per camera
  std::optional<std::uint8_t> truth_s;
  std::vector<std::uint8_t> truth_o;         // empty when absent

  std::size_t n_cameras() const noexcept {
    return z.empty() ? patches.size() : z.size();
  }
};

struct Scenario {
  Mode mode = Mode::kPatch;
  std::vector<FrameRecord> frames;
  GroundTruth truth;
};

/// Deterministic in config (including seed).
Scenario generate(ScenarioConfig config);

struct CameraView {
  Frame image;
  BoundingBox target;
  std::optional<BoundingBox> occluder;
};

struct VideoScenario {
  std::vector<std::vector<CameraView>> views;  // [t-1][camera]
  GroundTruth truth;
};

/// Renders patch-mode appearances into frames: a textured background, the
/// target drawn at a slowly wandering box, and for each occlusion event an
/// occluder that slides in, covers the target for the event's duration and
/// slides out.
VideoScenario generate_video(ScenarioConfig config);

/// Frame index scaled from a reference sequence of `reference_length`
/// frames to `length` frames (floor).
std::size_t scale_frame(std::size_t frame, std::size_t reference_length,
                        std::size_t length);

/// Four cameras, 1000 frames; an occlusion on camera 0 and a global
/// appearance change placed at frames 577 and 851 of 3000, scaled.
ScenarioConfig paper_analog_preset();

/// Model-matched detection benchmark: N = 4, mu = 1, M = 20, every chain
/// stays with probability 0.95, one 10-frame occlusion and one 10-frame
/// appearance change planted into an otherwise normal 300-frame stream.
ScenarioConfig detection_preset(std::uint64_t seed);

/// Patch-mode tracking scenario with one long full occlusion of camera 0.
ScenarioConfig drift_preset(std::uint64_t seed);

}  // namespace occhmm::sim
