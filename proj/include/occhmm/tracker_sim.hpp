#pragma once

// Reduced discriminative tracker: sparse random projections of the patch,
// a Gaussian naive-Bayes score, sliding-window search, and lambda-blended
// online updates. lambda = 1 freezes the model.

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "occhmm/image.hpp"

namespace occhmm::tracker {

using Features = std::vector<double>;

inline constexpr double kVarFloor = 1e-6;

struct FeatureEntry {
  std::size_t pixel;  // row-major index into the resampled patch
  double weight;
};

class SparseFeatureExtractor {
 public:
  /// Each feature sums 2-4 randomly chosen patch pixels with weights
  /// +-1/sqrt(k).
  SparseFeatureExtractor(std::size_t num_features, int patch_height,
                         int patch_width, std::uint64_t seed);

  std::size_t num_features() const noexcept { return entries_.size(); }
  int patch_height() const noexcept { return patch_height_; }
  int patch_width() const noexcept { return patch_width_; }
  std::uint64_t seed() const noexcept { return seed_; }
  const std::vector<std::vector<FeatureEntry>>& entries() const noexcept {
    return entries_;
  }

 private:
  int patch_height_;
  int patch_width_;
  std::uint64_t seed_;
  std::vector<std::vector<FeatureEntry>> entries_;
};

/// Nearest-neighbor resampling of the box to patch_height x patch_width,
/// row-major. Throws std::out_of_range if the box leaves the frame.
std::vector<double> resample(const Frame& frame, const BoundingBox& box,
                             int patch_height, int patch_width);

Features extract(const SparseFeatureExtractor& fx, const Frame& frame,
                 const BoundingBox& box);

struct TrackerModel {
  std::vector<double> pos_mean;
  std::vector<double> pos_var;
  std::vector<double> neg_mean;
  std::vector<double> neg_var;
  double lambda = 0.85;

  std::size_t size() const noexcept { return pos_mean.size(); }
  friend bool operator==(const TrackerModel&, const TrackerModel&) = default;
};

/// Log-likelihood ratio sum_i log N(f_i; pos) - log N(f_i; neg).
double classify(const TrackerModel& model, std::span<const double> features);

/// Best-scoring same-size box within Chebyshev distance `radius` of `prev`
/// that stays inside the frame. Ties go to the candidate closest to `prev`
/// (Chebyshev), then to the lexicographically smallest (dy, dx).
BoundingBox search(const TrackerModel& model, const SparseFeatureExtractor& fx,
                   const Frame& frame, const BoundingBox& prev, int radius,
                   double* best_score = nullptr);

/// Up to 8 boxes around `box`, offset by half the box size in each
/// direction; boxes leaving the frame are skipped.
std::vector<BoundingBox> negative_ring(const Frame& frame,
                                       const BoundingBox& box);

/// mean' = lambda mean + (1 - lambda) f,
/// var'  = max(lambda var + (1 - lambda) (f - mean')^2, kVarFloor),
/// for the positive sample and for the mean of the negative set. An empty
/// negative set leaves the negative parameters alone. lambda = 1 returns
/// the input unchanged.
TrackerModel update_model(const TrackerModel& model,
                          std::span<const double> pos_features,
                          std::span<const Features> neg_features,
                          double lambda);

/// Model seeded from a single labelled box: positive mean from the box,
/// negative mean from its ring, both variances from the ring's spread.
TrackerModel init_model(const SparseFeatureExtractor& fx, const Frame& frame,
                        const BoundingBox& box, double lambda);

/// One camera's tracking loop.
class Tracker {
 public:
  Tracker(SparseFeatureExtractor fx, const Frame& first_frame,
          const BoundingBox& box, int radius, double lambda);

  struct Result {
    BoundingBox box;
    double score = 0.0;
  };

  /// Locates the target in `frame`; the model is not touched.
  Result locate(const Frame& frame);
  /// Blends the current box's appearance into the model with `lambda`.
  void learn(const Frame& frame, double lambda);

  const BoundingBox& box() const noexcept { return box_; }
  const TrackerModel& model() const noexcept { return model_; }
  const SparseFeatureExtractor& extractor() const noexcept { return fx_; }

 private:
  SparseFeatureExtractor fx_;
  TrackerModel model_;
  BoundingBox box_;
  int radius_;
};

}  // namespace occhmm::tracker
