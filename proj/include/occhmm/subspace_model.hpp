#pragma once

// Per-camera generative model: an affine subspace (mean + orthonormal basis)
// summarizing recent patch vectors. The distance of a new patch to the
// subspace is the camera's prediction error.

#include <Eigen/Dense>
#include <cstddef>
#include <deque>
#include <iosfwd>
#include <span>
#include <stdexcept>
#include <vector>

namespace occhmm::subspace {

using PatchVector = Eigen::VectorXd;

class InsufficientData : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct AffineSubspace {
  Eigen::VectorXd mean;
  Eigen::MatrixXd basis;    // d x r, orthonormal columns
  Eigen::VectorXd weights;  // r retained singular values, descending
  double effective_count = 0.0;

  Eigen::Index dim() const noexcept { return mean.size(); }
  Eigen::Index rank() const noexcept { return basis.cols(); }

  /// max |B^T B - I|; 0 for an empty basis.
  double orthonormality_error() const;

  friend bool operator==(const AffineSubspace& a, const AffineSubspace& b);
};

/// Mean and the top-`rank` left singular directions of the centered batch.
/// Directions with numerically zero singular value are dropped, so the
/// returned rank may be smaller than requested.
AffineSubspace init_from_batch(std::span<const PatchVector> patches,
                               Eigen::Index rank);

/// ||(y - mean) - B B^T (y - mean)||_2
double residual_distance(const AffineSubspace& space, const PatchVector& y);

/// Residual divided by sqrt(d), so thresholds do not depend on patch size.
double prediction_error(const AffineSubspace& space, const PatchVector& y);

/// Incremental update with exponential forgetting. Past samples are
/// down-weighted by `forgetting` per update (scatter by forgetting, singular
/// values by its square root) before the new sample is folded in. The basis
/// is truncated to `rank_cap` directions.
AffineSubspace update(const AffineSubspace& space, const PatchVector& y,
                      double forgetting, Eigen::Index rank_cap);

inline constexpr double kDefaultGateThreshold = 0.5;

/// update() unless p_occlusion exceeds the gate threshold, in which case the
/// input is returned unchanged.
AffineSubspace gated_update(const AffineSubspace& space, const PatchVector& y,
                            double base_forgetting, double p_occlusion,
                            Eigen::Index rank_cap,
                            double gate_threshold = kDefaultGateThreshold);

/// Text snapshot: header line, mean row, weight row, then one row per basis
/// column.
void write_snapshot(std::ostream& os, const AffineSubspace& space);
AffineSubspace read_snapshot(std::istream& is);

enum class UpdateMode { kIncremental, kWindow };

struct ModelConfig {
  Eigen::Index rank_cap = 5;
  double forgetting = 0.98;
  std::size_t init_window = 5;
  double init_jitter = 1e-6;
  UpdateMode mode = UpdateMode::kIncremental;
  std::size_t window = 50;  // sliding-window length for kWindow
  double gate_threshold = kDefaultGateThreshold;
  unsigned long long seed = 1;
};

/// Stateful per-camera driver: warm-up, then gated updates in either
/// incremental or sliding-window-rebuild mode.
class CameraModel {
 public:
  explicit CameraModel(ModelConfig config);

  /// Prediction error of `y` against the current model. Before the model
  /// is initialized this is the scaled distance to the mean of the patches
  /// seen so far (0 for the first patch).
  double score(const PatchVector& y) const;

  /// Folds `y` into the model unless p_occlusion exceeds the gate.
  void observe(const PatchVector& y, double p_occlusion);

  bool initialized() const noexcept { return initialized_; }
  const AffineSubspace& space() const { return space_; }
  const ModelConfig& config() const noexcept { return config_; }

 private:
  void initialize();

  ModelConfig config_;
  bool initialized_ = false;
  AffineSubspace space_;
  std::deque<PatchVector> history_;
  unsigned long long jitter_calls_ = 0;
};

}  // namespace occhmm::subspace
