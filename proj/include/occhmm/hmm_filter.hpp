#pragma once

// Exact recursive Bayesian filter over the joint hidden state
// (S, O_1..O_N): one global appearance-change bit and one occlusion bit per
// camera. Observations are per-camera prediction errors z_n >= 0.

#include <array>
#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace occhmm {

inline constexpr std::size_t kMaxCameras = 16;

/// Densities are floored at this value so the log-likelihood stays finite.
inline constexpr double kMinDensity = 1e-300;

class NumericalUnderflow : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised by run(); carries the 1-based time index of the failing frame.
class StepError : public std::runtime_error {
 public:
  StepError(std::size_t t, const std::string& what);
  std::size_t t() const noexcept { return t_; }

 private:
  std::size_t t_;
};

/// Joint hidden state. Canonical index = s * 2^N + sum_n o[n] * 2^n.
struct HiddenState {
  bool s = false;
  std::vector<std::uint8_t> o;

  std::size_t num_cameras() const noexcept { return o.size(); }
  std::size_t index() const;
  bool anomalous(std::size_t n) const { return s || o.at(n) != 0; }

  static HiddenState from_index(std::size_t index, std::size_t num_cameras);
  friend bool operator==(const HiddenState&, const HiddenState&) = default;
};

inline std::size_t num_states(std::size_t num_cameras) {
  return std::size_t{1} << (num_cameras + 1);
}

struct EmissionParams {
  double mu = 1.0;     // mean of the exponential residual under normal operation
  double m_max = 20.0; // upper bound M of the uniform anomalous residual

  /// Throws std::invalid_argument on mu <= 0 or m_max <= 0.
  void validate() const;
  /// Non-fatal configuration issues (weak normal/anomalous separation).
  std::vector<std::string> warnings() const;

  /// Density used for anomalous residuals above m_max.
  double floor_density() const;
};

double emission_density(double z, bool anomalous, const EmissionParams& params);
double log_emission_density(double z, bool anomalous,
                            const EmissionParams& params);

/// Row-stochastic 2x2 matrix: chain[i][j] = P[next = j | prev = i].
using Chain2 = std::array<std::array<double, 2>, 2>;

/// Chain that stays in state 0 with probability stay0 and in 1 with stay1.
Chain2 sticky_chain(double stay0, double stay1);

struct BeliefState {
  std::vector<double> probs;
  std::size_t t = 0;

  std::size_t num_cameras() const;
  void validate(double tolerance = 1e-12) const;

  static BeliefState uniform(std::size_t num_cameras);
  static BeliefState concentrated(const HiddenState& state);
  /// Mass `p_normal` on the all-normal state, remainder spread uniformly.
  static BeliefState mostly_normal(std::size_t num_cameras, double p_normal);
};

struct TransitionParams {
  Chain2 s_chain{};
  std::vector<Chain2> o_chains;
  /// Belief at t = 0, before the first observation.
  BeliefState prior;

  std::size_t num_cameras() const noexcept { return o_chains.size(); }
  void validate() const;
};

struct ModelParams {
  EmissionParams emission;
  TransitionParams transitions;

  std::size_t num_cameras() const noexcept {
    return transitions.num_cameras();
  }
  void validate() const;

  /// Defaults: S stays (0.99, 0.80), O_n stays (0.95, 0.70), prior 0.99
  /// on the all-normal state.
  static ModelParams defaults(std::size_t num_cameras,
                              EmissionParams emission = {});
  /// Every chain (S and each O_n) stays put with probability `stay`.
  static ModelParams symmetric(std::size_t num_cameras, double stay,
                               EmissionParams emission = {});
};

struct ObservationVector {
  std::vector<double> z;

  std::size_t size() const noexcept { return z.size(); }
  /// Throws std::invalid_argument on negative or non-finite entries.
  void validate() const;
};

double log_joint_likelihood(const ObservationVector& obs,
                            const HiddenState& state,
                            const EmissionParams& params);
double joint_likelihood(const ObservationVector& obs, const HiddenState& state,
                        const EmissionParams& params);

double transition_prob(const HiddenState& prev, const HiddenState& next,
                       const TransitionParams& params);

/// Predictive distribution P[x(t) | z(1:t-1)]. Applies each 2x2 chain along
/// its own bit of the state index, O((N+1) 2^(N+1)).
std::vector<double> predict(std::span<const double> probs,
                            const TransitionParams& params);

/// Same as predict() by explicit sum over every (prev, next) pair.
/// O(4^(N+1)); kept as a cross-check.
std::vector<double> predict_dense(std::span<const double> probs,
                                  const TransitionParams& params);

/// Bayes correction of a predicted distribution, in log space.
/// Throws NumericalUnderflow if the normalizer is zero or non-finite.
BeliefState correct(std::span<const double> predicted,
                    const ObservationVector& obs, const EmissionParams& params,
                    std::size_t t);

/// One filter recursion: predict through the transition, then correct.
BeliefState step(const BeliefState& belief, const ObservationVector& obs,
                 const ModelParams& params);

double marginal_appearance_change(const BeliefState& belief);
double marginal_occlusion(const BeliefState& belief, std::size_t camera);

struct Marginals {
  double p_change = 0.0;
  std::vector<double> p_occlusion;
};

Marginals marginals(const BeliefState& belief);

struct FilterFrame {
  BeliefState belief;
  Marginals marginals;
};

/// Folds step() over the stream starting from params.transitions.prior.
std::vector<FilterFrame> run(std::span<const ObservationVector> stream,
                             const ModelParams& params);

/// Flat CSV record: t, then the 2^(N+1) probabilities in canonical order.
void write_belief_csv_row(std::ostream& os, const BeliefState& belief);
void write_belief_csv_header(std::ostream& os, std::size_t num_cameras);

}  // namespace occhmm
