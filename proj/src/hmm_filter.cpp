#include "occhmm/hmm_filter.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>

#include "occhmm/format.hpp"

namespace occhmm {

namespace {

constexpr double kStochasticTolerance = 1e-12;

void check_num_cameras(std::size_t n) {
  if (n < 1 || n > kMaxCameras) {
    throw std::invalid_argument("number of cameras must be in [1, " +
                                std::to_string(kMaxCameras) + "], got " +
                                std::to_string(n));
  }
}

void validate_chain(const Chain2& chain, const std::string& name) {
  for (std::size_t i = 0; i < 2; ++i) {
    const auto& row = chain[i];
    for (double p : row) {
      if (!(p >= 0.0 && p <= 1.0)) {
        throw std::invalid_argument(name + ": entry outside [0, 1]");
      }
    }
    if (std::abs(row[0] + row[1] - 1.0) > kStochasticTolerance) {
      throw std::invalid_argument(name + ": row " + std::to_string(i) +
                                  " does not sum to 1");
    }
  }
}

// Chain acting on bit `bit` of the canonical index; bit N is S.
const Chain2& chain_for_bit(const TransitionParams& params, std::size_t bit) {
  return bit == params.num_cameras() ? params.s_chain : params.o_chains[bit];
}

}  // namespace

StepError::StepError(std::size_t t, const std::string& what)
    : std::runtime_error("t=" + std::to_string(t) + ": " + what), t_(t) {}

std::size_t HiddenState::index() const {
  std::size_t idx = s ? (std::size_t{1} << o.size()) : 0;
  for (std::size_t n = 0; n < o.size(); ++n) {
    if (o[n]) idx |= std::size_t{1} << n;
  }
  return idx;
}

HiddenState HiddenState::from_index(std::size_t index,
                                    std::size_t num_cameras) {
  check_num_cameras(num_cameras);
  if (index >= num_states(num_cameras)) {
    throw std::out_of_range("state index out of range");
  }
  HiddenState state;
  state.s = (index >> num_cameras) & 1U;
  state.o.resize(num_cameras);
  for (std::size_t n = 0; n < num_cameras; ++n) {
    state.o[n] = (index >> n) & 1U;
  }
  return state;
}

void EmissionParams::validate() const {
  if (!(mu > 0.0) || !std::isfinite(mu)) {
    throw std::invalid_argument("emission mu must be positive");
  }
  if (!(m_max > 0.0) || !std::isfinite(m_max)) {
    throw std::invalid_argument("emission m_max must be positive");
  }
}

std::vector<std::string> EmissionParams::warnings() const {
  std::vector<std::string> out;
  if (m_max < 10.0 * mu) {
    out.push_back("emission m_max (" + format_double(m_max) +
                  ") < 10 * mu (" + format_double(mu) +
                  "): normal and anomalous residuals are weakly separated");
  }
  return out;
}

double EmissionParams::floor_density() const {
  return std::max(1.0 / m_max, kMinDensity);
}

double emission_density(double z, bool anomalous,
                        const EmissionParams& params) {
  if (anomalous) {
    return z <= params.m_max ? 1.0 / params.m_max : params.floor_density();
  }
  return std::exp(-z / params.mu) / params.mu;
}

double log_emission_density(double z, bool anomalous,
                            const EmissionParams& params) {
  if (anomalous) {
    return z <= params.m_max ? -std::log(params.m_max)
                             : std::log(params.floor_density());
  }
  return std::max(-z / params.mu - std::log(params.mu), std::log(kMinDensity));
}

Chain2 sticky_chain(double stay0, double stay1) {
  return Chain2{{{stay0, 1.0 - stay0}, {1.0 - stay1, stay1}}};
}

std::size_t BeliefState::num_cameras() const {
  const std::size_t k = probs.size();
  if (k < 4 || (k & (k - 1)) != 0) {
    throw std::invalid_argument("belief size must be 2^(N+1) with N >= 1");
  }
  std::size_t bits = 0;
  while ((std::size_t{1} << bits) < k) ++bits;
  return bits - 1;
}

void BeliefState::validate(double tolerance) const {
  check_num_cameras(num_cameras());
  double sum = 0.0;
  for (double p : probs) {
    if (!(p >= 0.0) || !std::isfinite(p)) {
      throw std::invalid_argument("belief has a negative or non-finite entry");
    }
    sum += p;
  }
  if (std::abs(sum - 1.0) > tolerance) {
    throw std::invalid_argument("belief does not sum to 1 (sum=" +
                                format_double(sum) + ")");
  }
}

BeliefState BeliefState::uniform(std::size_t num_cameras) {
  check_num_cameras(num_cameras);
  const std::size_t k = num_states(num_cameras);
  return BeliefState{std::vector<double>(k, 1.0 / static_cast<double>(k)), 0};
}

BeliefState BeliefState::concentrated(const HiddenState& state) {
  check_num_cameras(state.num_cameras());
  BeliefState b{std::vector<double>(num_states(state.num_cameras()), 0.0), 0};
  b.probs[state.index()] = 1.0;
  return b;
}

BeliefState BeliefState::mostly_normal(std::size_t num_cameras,
                                       double p_normal) {
  check_num_cameras(num_cameras);
  if (!(p_normal >= 0.0 && p_normal <= 1.0)) {
    throw std::invalid_argument("prior normal mass must be in [0, 1]");
  }
  const std::size_t k = num_states(num_cameras);
  BeliefState b{std::vector<double>(
                    k, (1.0 - p_normal) / static_cast<double>(k - 1)),
                0};
  b.probs[0] = p_normal;
  return b;
}

void TransitionParams::validate() const {
  check_num_cameras(o_chains.size());
  validate_chain(s_chain, "s_chain");
  for (std::size_t n = 0; n < o_chains.size(); ++n) {
    validate_chain(o_chains[n], "o_chains[" + std::to_string(n) + "]");
  }
  prior.validate();
  if (prior.num_cameras() != o_chains.size()) {
    throw std::invalid_argument("prior size does not match camera count");
  }
}

void ModelParams::validate() const {
  emission.validate();
  transitions.validate();
}

ModelParams ModelParams::defaults(std::size_t num_cameras,
                                  EmissionParams emission) {
  check_num_cameras(num_cameras);
  ModelParams p;
  p.emission = emission;
  p.transitions.s_chain = sticky_chain(0.99, 0.80);
  p.transitions.o_chains.assign(num_cameras, sticky_chain(0.95, 0.70));
  p.transitions.prior = BeliefState::mostly_normal(num_cameras, 0.99);
  return p;
}

ModelParams ModelParams::symmetric(std::size_t num_cameras, double stay,
                                   EmissionParams emission) {
  ModelParams p = defaults(num_cameras, emission);
  p.transitions.s_chain = sticky_chain(stay, stay);
  p.transitions.o_chains.assign(num_cameras, sticky_chain(stay, stay));
  return p;
}

void ObservationVector::validate() const {
  for (double v : z) {
    if (!(v >= 0.0) || !std::isfinite(v)) {
      throw std::invalid_argument(
          "observation entries must be finite and nonnegative");
    }
  }
}

double log_joint_likelihood(const ObservationVector& obs,
                            const HiddenState& state,
                            const EmissionParams& params) {
  if (obs.size() != state.num_cameras()) {
    throw std::invalid_argument("observation has " +
                                std::to_string(obs.size()) +
                                " cameras, state has " +
                                std::to_string(state.num_cameras()));
  }
  double ll = 0.0;
  for (std::size_t n = 0; n < obs.size(); ++n) {
    ll += log_emission_density(obs.z[n], state.anomalous(n), params);
  }
  return ll;
}

double joint_likelihood(const ObservationVector& obs, const HiddenState& state,
                        const EmissionParams& params) {
  return std::exp(log_joint_likelihood(obs, state, params));
}

double transition_prob(const HiddenState& prev, const HiddenState& next,
                       const TransitionParams& params) {
  if (prev.num_cameras() != next.num_cameras() ||
      prev.num_cameras() != params.num_cameras()) {
    throw std::invalid_argument("camera count mismatch in transition_prob");
  }
  double p = params.s_chain[prev.s][next.s];
  for (std::size_t n = 0; n < prev.num_cameras(); ++n) {
    p *= params.o_chains[n][prev.o[n]][next.o[n]];
  }
  return p;
}

std::vector<double> predict(std::span<const double> probs,
                            const TransitionParams& params) {
  const std::size_t n_cam = params.num_cameras();
  const std::size_t k = num_states(n_cam);
  if (probs.size() != k) {
    throw std::invalid_argument("belief size does not match transition model");
  }
  std::vector<double> out(probs.begin(), probs.end());
  for (std::size_t bit = 0; bit <= n_cam; ++bit) {
    const Chain2& c = chain_for_bit(params, bit);
    const std::size_t mask = std::size_t{1} << bit;
    for (std::size_t i = 0; i < k; ++i) {
      if (i & mask) continue;
      const double p0 = out[i];
      const double p1 = out[i | mask];
      out[i] = p0 * c[0][0] + p1 * c[1][0];
      out[i | mask] = p0 * c[0][1] + p1 * c[1][1];
    }
  }
  return out;
}

std::vector<double> predict_dense(std::span<const double> probs,
                                  const TransitionParams& params) {
  const std::size_t n_cam = params.num_cameras();
  const std::size_t k = num_states(n_cam);
  if (probs.size() != k) {
    throw std::invalid_argument("belief size does not match transition model");
  }
  std::vector<HiddenState> states;
  states.reserve(k);
  for (std::size_t i = 0; i < k; ++i) {
    states.push_back(HiddenState::from_index(i, n_cam));
  }
  std::vector<double> out(k, 0.0);
  for (std::size_t next = 0; next < k; ++next) {
    double acc = 0.0;
    for (std::size_t prev = 0; prev < k; ++prev) {
      acc += probs[prev] * transition_prob(states[prev], states[next], params);
    }
    out[next] = acc;
  }
  return out;
}

BeliefState correct(std::span<const double> predicted,
                    const ObservationVector& obs, const EmissionParams& params,
                    std::size_t t) {
  const std::size_t n_cam = obs.size();
  check_num_cameras(n_cam);
  const std::size_t k = num_states(n_cam);
  if (predicted.size() != k) {
    throw std::invalid_argument("observation has " + std::to_string(n_cam) +
                                " cameras, belief expects a different count");
  }

  std::vector<double> ln_normal(n_cam);
  std::vector<double> ln_anom(n_cam);
  double ll_all_anomalous = 0.0;
  for (std::size_t n = 0; n < n_cam; ++n) {
    ln_normal[n] = log_emission_density(obs.z[n], false, params);
    ln_anom[n] = log_emission_density(obs.z[n], true, params);
    ll_all_anomalous += ln_anom[n];
  }

  const std::size_t half = k / 2;  // states with s = 0
  std::vector<double> log_post(k);
  double max_log = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < k; ++i) {
    double ll;
    if (i >= half) {
      ll = ll_all_anomalous;
    } else {
      ll = 0.0;
      for (std::size_t n = 0; n < n_cam; ++n) {
        ll += ((i >> n) & 1U) ? ln_anom[n] : ln_normal[n];
      }
    }
    const double lp = predicted[i] > 0.0
                          ? std::log(predicted[i]) + ll
                          : -std::numeric_limits<double>::infinity();
    log_post[i] = lp;
    if (lp > max_log) max_log = lp;
  }
  if (!std::isfinite(max_log)) {
    throw NumericalUnderflow("all joint likelihoods vanished");
  }

  double norm = 0.0;
  BeliefState out{std::vector<double>(k), t};
  for (std::size_t i = 0; i < k; ++i) {
    out.probs[i] = std::exp(log_post[i] - max_log);
    norm += out.probs[i];
  }
  if (!(norm > 0.0) || !std::isfinite(norm)) {
    throw NumericalUnderflow("posterior normalizer is zero or non-finite");
  }
  for (double& p : out.probs) p /= norm;
  return out;
}

BeliefState step(const BeliefState& belief, const ObservationVector& obs,
                 const ModelParams& params) {
  if (obs.size() != params.num_cameras()) {
    throw std::invalid_argument("observation has " +
                                std::to_string(obs.size()) +
                                " cameras, model has " +
                                std::to_string(params.num_cameras()));
  }
  obs.validate();
  const auto predicted = predict(belief.probs, params.transitions);
  return correct(predicted, obs, params.emission, belief.t + 1);
}

double marginal_appearance_change(const BeliefState& belief) {
  const std::size_t half = belief.probs.size() / 2;
  double p = 0.0;
  for (std::size_t i = half; i < belief.probs.size(); ++i) p += belief.probs[i];
  return p;
}

double marginal_occlusion(const BeliefState& belief, std::size_t camera) {
  const std::size_t n_cam = belief.num_cameras();
  if (camera >= n_cam) {
    throw std::out_of_range("camera index " + std::to_string(camera) +
                            " out of range for " + std::to_string(n_cam) +
                            " cameras");
  }
  const std::size_t mask = std::size_t{1} << camera;
  double p = 0.0;
  for (std::size_t i = 0; i < belief.probs.size(); ++i) {
    if (i & mask) p += belief.probs[i];
  }
  return p;
}

Marginals marginals(const BeliefState& belief) {
  Marginals m;
  m.p_change = marginal_appearance_change(belief);
  const std::size_t n_cam = belief.num_cameras();
  m.p_occlusion.resize(n_cam);
  for (std::size_t n = 0; n < n_cam; ++n) {
    m.p_occlusion[n] = marginal_occlusion(belief, n);
  }
  return m;
}

std::vector<FilterFrame> run(std::span<const ObservationVector> stream,
                             const ModelParams& params) {
  if (stream.empty()) throw std::invalid_argument("empty observation stream");
  params.validate();
  std::vector<FilterFrame> out;
  out.reserve(stream.size());
  BeliefState belief = params.transitions.prior;
  belief.t = 0;
  for (std::size_t i = 0; i < stream.size(); ++i) {
    try {
      belief = step(belief, stream[i], params);
    } catch (const std::exception& e) {
      throw StepError(i + 1, e.what());
    }
    out.push_back({belief, marginals(belief)});
  }
  return out;
}

void write_belief_csv_header(std::ostream& os, std::size_t num_cameras) {
  os << "t";
  for (std::size_t i = 0; i < num_states(num_cameras); ++i) os << ",p" << i;
  os << '\n';
}

void write_belief_csv_row(std::ostream& os, const BeliefState& belief) {
  os << belief.t;
  for (double p : belief.probs) os << ',' << format_double(p);
  os << '\n';
}

}  // namespace occhmm
