#include "occhmm/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace occhmm::oracle {

namespace {

using Real = long double;

struct KahanSum {
  Real sum = 0;
  Real carry = 0;
  void add(Real v) {
    const Real y = v - carry;
    const Real t = sum + y;
    carry = (t - sum) - y;
    sum = t;
  }
};

struct PerTime {
  KahanSum total;
  KahanSum change;
  std::vector<KahanSum> occlusion;
};

struct Enumerator {
  std::size_t num_cameras;
  std::size_t num_states;
  std::size_t horizon;
  std::vector<std::vector<Real>> transition;  // [prev][next]
  std::vector<std::vector<Real>> emission;    // [t][state]
  std::vector<PerTime> acc;

  void accumulate(std::size_t t, std::size_t state, Real weight) {
    PerTime& a = acc[t];
    a.total.add(weight);
    if ((state >> num_cameras) & 1U) a.change.add(weight);
    for (std::size_t n = 0; n < num_cameras; ++n) {
      if ((state >> n) & 1U) a.occlusion[n].add(weight);
    }
  }

  // Visits every prefix x(1..t+1) extending one that ends in `prev`.
  void descend(std::size_t t, std::size_t prev, Real weight) {
    for (std::size_t next = 0; next < num_states; ++next) {
      const Real w = weight * transition[prev][next] * emission[t][next];
      accumulate(t, next, w);
      if (t + 1 < horizon) descend(t + 1, next, w);
    }
  }
};

Real density(double z, bool anomalous, const EmissionParams& p) {
  if (anomalous) {
    const Real uniform = 1.0L / static_cast<Real>(p.m_max);
    if (z <= p.m_max) return uniform;
    return std::max(uniform, static_cast<Real>(kMinDensity));
  }
  const Real mu = p.mu;
  const Real v = std::exp(-static_cast<Real>(z) / mu) / mu;
  return std::max(v, static_cast<Real>(kMinDensity));
}

}  // namespace

std::vector<Marginals> brute_force_marginals(
    const std::vector<std::vector<double>>& observations,
    const ModelParams& params) {
  params.validate();
  const std::size_t n_cam = params.num_cameras();
  const std::size_t k = std::size_t{1} << (n_cam + 1);
  const std::size_t horizon = observations.size();
  if (horizon == 0) throw std::invalid_argument("no observations");

  const double sequences = std::pow(static_cast<double>(k),
                                    static_cast<double>(horizon));
  if (sequences > kMaxSequences) {
    throw SizeError("oracle enumeration of (2^(N+1))^T = " +
                    std::to_string(sequences) +
                    " sequences exceeds the bound 1e8");
  }

  Enumerator e;
  e.num_cameras = n_cam;
  e.num_states = k;
  e.horizon = horizon;

  const auto& tp = params.transitions;
  e.transition.assign(k, std::vector<Real>(k));
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t j = 0; j < k; ++j) {
      Real p = tp.s_chain[(i >> n_cam) & 1U][(j >> n_cam) & 1U];
      for (std::size_t n = 0; n < n_cam; ++n) {
        p *= tp.o_chains[n][(i >> n) & 1U][(j >> n) & 1U];
      }
      e.transition[i][j] = p;
    }
  }

  e.emission.assign(horizon, std::vector<Real>(k));
  for (std::size_t t = 0; t < horizon; ++t) {
    const auto& z = observations[t];
    if (z.size() != n_cam) {
      throw std::invalid_argument("observation row " + std::to_string(t + 1) +
                                  " has wrong camera count");
    }
    for (std::size_t x = 0; x < k; ++x) {
      const bool s = (x >> n_cam) & 1U;
      Real w = 1;
      for (std::size_t n = 0; n < n_cam; ++n) {
        w *= density(z[n], s || ((x >> n) & 1U), params.emission);
      }
      e.emission[t][x] = w;
    }
  }

  e.acc.resize(horizon);
  for (auto& a : e.acc) a.occlusion.resize(n_cam);

  // Sum over the t = 0 state is folded into the first frame's weights.
  for (std::size_t x1 = 0; x1 < k; ++x1) {
    KahanSum initial;
    for (std::size_t x0 = 0; x0 < k; ++x0) {
      initial.add(static_cast<Real>(tp.prior.probs[x0]) * e.transition[x0][x1]);
    }
    const Real w = initial.sum * e.emission[0][x1];
    e.accumulate(0, x1, w);
    if (horizon > 1) e.descend(1, x1, w);
  }

  std::vector<Marginals> out(horizon);
  for (std::size_t t = 0; t < horizon; ++t) {
    const Real total = e.acc[t].total.sum;
    out[t].p_change = static_cast<double>(e.acc[t].change.sum / total);
    out[t].p_occlusion.resize(n_cam);
    for (std::size_t n = 0; n < n_cam; ++n) {
      out[t].p_occlusion[n] =
          static_cast<double>(e.acc[t].occlusion[n].sum / total);
    }
  }
  return out;
}

}  // namespace occhmm::oracle
