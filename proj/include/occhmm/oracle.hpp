#pragma once

// Reference posteriors by total enumeration of hidden-state sequences.
// Exponential in T by construction; shares only parameter types with the
// filter, never its arithmetic.

#include <cstddef>
#include <stdexcept>
#include <vector>

#include "occhmm/hmm_filter.hpp"

namespace occhmm::oracle {

/// Largest admissible (2^(N+1))^T.
inline constexpr double kMaxSequences = 1e8;

class SizeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Filtered marginals P[S(t)=1 | z(1:t)] and P[O_n(t)=1 | z(1:t)] for every
/// t, from `observations` (T rows of N residuals). The hidden state at t = 0
/// is drawn from the prior and each frame applies one transition.
std::vector<Marginals> brute_force_marginals(
    const std::vector<std::vector<double>>& observations,
    const ModelParams& params);

}  // namespace occhmm::oracle
