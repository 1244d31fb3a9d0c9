#pragma once

#include <cstddef>

#include "pouf/distribution.hpp"
#include "pouf/types.hpp"

namespace pouf {

/// Running class-proportion estimate used as the CT prior.
struct PriorState {
  DiscreteDistribution prior;
  std::size_t step = 0;   // l
  std::size_t horizon = 1;  // L

  static PriorState uniform(std::size_t classes, std::size_t horizon);
};

/// Mean over the batch of pi(w_k | f_i) computed under `current`.
DiscreteDistribution batch_prior_estimate(const Eigen::Ref<const RowMatrixXd>& sim,
                                          double temperature,
                                          const DiscreteDistribution& current);

/// Half-cosine mixing weight, 1 at l = 0 falling to 0 at l = L.
double prior_mixing_weight(std::size_t step, std::size_t horizon);

/// prior <- a * batch_estimate + (1 - a) * prior with a = prior_mixing_weight(l, L); l += 1.
/// Once l reaches L the prior is left unchanged.
PriorState ema_update(const PriorState& state, const DiscreteDistribution& batch_estimate);

}  // namespace pouf
