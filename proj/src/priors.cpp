#include "pouf/priors.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "pouf/errors.hpp"
#include "pouf/losses.hpp"

namespace pouf {

PriorState PriorState::uniform(std::size_t classes, std::size_t horizon) {
  return {DiscreteDistribution::uniform(classes), 0, horizon};
}

DiscreteDistribution batch_prior_estimate(const Eigen::Ref<const RowMatrixXd>& sim,
                                          double temperature,
                                          const DiscreteDistribution& current) {
  if (sim.rows() == 0) throw ValidationError("batch_prior_estimate: empty batch");
  const RowMatrixXd plan = class_plan(sim, temperature, current);
  return DiscreteDistribution::normalized(plan.colwise().mean().transpose());
}

double prior_mixing_weight(std::size_t step, std::size_t horizon) {
  if (horizon == 0) return 0.0;
  const double t = static_cast<double>(step) / static_cast<double>(horizon);
  return 0.5 * (1.0 + std::cos(std::numbers::pi * t));
}

PriorState ema_update(const PriorState& state, const DiscreteDistribution& batch_estimate) {
  if (batch_estimate.support_size() != state.prior.support_size()) {
    throw ShapeError("batch estimate over " + std::to_string(batch_estimate.support_size()) +
                     " classes, prior over " + std::to_string(state.prior.support_size()));
  }
  // The schedule is exhausted at l = L: the prior is frozen from then on.
  if (state.step >= state.horizon) return {state.prior, state.horizon, state.horizon};
  const double a = prior_mixing_weight(state.step, state.horizon);
  VectorXd mixed = a == 1.0 ? batch_estimate.weights()
                            : VectorXd(a * batch_estimate.weights() + (1.0 - a) * state.prior.weights());
  return {DiscreteDistribution(std::move(mixed)), state.step + 1, state.horizon};
}

}  // namespace pouf
