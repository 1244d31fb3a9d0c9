#pragma once

#include <cstddef>
#include <vector>

#include "pouf/types.hpp"

namespace pouf {

/// Non-negative weights summing to one over a finite support.
class DiscreteDistribution {
 public:
  static constexpr double kSumTolerance = 1e-9;

  /// Validates `weights`; throws ValidationError when negative, non-finite or not summing to 1.
  explicit DiscreteDistribution(VectorXd weights);

  static DiscreteDistribution uniform(std::size_t n);
  /// Divides by the sum; throws when the sum is not positive.
  static DiscreteDistribution normalized(VectorXd weights);

  const VectorXd& weights() const noexcept { return weights_; }
  std::size_t support_size() const noexcept { return static_cast<std::size_t>(weights_.size()); }
  double operator[](std::size_t k) const { return weights_[static_cast<Eigen::Index>(k)]; }
  std::vector<double> to_vector() const { return {weights_.data(), weights_.data() + weights_.size()}; }

 private:
  VectorXd weights_;
};

}  // namespace pouf
