#include "pouf/distribution.hpp"

#include <cmath>
#include <string>

#include "pouf/errors.hpp"
#include "pouf/losses.hpp"

namespace pouf {

DiscreteDistribution::DiscreteDistribution(VectorXd weights) : weights_(std::move(weights)) {
  if (weights_.size() == 0) throw ValidationError("distribution needs a non-empty support");
  for (Eigen::Index k = 0; k < weights_.size(); ++k) {
    if (!std::isfinite(weights_[k]) || weights_[k] < 0.0) {
      throw ValidationError("distribution weight " + std::to_string(k) + " is " +
                            std::to_string(weights_[k]));
    }
  }
  const double total = weights_.sum();
  if (std::abs(total - 1.0) > kSumTolerance) {
    throw ValidationError("distribution weights sum to " + std::to_string(total));
  }
}

DiscreteDistribution DiscreteDistribution::uniform(std::size_t n) {
  if (n == 0) throw ValidationError("distribution needs a non-empty support");
  return DiscreteDistribution(VectorXd::Constant(static_cast<Eigen::Index>(n), 1.0 / n));
}

DiscreteDistribution DiscreteDistribution::normalized(VectorXd weights) {
  const double total = weights.sum();
  if (!(total > 0.0) || !std::isfinite(total)) {
    throw ValidationError("cannot normalize weights with sum " + std::to_string(total));
  }
  return DiscreteDistribution(weights / total);
}

const char* to_string(CostKind kind) noexcept {
  return kind == CostKind::kExpNegDot ? "exp-neg-dot" : "cosine";
}

CostKind cost_kind_from_string(const std::string& s) {
  if (s == "cosine" || s == "cosine-distance") return CostKind::kCosineDistance;
  if (s == "exp-neg-dot") return CostKind::kExpNegDot;
  throw ValidationError("unknown cost kind '" + s + "'");
}

}  // namespace pouf
