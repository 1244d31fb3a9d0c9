#pragma once

// Distribution-alignment objectives evaluated directly on Eigen matrices.
//
// Rows of a similarity matrix are target features (M), columns are prototypes (K).
// Every function here is templated on the scalar type; the differentiable versions used
// by the trainer live in loss_graph.hpp and must agree with these to rounding.

#include <cmath>
#include <span>
#include <string>

#include "pouf/distribution.hpp"
#include "pouf/errors.hpp"
#include "pouf/types.hpp"

namespace pouf {

enum class CostKind {
  kCosineDistance,  // 1 - cos
  kExpNegDot,       // exp(-cos), the radial-kernel-inspired variant
};

const char* to_string(CostKind kind) noexcept;
CostKind cost_kind_from_string(const std::string& s);

template <typename Scalar>
struct CtTerms {
  Scalar value;
  Scalar feature_to_prototype;  // mean_i sum_k c_ik pi(w_k | f_i)
  Scalar prototype_to_feature;  // sum_k p_k sum_i c_ik pi(f_i | w_k)
};

template <typename Scalar>
struct MiTerms {
  Scalar value;  // H(Y|X) - H(Y)
  Scalar marginal_entropy;
  Scalar conditional_entropy;
};

/// Cosine similarities `features * prototypesᵀ` for row-normalized inputs.
template <typename DerivedF, typename DerivedP>
RowMatrix<typename DerivedF::Scalar> similarity(const Eigen::MatrixBase<DerivedF>& features,
                                                const Eigen::MatrixBase<DerivedP>& prototypes) {
  if (features.cols() != prototypes.cols()) {
    throw ShapeError("similarity: feature dim " + std::to_string(features.cols()) +
                     " != prototype dim " + std::to_string(prototypes.cols()));
  }
  return features * prototypes.transpose();
}

template <typename Derived>
RowMatrix<typename Derived::Scalar> cost_from_similarity(const Eigen::MatrixBase<Derived>& sim,
                                                         CostKind kind) {
  using Scalar = typename Derived::Scalar;
  if (kind == CostKind::kExpNegDot) return (-sim.array()).exp().matrix();
  return (Scalar(1) - sim.array()).matrix();
}

/// pi(w_k | f_i): per row, softmax over prototypes of sim/T shifted by log prior.
template <typename Derived>
RowMatrix<typename Derived::Scalar> class_plan(const Eigen::MatrixBase<Derived>& sim,
                                               typename Derived::Scalar temperature,
                                               const DiscreteDistribution& prior) {
  using Scalar = typename Derived::Scalar;
  if (!(temperature > Scalar(0))) throw ValidationError("temperature must be positive");
  if (static_cast<Eigen::Index>(prior.support_size()) != sim.cols()) {
    throw ShapeError("prior has " + std::to_string(prior.support_size()) +
                     " entries for " + std::to_string(sim.cols()) + " prototypes");
  }
  RowMatrix<Scalar> plan = sim / temperature;
  for (Eigen::Index r = 0; r < plan.rows(); ++r) {
    const Scalar mx = plan.row(r).maxCoeff();
    for (Eigen::Index k = 0; k < plan.cols(); ++k) {
      plan(r, k) = Scalar(prior[static_cast<std::size_t>(k)]) * std::exp(plan(r, k) - mx);
    }
    plan.row(r) /= plan.row(r).sum();
  }
  return plan;
}

/// pi(f_i | w_k): per column, softmax over the batch of sim/T.
template <typename Derived>
RowMatrix<typename Derived::Scalar> batch_plan(const Eigen::MatrixBase<Derived>& sim,
                                               typename Derived::Scalar temperature) {
  using Scalar = typename Derived::Scalar;
  if (!(temperature > Scalar(0))) throw ValidationError("temperature must be positive");
  RowMatrix<Scalar> plan = sim / temperature;
  for (Eigen::Index k = 0; k < plan.cols(); ++k) {
    const Scalar mx = plan.col(k).maxCoeff();
    plan.col(k) = (plan.col(k).array() - mx).exp();
    plan.col(k) /= plan.col(k).sum();
  }
  return plan;
}

/// Bidirectional conditional-transport cost between the batch and the prototypes.
template <typename Derived>
CtTerms<typename Derived::Scalar> ct_loss(const Eigen::MatrixBase<Derived>& sim,
                                          typename Derived::Scalar temperature,
                                          const DiscreteDistribution& prior,
                                          CostKind kind = CostKind::kCosineDistance) {
  using Scalar = typename Derived::Scalar;
  if (sim.rows() < 1 || sim.cols() < 1) throw ShapeError("ct_loss: empty similarity matrix");
  const RowMatrix<Scalar> cost = cost_from_similarity(sim, kind);
  const RowMatrix<Scalar> to_class = class_plan(sim, temperature, prior);
  const RowMatrix<Scalar> to_batch = batch_plan(sim, temperature);

  const Scalar t2w = (cost.array() * to_class.array()).rowwise().sum().mean();
  const Vector<Scalar> per_proto = (cost.array() * to_batch.array()).colwise().sum().transpose();
  const Scalar w2t = per_proto.dot(prior.weights().template cast<Scalar>());
  return {t2w + w2t, t2w, w2t};
}

namespace detail {
template <typename Derived>
void check_probabilities(const Eigen::MatrixBase<Derived>& probs) {
  using Scalar = typename Derived::Scalar;
  if (probs.rows() < 1 || probs.cols() < 1) throw ShapeError("empty probability matrix");
  for (Eigen::Index r = 0; r < probs.rows(); ++r) {
    if ((probs.row(r).array() < Scalar(0)).any() || !probs.row(r).allFinite()) {
      throw ValidationError("probability row " + std::to_string(r) + " has negative entries");
    }
    if (std::abs(probs.row(r).sum() - Scalar(1)) > Scalar(1e-6)) {
      throw ValidationError("probability row " + std::to_string(r) + " sums to " +
                            std::to_string(static_cast<double>(probs.row(r).sum())));
    }
  }
}

template <typename Derived>
typename Derived::Scalar entropy(const Eigen::MatrixBase<Derived>& p) {
  using Scalar = typename Derived::Scalar;
  return -(p.array() * (p.array() + Scalar(kLogEps)).log()).sum();
}
}  // namespace detail

/// Mean per-row entropy H(Y|X).
template <typename Derived>
typename Derived::Scalar conditional_entropy(const Eigen::MatrixBase<Derived>& probs) {
  using Scalar = typename Derived::Scalar;
  detail::check_probabilities(probs);
  Scalar total(0);
  for (Eigen::Index r = 0; r < probs.rows(); ++r) total += detail::entropy(probs.row(r));
  return total / Scalar(probs.rows());
}

/// Negative mutual information between inputs and predicted classes.
template <typename Derived>
MiTerms<typename Derived::Scalar> mi_loss(const Eigen::MatrixBase<Derived>& probs) {
  using Scalar = typename Derived::Scalar;
  const Scalar cond = conditional_entropy(probs);
  const Vector<Scalar> marginal = probs.colwise().mean().transpose();
  const Scalar marg = detail::entropy(marginal);
  return {cond - marg, marg, cond};
}

template <typename Derived>
typename Derived::Scalar cross_entropy(const Eigen::MatrixBase<Derived>& probs,
                                       std::span<const int> labels) {
  using Scalar = typename Derived::Scalar;
  if (static_cast<Eigen::Index>(labels.size()) != probs.rows()) {
    throw ShapeError("cross_entropy: " + std::to_string(labels.size()) + " labels for " +
                     std::to_string(probs.rows()) + " rows");
  }
  Scalar total(0);
  for (Eigen::Index r = 0; r < probs.rows(); ++r) {
    const int y = labels[static_cast<std::size_t>(r)];
    if (y < 0 || y >= probs.cols()) {
      throw ValidationError("label " + std::to_string(y) + " out of range [0, " +
                            std::to_string(probs.cols()) + ")");
    }
    total -= std::log(probs(r, y) + Scalar(kLogEps));
  }
  return total / Scalar(probs.rows());
}

}  // namespace pouf
