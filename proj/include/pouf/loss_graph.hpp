#pragma once

// Differentiable counterparts of losses.hpp, expressed in the grad-core op set.

#include <cstddef>
#include <span>

#include "pouf/distribution.hpp"
#include "pouf/graph.hpp"
#include "pouf/losses.hpp"

namespace pouf {

struct CtNodes {
  grad::Var value;
  grad::Var feature_to_prototype;
  grad::Var prototype_to_feature;
};

struct MiNodes {
  grad::Var value;
  grad::Var marginal_entropy;
  grad::Var conditional_entropy;
};

/// features (M x d) times prototypesᵀ (d x K).
grad::Var graph_similarity(grad::Graph& g, grad::Var features, grad::Var prototypes);

/// Pointwise cost of an M x K similarity node.
grad::Var graph_cost(grad::Graph& g, grad::Var sim, CostKind kind, std::size_t rows,
                     std::size_t cols);

/// `inv_temperature` is a one-element node holding 1/T. The prior enters as a constant.
CtNodes graph_ct_loss(grad::Graph& g, grad::Var sim, grad::Var inv_temperature,
                      const DiscreteDistribution& prior, std::size_t rows,
                      CostKind kind = CostKind::kCosineDistance);

/// Row softmax of sim / T, the prototype classifier's predictive distribution.
grad::Var graph_predict(grad::Graph& g, grad::Var sim, grad::Var inv_temperature);

grad::Var graph_conditional_entropy(grad::Graph& g, grad::Var probs);
MiNodes graph_mi_loss(grad::Graph& g, grad::Var probs);
grad::Var graph_cross_entropy(grad::Graph& g, grad::Var probs, std::span<const int> labels,
                              std::size_t classes);

/// <plan, cost> with the plan held constant: gradients reach the model only through the cost.
grad::Var graph_plan_cost(grad::Graph& g, grad::Var cost, const RowMatrixXd& plan);

}  // namespace pouf
