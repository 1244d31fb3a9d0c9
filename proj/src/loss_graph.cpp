#include "pouf/loss_graph.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "pouf/errors.hpp"

namespace pouf {

using grad::Graph;
using grad::Var;

Var graph_similarity(Graph& g, Var features, Var prototypes) {
  return g.named(g.matmul(features, g.transpose(prototypes)), "similarity");
}

Var graph_cost(Graph& g, Var sim, CostKind kind, std::size_t rows, std::size_t cols) {
  if (kind == CostKind::kExpNegDot) return g.named(g.exp(g.scale(-1.0, sim)), "cost");
  const Var ones = g.constant(Tensor::from_matrix(RowMatrixXd::Ones(
      static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols))));
  return g.named(g.sub(ones, sim), "cost");
}

CtNodes graph_ct_loss(Graph& g, Var sim, Var inv_temperature, const DiscreteDistribution& prior,
                      std::size_t rows, CostKind kind) {
  const std::size_t classes = prior.support_size();
  const Var cost = graph_cost(g, sim, kind, rows, classes);
  const Var logits = g.scalar_mul(inv_temperature, sim);

  // log p_k broadcast over rows; zero-weight classes get a very negative shift.
  RowMatrixXd log_prior(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(classes));
  for (std::size_t k = 0; k < classes; ++k) {
    log_prior.col(static_cast<Eigen::Index>(k)).setConstant(std::log(std::max(prior[k], 1e-300)));
  }
  const Var shifted = g.add(logits, g.constant(Tensor::from_matrix(log_prior), "log_prior"));
  const Var to_class = g.named(g.softmax(shifted, 1), "class_plan");
  const Var to_batch = g.named(g.softmax(logits, 0), "batch_plan");

  const Var t2w = g.named(g.mean(g.sum(g.mul(cost, to_class), 1)), "ct_feature_to_prototype");
  const Var per_proto = g.sum(g.mul(cost, to_batch), 0);
  const Var w2t = g.named(
      g.sum(g.mul(per_proto, g.constant(Tensor::from_vector(prior.weights()), "prior"))),
      "ct_prototype_to_feature");
  return {g.named(g.add(t2w, w2t), "ct_loss"), t2w, w2t};
}

Var graph_predict(Graph& g, Var sim, Var inv_temperature) {
  return g.named(g.softmax(g.scalar_mul(inv_temperature, sim), 1), "probs");
}

namespace {
// -sum p log(p + eps) along `axis`, or over everything when axis == kAllAxes.
Var entropy(Graph& g, Var p, int axis) {
  return g.scale(-1.0, g.sum(g.mul(p, g.log(p, kLogEps)), axis));
}
}  // namespace

Var graph_conditional_entropy(Graph& g, Var probs) {
  return g.named(g.mean(entropy(g, probs, 1)), "conditional_entropy");
}

MiNodes graph_mi_loss(Graph& g, Var probs) {
  const Var cond = graph_conditional_entropy(g, probs);
  const Var marginal = g.mean(probs, 0);
  const Var marg = g.named(entropy(g, marginal, grad::kAllAxes), "marginal_entropy");
  return {g.named(g.sub(cond, marg), "mi_loss"), marg, cond};
}

Var graph_cross_entropy(Graph& g, Var probs, std::span<const int> labels, std::size_t classes) {
  RowMatrixXd onehot = RowMatrixXd::Zero(static_cast<Eigen::Index>(labels.size()),
                                         static_cast<Eigen::Index>(classes));
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= classes) {
      throw ValidationError("label " + std::to_string(labels[i]) + " out of range [0, " +
                            std::to_string(classes) + ")");
    }
    onehot(static_cast<Eigen::Index>(i), labels[i]) = 1.0;
  }
  const Var picked = g.sum(g.mul(probs, g.constant(Tensor::from_matrix(onehot), "onehot")), 1);
  return g.named(g.scale(-1.0, g.mean(g.log(picked, kLogEps))), "cross_entropy");
}

Var graph_plan_cost(Graph& g, Var cost, const RowMatrixXd& plan) {
  return g.named(g.sum(g.mul(g.constant(Tensor::from_matrix(plan), "plan"), cost)),
                 "plan_cost");
}

}  // namespace pouf
