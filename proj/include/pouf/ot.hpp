#pragma once

#include <cstddef>
#include <vector>

#include "pouf/distribution.hpp"
#include "pouf/types.hpp"

namespace pouf {

/// A coupling between the row distribution and the column distribution of a cost matrix.
struct TransportResult {
  RowMatrixXd plan;
  double cost = 0.0;  // <plan, C>
};

struct ExactOtOptions {
  std::size_t max_size = 64;  // cap on rows and on columns
  std::size_t max_pivots = 100000;
};

/// Exact optimal transport min <T, C> s.t. T 1 = u, Tᵀ 1 = v, solved with the
/// transportation simplex (network simplex on the bipartite graph).
TransportResult ot_exact(const Eigen::Ref<const RowMatrixXd>& cost,
                         const DiscreteDistribution& u, const DiscreteDistribution& v,
                         const ExactOtOptions& options = {});

struct SinkhornOptions {
  double epsilon = 0.0;  // <= 0 selects 0.1 * mean(C)
  std::size_t max_iter = 1000;
  double tol = 1e-6;
  bool record_history = false;
};

struct SinkhornResult {
  RowMatrixXd plan;
  double cost = 0.0;
  std::size_t iterations = 0;
  bool converged = false;
  double violation = 0.0;         // max |marginal - target| over rows and columns
  double epsilon = 0.0;           // the regularization actually used
  std::vector<double> history;    // L1 row-marginal violation after each iteration
};

/// Entropy-regularized transport via log-domain Sinkhorn scalings of exp(-C / eps).
/// A non-converged run returns its last iterate with `converged == false`.
SinkhornResult sinkhorn(const Eigen::Ref<const RowMatrixXd>& cost,
                        const DiscreteDistribution& u, const DiscreteDistribution& v,
                        SinkhornOptions options = {});

/// Max violation of the row and column marginal constraints.
double marginal_violation(const Eigen::Ref<const RowMatrixXd>& plan,
                          const DiscreteDistribution& u, const DiscreteDistribution& v);

}  // namespace pouf
