#include "pouf/ot.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <queue>
#include <string>

#include "pouf/errors.hpp"

namespace pouf {
namespace {

using Index = Eigen::Index;
constexpr double kNegInf = -std::numeric_limits<double>::infinity();

struct Cell {
  Index row;
  Index col;
};

// Spanning-tree basis of the transportation polytope: rows are nodes [0, m),
// columns are nodes [m, m + n), basic cells are the tree edges.
class TransportSimplex {
 public:
  TransportSimplex(const Eigen::Ref<const RowMatrixXd>& cost, const VectorXd& supply,
                   const VectorXd& demand)
      : cost_(cost), m_(cost.rows()), n_(cost.cols()), flow_(RowMatrixXd::Zero(m_, n_)) {
    north_west_corner(supply, demand);
  }

  void solve(std::size_t max_pivots) {
    const double scale = std::max(1.0, cost_.cwiseAbs().maxCoeff());
    const double optimality_tol = 1e-12 * scale;
    std::size_t degenerate_run = 0;
    for (std::size_t pivot = 0; pivot < max_pivots; ++pivot) {
      compute_potentials();
      const bool bland = degenerate_run > static_cast<std::size_t>(m_ * n_);
      Cell entering{-1, -1};
      double best = -optimality_tol;
      for (Index i = 0; i < m_; ++i) {
        for (Index j = 0; j < n_; ++j) {
          if (is_basic(i, j)) continue;
          const double reduced = cost_(i, j) - row_pot_[i] - col_pot_[j];
          if (reduced < best) {
            best = reduced;
            entering = {i, j};
            if (bland) break;
          }
        }
        if (bland && entering.row >= 0) break;
      }
      if (entering.row < 0) return;
      const double theta = pivot_on(entering);
      degenerate_run = theta == 0.0 ? degenerate_run + 1 : 0;
    }
    throw NumericError("ot_exact: pivot limit reached without optimality");
  }

  const RowMatrixXd& flow() const { return flow_; }

 private:
  void north_west_corner(VectorXd supply, VectorXd demand) {
    Index i = 0;
    Index j = 0;
    while (true) {
      const double x = std::min(supply[i], demand[j]);
      flow_(i, j) = x;
      basis_.push_back({i, j});
      const bool row_done = x == supply[i];
      supply[i] -= x;
      demand[j] -= x;
      if (i == m_ - 1 && j == n_ - 1) break;
      if (i == m_ - 1) {
        ++j;
      } else if (j == n_ - 1) {
        ++i;
      } else if (row_done) {
        ++i;
      } else {
        ++j;
      }
    }
    // Absorb rounding residue of the balance into the final cell.
    flow_(m_ - 1, n_ - 1) += std::max(0.0, std::max(supply[m_ - 1], demand[n_ - 1]));
  }

  bool is_basic(Index i, Index j) const {
    for (const Cell& c : basis_) {
      if (c.row == i && c.col == j) return true;
    }
    return false;
  }

  std::vector<std::vector<std::size_t>> adjacency() const {
    std::vector<std::vector<std::size_t>> adj(static_cast<std::size_t>(m_ + n_));
    for (std::size_t e = 0; e < basis_.size(); ++e) {
      adj[static_cast<std::size_t>(basis_[e].row)].push_back(e);
      adj[static_cast<std::size_t>(m_ + basis_[e].col)].push_back(e);
    }
    return adj;
  }

  std::size_t other_end(std::size_t edge, std::size_t node) const {
    const auto r = static_cast<std::size_t>(basis_[edge].row);
    const auto c = static_cast<std::size_t>(m_ + basis_[edge].col);
    return node == r ? c : r;
  }

  void compute_potentials() {
    row_pot_.assign(static_cast<std::size_t>(m_), 0.0);
    col_pot_.assign(static_cast<std::size_t>(n_), 0.0);
    const auto adj = adjacency();
    std::vector<bool> seen(adj.size(), false);
    std::queue<std::size_t> queue;
    seen[0] = true;
    queue.push(0);
    while (!queue.empty()) {
      const std::size_t node = queue.front();
      queue.pop();
      for (std::size_t e : adj[node]) {
        const std::size_t next = other_end(e, node);
        if (seen[next]) continue;
        seen[next] = true;
        const Cell c = basis_[e];
        if (next >= static_cast<std::size_t>(m_)) {
          col_pot_[static_cast<std::size_t>(c.col)] = cost_(c.row, c.col) - row_pot_[c.row];
        } else {
          row_pot_[static_cast<std::size_t>(c.row)] = cost_(c.row, c.col) - col_pot_[c.col];
        }
        queue.push(next);
      }
    }
  }

  // Moves flow around the cycle closed by `entering`; returns the step length.
  double pivot_on(Cell entering) {
    const auto adj = adjacency();
    const std::size_t start = static_cast<std::size_t>(entering.row);
    const std::size_t goal = static_cast<std::size_t>(m_ + entering.col);
    std::vector<std::ptrdiff_t> via(adj.size(), -1);
    std::vector<bool> seen(adj.size(), false);
    std::queue<std::size_t> queue;
    seen[start] = true;
    queue.push(start);
    while (!queue.empty() && !seen[goal]) {
      const std::size_t node = queue.front();
      queue.pop();
      for (std::size_t e : adj[node]) {
        const std::size_t next = other_end(e, node);
        if (seen[next]) continue;
        seen[next] = true;
        via[next] = static_cast<std::ptrdiff_t>(e);
        queue.push(next);
      }
    }
    std::vector<std::size_t> path;  // edges from the entering column back to the entering row
    for (std::size_t node = goal; node != start;) {
      const auto e = static_cast<std::size_t>(via[node]);
      path.push_back(e);
      node = other_end(e, node);
    }
    // Edges at even positions (counting from the entering column) lose flow.
    double theta = std::numeric_limits<double>::infinity();
    std::size_t leaving = path.front();
    for (std::size_t k = 0; k < path.size(); k += 2) {
      const Cell c = basis_[path[k]];
      if (flow_(c.row, c.col) < theta) {
        theta = flow_(c.row, c.col);
        leaving = path[k];
      }
    }
    for (std::size_t k = 0; k < path.size(); ++k) {
      const Cell c = basis_[path[k]];
      if (k % 2 == 0) {
        flow_(c.row, c.col) -= theta;
      } else {
        flow_(c.row, c.col) += theta;
      }
    }
    flow_(entering.row, entering.col) = theta;
    const Cell out = basis_[leaving];
    flow_(out.row, out.col) = 0.0;
    basis_[leaving] = entering;
    return theta;
  }

  const Eigen::Ref<const RowMatrixXd>& cost_;
  Index m_;
  Index n_;
  RowMatrixXd flow_;
  std::vector<Cell> basis_;
  std::vector<double> row_pot_;
  std::vector<double> col_pot_;
};

void check_marginals(const Eigen::Ref<const RowMatrixXd>& cost, const DiscreteDistribution& u,
                     const DiscreteDistribution& v) {
  if (cost.rows() != static_cast<Index>(u.support_size()) ||
      cost.cols() != static_cast<Index>(v.support_size())) {
    throw ShapeError("cost is " + std::to_string(cost.rows()) + "x" +
                     std::to_string(cost.cols()) + " but marginals have sizes " +
                     std::to_string(u.support_size()) + " and " +
                     std::to_string(v.support_size()));
  }
  const double gap = std::abs(u.weights().sum() - v.weights().sum());
  if (gap > 1e-9) {
    throw ValidationError("infeasible marginals: total masses differ by " + std::to_string(gap));
  }
  if (!cost.allFinite()) throw NumericError("cost matrix has non-finite entries");
}

double log_sum_exp(const Eigen::Ref<const VectorXd>& x) {
  const double mx = x.maxCoeff();
  if (mx == kNegInf) return kNegInf;
  double s = 0.0;
  for (Index k = 0; k < x.size(); ++k) {
    if (x[k] != kNegInf) s += std::exp(x[k] - mx);
  }
  return mx + std::log(s);
}

}  // namespace

TransportResult ot_exact(const Eigen::Ref<const RowMatrixXd>& cost,
                         const DiscreteDistribution& u, const DiscreteDistribution& v,
                         const ExactOtOptions& options) {
  check_marginals(cost, u, v);
  if (static_cast<std::size_t>(cost.rows()) > options.max_size ||
      static_cast<std::size_t>(cost.cols()) > options.max_size) {
    throw ValidationError("ot_exact: instance " + std::to_string(cost.rows()) + "x" +
                          std::to_string(cost.cols()) + " exceeds cap " +
                          std::to_string(options.max_size));
  }
  TransportSimplex simplex(cost, u.weights(), v.weights());
  simplex.solve(options.max_pivots);
  TransportResult result;
  result.plan = simplex.flow();
  result.cost = (result.plan.array() * cost.array()).sum();
  return result;
}

SinkhornResult sinkhorn(const Eigen::Ref<const RowMatrixXd>& cost,
                        const DiscreteDistribution& u, const DiscreteDistribution& v,
                        SinkhornOptions options) {
  check_marginals(cost, u, v);
  if (options.epsilon <= 0.0) {
    const double mean_cost = cost.cwiseAbs().mean();
    options.epsilon = mean_cost > 0.0 ? 0.1 * mean_cost : 1.0;
  }
  if (!(options.tol > 0.0)) throw ValidationError("sinkhorn tolerance must be positive");

  const Index m = cost.rows();
  const Index n = cost.cols();
  const RowMatrixXd log_kernel = -cost / options.epsilon;
  const VectorXd log_u = u.weights().array().log();
  const VectorXd log_v = v.weights().array().log();
  VectorXd f = VectorXd::Zero(m);
  VectorXd g = VectorXd::Zero(n);

  SinkhornResult result;
  result.epsilon = options.epsilon;
  RowMatrixXd plan(m, n);
  auto build_plan = [&] {
    for (Index i = 0; i < m; ++i) {
      for (Index j = 0; j < n; ++j) {
        const double e = log_kernel(i, j) + f[i] + g[j];
        plan(i, j) = e == kNegInf ? 0.0 : std::exp(e);
      }
    }
  };

  for (std::size_t it = 1; it <= options.max_iter; ++it) {
    for (Index i = 0; i < m; ++i) {
      f[i] = log_u[i] == kNegInf ? kNegInf
                                 : log_u[i] - log_sum_exp(log_kernel.row(i).transpose() + g);
    }
    for (Index j = 0; j < n; ++j) {
      g[j] = log_v[j] == kNegInf ? kNegInf : log_v[j] - log_sum_exp(log_kernel.col(j) + f);
    }
    build_plan();
    result.iterations = it;
    result.violation = marginal_violation(plan, u, v);
    if (options.record_history) {
      result.history.push_back((plan.rowwise().sum() - u.weights()).cwiseAbs().sum());
    }
    if (result.violation < options.tol) {
      result.converged = true;
      break;
    }
  }
  if (options.max_iter == 0) build_plan();
  result.plan = std::move(plan);
  result.cost = (result.plan.array() * cost.array()).sum();
  return result;
}

double marginal_violation(const Eigen::Ref<const RowMatrixXd>& plan,
                          const DiscreteDistribution& u, const DiscreteDistribution& v) {
  const double rows = (plan.rowwise().sum() - u.weights()).cwiseAbs().maxCoeff();
  const double cols = (plan.colwise().sum().transpose() - v.weights()).cwiseAbs().maxCoeff();
  return std::max(rows, cols);
}

}  // namespace pouf
