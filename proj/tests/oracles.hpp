#pragma once
// Independent reference implementations. Nothing here calls into the library's math; the
// point is to compute the same quantities a second, deliberately naive way.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <random>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace oracle {

using Table = std::vector<std::vector<double>>;

inline Table to_table(const Eigen::Ref<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic,
                                                           Eigen::RowMajor>>& m) {
  Table t(static_cast<std::size_t>(m.rows()), std::vector<double>(static_cast<std::size_t>(m.cols())));
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) t[i][j] = m(i, j);
  }
  return t;
}

struct Ct {
  double value, forward, backward;
};

// Bidirectional conditional transport written out as explicit double sums.
inline Ct conditional_transport(const Table& sim, double temperature,
                                const std::vector<double>& prior, bool exp_neg_dot = false) {
  const std::size_t m = sim.size();
  const std::size_t k = sim[0].size();
  auto cost = [&](std::size_t i, std::size_t j) {
    return exp_neg_dot ? std::exp(-sim[i][j]) : 1.0 - sim[i][j];
  };
  double forward = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    double z = 0.0;
    for (std::size_t j = 0; j < k; ++j) z += prior[j] * std::exp(sim[i][j] / temperature);
    double row = 0.0;
    for (std::size_t j = 0; j < k; ++j) {
      row += cost(i, j) * prior[j] * std::exp(sim[i][j] / temperature) / z;
    }
    forward += row;
  }
  forward /= static_cast<double>(m);
  double backward = 0.0;
  for (std::size_t j = 0; j < k; ++j) {
    double z = 0.0;
    for (std::size_t i = 0; i < m; ++i) z += std::exp(sim[i][j] / temperature);
    double col = 0.0;
    for (std::size_t i = 0; i < m; ++i) col += cost(i, j) * std::exp(sim[i][j] / temperature) / z;
    backward += prior[j] * col;
  }
  return {forward + backward, forward, backward};
}

inline double entropy(const std::vector<double>& p) {
  double h = 0.0;
  for (double x : p) h -= x * std::log(x + 1e-8);
  return h;
}

// H(Y|X) - H(Y) from scalar entropies.
inline double mutual_information_loss(const Table& probs) {
  const std::size_t m = probs.size();
  const std::size_t k = probs[0].size();
  double cond = 0.0;
  std::vector<double> marginal(k, 0.0);
  for (const auto& row : probs) {
    cond += entropy(row);
    for (std::size_t j = 0; j < k; ++j) marginal[j] += row[j] / static_cast<double>(m);
  }
  return cond / static_cast<double>(m) - entropy(marginal);
}

// Minimum of <T, C> over the vertices of the transportation polytope {T >= 0, T1 = u, Tᵀ1 = v}.
// Every vertex is supported on at most m + n - 1 cells, so it suffices to try every such cell
// set, solve the marginal equations restricted to it and keep the non-negative solutions.
inline double transport_by_vertex_enumeration(const Table& cost, const std::vector<double>& u,
                                              const std::vector<double>& v) {
  const std::size_t m = u.size();
  const std::size_t n = v.size();
  const std::size_t cells = m * n;
  const std::size_t basis = m + n - 1;
  std::vector<int> pick(cells, 0);
  std::fill(pick.end() - static_cast<long>(basis), pick.end(), 1);
  double best = std::numeric_limits<double>::infinity();
  Eigen::VectorXd rhs(static_cast<Eigen::Index>(m + n));
  for (std::size_t i = 0; i < m; ++i) rhs[static_cast<Eigen::Index>(i)] = u[i];
  for (std::size_t j = 0; j < n; ++j) rhs[static_cast<Eigen::Index>(m + j)] = v[j];
  do {
    std::vector<std::size_t> chosen;
    for (std::size_t c = 0; c < cells; ++c) {
      if (pick[c]) chosen.push_back(c);
    }
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(m + n),
                                              static_cast<Eigen::Index>(basis));
    for (std::size_t col = 0; col < basis; ++col) {
      const std::size_t i = chosen[col] / n;
      const std::size_t j = chosen[col] % n;
      a(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(col)) = 1.0;
      a(static_cast<Eigen::Index>(m + j), static_cast<Eigen::Index>(col)) = 1.0;
    }
    Eigen::FullPivLU<Eigen::MatrixXd> lu(a);
    if (lu.rank() != static_cast<Eigen::Index>(basis)) continue;
    const Eigen::VectorXd x = lu.solve(rhs);
    if ((a * x - rhs).cwiseAbs().maxCoeff() > 1e-12) continue;
    if (x.minCoeff() < -1e-13) continue;
    double value = 0.0;
    for (std::size_t col = 0; col < basis; ++col) {
      value += x[static_cast<Eigen::Index>(col)] * cost[chosen[col] / n][chosen[col] % n];
    }
    best = std::min(best, value);
  } while (std::next_permutation(pick.begin(), pick.end()));
  return best;
}

// Indices sorted by descending score, ties by ascending index, via a full comparison sort.
inline std::vector<std::size_t> rank_descending(const std::vector<double>& score) {
  std::vector<std::size_t> idx(score.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    if (score[a] != score[b]) return score[a] > score[b];
    return a < b;
  });
  return idx;
}

// Repeatedly takes the most confident still-eligible (sample, class) pair by a full scan.
inline std::vector<std::pair<std::size_t, int>> topk_pseudo_labels(const Table& probs,
                                                                   std::size_t topk) {
  const std::size_t n = probs.size();
  const std::size_t k = n == 0 ? 0 : probs[0].size();
  std::vector<bool> used(n, false);
  std::vector<std::size_t> taken(k, 0);
  std::vector<std::pair<std::size_t, int>> out;
  while (true) {
    bool found = false;
    std::size_t bi = 0;
    std::size_t bk = 0;
    for (std::size_t i = 0; i < n; ++i) {
      if (used[i]) continue;
      for (std::size_t c = 0; c < k; ++c) {
        if (taken[c] >= topk) continue;
        if (!found || probs[i][c] > probs[bi][bk]) {
          found = true;
          bi = i;
          bk = c;
        }
      }
    }
    if (!found) break;
    used[bi] = true;
    ++taken[bk];
    out.emplace_back(bi, static_cast<int>(bk));
  }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace oracle
