#include <doctest.h>

#include <cmath>
#include <random>

#include "pouf/errors.hpp"
#include "pouf/priors.hpp"

using namespace pouf;

namespace {

DiscreteDistribution dist(std::initializer_list<double> w) {
  VectorXd v(static_cast<Eigen::Index>(w.size()));
  Eigen::Index i = 0;
  for (double x : w) v[i++] = x;
  return DiscreteDistribution(v);
}

DiscreteDistribution random_dist(std::mt19937_64& rng, std::size_t k) {
  std::uniform_real_distribution<double> u(0.01, 1.0);
  VectorXd w(static_cast<Eigen::Index>(k));
  for (auto& x : w) x = u(rng);
  return DiscreteDistribution::normalized(w);
}

double l1(const DiscreteDistribution& a, const DiscreteDistribution& b) {
  return (a.weights() - b.weights()).cwiseAbs().sum();
}

}  // namespace

TEST_CASE("batch_prior_estimate examples") {
  const RowMatrixXd flat = RowMatrixXd::Constant(4, 3, 0.2);
  const DiscreteDistribution u = batch_prior_estimate(flat, 0.5, DiscreteDistribution::uniform(3));
  for (std::size_t k = 0; k < 3; ++k) CHECK(u[k] == doctest::Approx(1.0 / 3.0).epsilon(1e-15));

  RowMatrixXd one(1, 3);
  one << 0.3, -0.1, 0.5;
  const auto prior = dist({0.2, 0.5, 0.3});
  const DiscreteDistribution single = batch_prior_estimate(one, 0.7, prior);
  double z = 0.0;
  for (int k = 0; k < 3; ++k) z += prior[static_cast<std::size_t>(k)] * std::exp(one(0, k) / 0.7);
  for (int k = 0; k < 3; ++k) {
    CHECK(single[static_cast<std::size_t>(k)] ==
          doctest::Approx(prior[static_cast<std::size_t>(k)] * std::exp(one(0, k) / 0.7) / z)
              .epsilon(1e-14));
  }

  RowMatrixXd s(2, 2);
  s << 2, 0, 0, 2;
  const DiscreteDistribution est = batch_prior_estimate(s, 1.0, DiscreteDistribution::uniform(2));
  const double hi = std::exp(2.0) / (std::exp(2.0) + 1.0);
  const double lo = 1.0 / (std::exp(2.0) + 1.0);
  CHECK(est[0] == doctest::Approx((hi + lo) / 2).epsilon(1e-14));
  CHECK(est[1] == doctest::Approx((lo + hi) / 2).epsilon(1e-14));

  CHECK_THROWS(batch_prior_estimate(RowMatrixXd(0, 2), 1.0, DiscreteDistribution::uniform(2)));
}

TEST_CASE("mixing weight follows the half-cosine schedule") {
  CHECK(prior_mixing_weight(0, 10) == 1.0);
  CHECK(prior_mixing_weight(5, 10) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(std::abs(prior_mixing_weight(10, 10)) <= 1e-15);
  for (std::size_t l = 1; l <= 10; ++l) {
    CHECK(prior_mixing_weight(l, 10) <= prior_mixing_weight(l - 1, 10));
  }
}

TEST_CASE("ema_update examples") {
  const auto est = dist({0.7, 0.2, 0.1});
  PriorState s0 = PriorState::uniform(3, 10);
  const PriorState s1 = ema_update(s0, est);
  CHECK(s1.prior.weights() == est.weights());
  CHECK(s1.step == 1);

  PriorState end{DiscreteDistribution::uniform(3), 10, 10};
  const PriorState frozen = ema_update(end, est);
  CHECK(frozen.prior.weights() == end.prior.weights());
  CHECK(frozen.step == 10);

  PriorState mid{DiscreteDistribution::uniform(3), 5, 10};
  const PriorState half = ema_update(mid, est);
  for (std::size_t k = 0; k < 3; ++k) {
    CHECK(half.prior[k] == doctest::Approx((est[k] + 1.0 / 3.0) / 2).epsilon(1e-14));
  }

  CHECK_THROWS_AS(ema_update(s0, DiscreteDistribution::uniform(2)), ShapeError);
}

TEST_CASE("ema output stays a distribution and moves toward a stationary estimate") {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 30; ++trial) {
    const std::size_t k = 2 + static_cast<std::size_t>(trial % 5);
    const DiscreteDistribution target = random_dist(rng, k);
    PriorState s{random_dist(rng, k), 1, 50};
    double gap = l1(s.prior, target);
    for (int step = 0; step < 60; ++step) {
      const double a = prior_mixing_weight(s.step, s.horizon);
      s = ema_update(s, step % 7 == 0 ? random_dist(rng, k) : target);
      CHECK(s.prior.weights().minCoeff() >= 0.0);
      CHECK(std::abs(s.prior.weights().sum() - 1.0) <= 1e-9);
      if (step % 7 != 0) {
        const double now = l1(s.prior, target);
        if (a > 0.0) CHECK(now <= gap + 1e-15);
        gap = now;
      } else {
        gap = l1(s.prior, target);
      }
    }
    CHECK(s.step == 50);
  }
}
