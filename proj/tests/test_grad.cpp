#include <doctest.h>

#include <cmath>
#include <random>

#include "pouf/errors.hpp"
#include "pouf/finite_difference.hpp"
#include "pouf/graph.hpp"
#include "pouf/gradcheck.hpp"
#include "pouf/loss_graph.hpp"

using namespace pouf;
using namespace pouf::grad;

namespace {

Tensor random_tensor(std::mt19937_64& rng, std::size_t rows, std::size_t cols, double lo = -2.0,
                     double hi = 2.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  std::vector<double> data(rows * cols);
  for (double& x : data) x = u(rng);
  return Tensor({rows, cols}, std::move(data));
}

}  // namespace

TEST_CASE("tensor shapes and bitwise equality") {
  const Tensor s = Tensor::scalar(2.5);
  CHECK(s.rank() == 0);
  CHECK(s.item() == 2.5);
  const Tensor v = Tensor::vector({1, 2, 3});
  CHECK(v.rank() == 1);
  CHECK(v.rows() == 1);
  CHECK(v.cols() == 3);
  CHECK_THROWS_AS(Tensor({2, 2}, {1, 2, 3}), ShapeError);
  CHECK_THROWS_AS(Tensor({1, 1, 1}, {1}), ShapeError);
  CHECK_THROWS_AS(v.item(), ShapeError);
  Tensor w = v;
  CHECK(w == v);
  w[1] = 2.0000000000000004;
  CHECK_FALSE(w == v);
  CHECK_FALSE(Tensor::vector({1, 2}) == Tensor({1, 2}, {1, 2}));
}

TEST_CASE("evaluate: identity, softmax symmetry, sum of squares") {
  {
    Graph g;
    g.set_output(g.parameter("x"));
    CHECK(evaluate(g, {{"x", Tensor::vector({2, 3})}}) == Tensor::vector({2, 3}));
  }
  {
    Graph g;
    g.set_output(g.softmax(g.constant(Tensor::vector({0, 0})), 0));
    const Tensor out = evaluate(g, {});
    CHECK(out[0] == 0.5);
    CHECK(out[1] == 0.5);
  }
  {
    Graph g;
    const Var x = g.parameter("x");
    g.set_output(g.sum(g.mul(x, x)));
    CHECK(evaluate(g, {{"x", Tensor::vector({1, 2, 3})}}).item() == 14.0);
  }
}

TEST_CASE("gradient: linearity, 2x, softmax sum") {
  {
    Graph g;
    g.set_output(g.sum(g.parameter("x")));
    const Gradients gr = gradient(g, {{"x", Tensor::vector({4, -1, 7})}}, {"x"});
    CHECK(gr.at("x") == Tensor::vector({1, 1, 1}));
  }
  {
    Graph g;
    const Var x = g.parameter("x");
    g.set_output(g.sum(g.mul(x, x)));
    const Gradients gr = gradient(g, {{"x", Tensor::vector({1, 2, 3})}}, {"x"});
    CHECK(gr.at("x") == Tensor::vector({2, 4, 6}));
  }
  {
    std::mt19937_64 rng(3);
    for (int axis : {0, 1}) {
      Graph g;
      g.set_output(g.sum(g.softmax(g.parameter("x"), axis)));
      const Gradients gr = gradient(g, {{"x", random_tensor(rng, 3, 4)}}, {"x"});
      CHECK(gr.at("x").matrix().cwiseAbs().maxCoeff() < 1e-15);
    }
  }
}

TEST_CASE("finite_difference examples") {
  Graph g;
  const Var x = g.parameter("x");
  g.set_output(g.sum(g.mul(x, x)));
  const Gradients fd = finite_difference(as_function(g), {{"x", Tensor::scalar(3.0)}}, {"x"}, 1e-5);
  CHECK(std::abs(fd.at("x").item() - 6.0) <= 1e-6);

  const ScalarFunction constant = [](const Bindings&) { return 1.25; };
  const Gradients zero =
      finite_difference(constant, {{"y", Tensor::vector({1, 2, 3})}}, {"y"}, 1e-5);
  CHECK(zero.at("y").matrix().cwiseAbs().maxCoeff() == 0.0);

  CHECK_THROWS_AS(finite_difference(constant, {{"y", Tensor::scalar(1)}}, {"y"}, 0.0),
                  ValidationError);
}

TEST_CASE("finite_difference agrees with gradient on a 4x3 ct_loss pipeline") {
  std::mt19937_64 rng(11);
  Graph g;
  const Var f = g.row_l2_normalize(g.parameter("f"));
  const Var w = g.row_l2_normalize(g.parameter("w"));
  const Var sim = graph_similarity(g, f, w);
  const Var inv_t = g.constant(Tensor::scalar(1.0 / 0.3));
  g.set_output(graph_ct_loss(g, sim, inv_t, DiscreteDistribution::uniform(3), 4).value);
  const Bindings b{{"f", random_tensor(rng, 4, 5)}, {"w", random_tensor(rng, 3, 5)}};
  const Gradients a = gradient(g, b, {"f", "w"});
  const Gradients n = finite_difference(as_function(g), b, {"f", "w"});
  CHECK(gradient_mismatch(a, n) <= 1e-4);
}

TEST_CASE("evaluate is pure") {
  std::mt19937_64 rng(5);
  Graph g;
  const Var x = g.parameter("x");
  g.set_output(g.mean(g.log(g.softmax(g.matmul(x, g.transpose(x)), 1), 1e-8)));
  const Bindings b{{"x", random_tensor(rng, 5, 4)}};
  const Tensor first = evaluate(g, b);
  for (int i = 0; i < 5; ++i) CHECK(evaluate(g, b) == first);
}

TEST_CASE("softmax and row normalization invariants") {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 50; ++trial) {
    const Tensor x = random_tensor(rng, 1 + trial % 6, 1 + (trial / 6) % 6);
    for (int axis : {0, 1}) {
      Graph g;
      g.set_output(g.softmax(g.constant(x), axis));
      const RowMatrixXd p = evaluate(g, {}).to_matrix();
      const VectorXd sums = axis == 1 ? VectorXd(p.rowwise().sum()) : VectorXd(p.colwise().sum().transpose());
      CHECK((sums.array() - 1.0).abs().maxCoeff() <= 1e-12);
    }
    Graph g;
    g.set_output(g.row_l2_normalize(g.constant(x)));
    const RowMatrixXd n = evaluate(g, {}).to_matrix();
    CHECK((n.rowwise().norm().array() - 1.0).abs().maxCoeff() <= 1e-12);
  }
}

TEST_CASE("softmax is stable for large logits") {
  Graph g;
  g.set_output(g.softmax(g.constant(Tensor::vector({1000.0, 1000.0, -1000.0})), 0));
  const Tensor p = evaluate(g, {});
  CHECK(p[0] == doctest::Approx(0.5));
  CHECK(p[2] == 0.0);
}

TEST_CASE("errors name the offending node") {
  {
    Graph g;
    const Var a = g.named(g.constant(Tensor::zeros({2, 3})), "lhs");
    const Var b = g.constant(Tensor::zeros({2, 3}));
    g.set_output(g.named(g.matmul(a, b), "product"));
    try {
      evaluate(g, {});
      FAIL("expected ShapeError");
    } catch (const ShapeError& e) {
      CHECK(e.node().find("product") != std::string::npos);
    }
  }
  {
    Graph g;
    g.set_output(g.log(g.constant(Tensor::vector({1.0, 0.0}))));
    CHECK_THROWS_AS(evaluate(g, {}), NumericError);
  }
  {
    Graph g;
    g.set_output(g.log(g.constant(Tensor::vector({1.0, 0.0})), 1e-8));
    CHECK(std::isfinite(evaluate(g, {})[1]));
  }
  {
    Graph g;
    g.set_output(g.row_l2_normalize(g.constant(Tensor({2, 2}, {1, 0, 0, 1e-13}))));
    CHECK_THROWS_AS(evaluate(g, {}), NumericError);
  }
  {
    Graph g;
    g.set_output(g.exp(g.constant(Tensor::scalar(1000.0))));
    CHECK_THROWS_AS(evaluate(g, {}), NumericError);
  }
  {
    Graph g;
    g.set_output(g.parameter("x"));
    CHECK_THROWS_AS(evaluate(g, {}), ValidationError);
    CHECK_THROWS_AS(g.parameter("x"), ValidationError);
  }
  {
    Graph g;
    g.set_output(g.parameter("x"));
    CHECK_THROWS_AS(gradient(g, {{"x", Tensor::vector({1, 2})}}, {"x"}), ShapeError);
    CHECK_THROWS_AS(gradient(g, {{"x", Tensor::scalar(1)}}, {"y"}), ValidationError);
  }
}

TEST_CASE("parameters not reached by the output get zero gradient") {
  Graph g;
  const Var x = g.parameter("x");
  g.parameter("unused");
  g.set_output(g.sum(x));
  const Gradients gr = gradient(g, {{"x", Tensor::vector({1, 2})}, {"unused", Tensor::vector({3})}},
                                {"x", "unused"});
  CHECK(gr.at("unused") == Tensor::vector({0}));
}

TEST_CASE("every op chain passes the finite-difference suite") {
  GradcheckOptions opts;
  opts.instances = 100;
  const GradcheckReport report = run_gradcheck(opts);
  CHECK(report.passed);
  CHECK(report.worst <= 1e-4);
  for (const auto& c : report.chains) {
    INFO(c.name);
    CHECK(c.instances >= 100);
    CHECK(c.passed);
  }
  const char* ops[] = {"matmul", "transpose", "add", "sub", "mul", "scalar_mul", "exp",
                       "log", "row_l2_normalize", "softmax", "sum", "mean"};
  for (const char* op : ops) {
    bool found = false;
    for (const auto& c : report.chains) found |= c.name.find(op) != std::string::npos;
    INFO(op);
    CHECK(found);
  }
}

TEST_CASE("gradcheck detects a sign-flipped gradient") {
  GradcheckOptions opts;
  opts.instances = 5;
  opts.flip_sign = true;
  const GradcheckReport report = run_gradcheck(opts);
  CHECK_FALSE(report.passed);
}
