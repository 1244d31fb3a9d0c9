#include "pouf/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>

#include "pouf/finite_difference.hpp"
#include "pouf/loss_graph.hpp"
#include "pouf/model.hpp"
#include "pouf/ot.hpp"

namespace pouf {
namespace {

using grad::Bindings;
using grad::Graph;
using grad::Var;

class Sampler {
 public:
  explicit Sampler(std::uint64_t seed) : rng_(seed) {}
  std::size_t dim(std::size_t lo, std::size_t hi) {
    return std::uniform_int_distribution<std::size_t>(lo, hi)(rng_);
  }
  double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng_); }
  RowMatrixXd matrix(std::size_t r, std::size_t c, double lo = -2.0, double hi = 2.0) {
    RowMatrixXd m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = uniform(lo, hi);
    return m;
  }
  Tensor tensor(std::size_t r, std::size_t c, double lo = -2.0, double hi = 2.0) {
    return Tensor::from_matrix(matrix(r, c, lo, hi));
  }

 private:
  std::mt19937_64 rng_;
};

struct Instance {
  Graph graph;
  Bindings bindings;
};

using Builder = std::function<Instance(Sampler&)>;

// Scalarize an arbitrary node against a random weighting so every output entry matters.
Var weighted_sum(Graph& g, Var v, const Tensor& like_shape, Sampler& s) {
  Tensor w = Tensor::zeros(like_shape.shape());
  for (std::size_t i = 0; i < w.size(); ++i) w[i] = s.uniform(-1.0, 1.0);
  return g.sum(g.mul(v, g.constant(std::move(w), "weights")));
}

Builder unary_op(std::function<Var(Graph&, Var)> op, double lo, double hi) {
  return [op, lo, hi](Sampler& s) {
    Instance in;
    const std::size_t r = s.dim(1, 6);
    const std::size_t c = s.dim(1, 6);
    in.bindings["x"] = s.tensor(r, c, lo, hi);
    const Var x = in.graph.parameter("x");
    const Var y = op(in.graph, x);
    in.graph.set_output(y);
    const Tensor out = grad::evaluate(in.graph, in.bindings);
    in.graph.set_output(out.size() == 1 ? y : weighted_sum(in.graph, y, out, s));
    return in;
  };
}

Builder binary_op(std::function<Var(Graph&, Var, Var)> op, bool matmul_shapes) {
  return [op, matmul_shapes](Sampler& s) {
    Instance in;
    const std::size_t r = s.dim(1, 6);
    const std::size_t c = s.dim(1, 6);
    const std::size_t k = s.dim(1, 6);
    in.bindings["a"] = s.tensor(r, c);
    in.bindings["b"] = matmul_shapes ? s.tensor(c, k) : s.tensor(r, c);
    const Var y = op(in.graph, in.graph.parameter("a"), in.graph.parameter("b"));
    in.graph.set_output(y);
    const Tensor out = grad::evaluate(in.graph, in.bindings);
    in.graph.set_output(weighted_sum(in.graph, y, out, s));
    return in;
  };
}

Builder scalar_mul_op() {
  return [](Sampler& s) {
    Instance in;
    in.bindings["s"] = Tensor::scalar(s.uniform(-2.0, 2.0));
    in.bindings["x"] = s.tensor(s.dim(1, 6), s.dim(1, 6));
    const Var y = in.graph.scalar_mul(in.graph.parameter("s"), in.graph.parameter("x"));
    in.graph.set_output(y);
    const Tensor out = grad::evaluate(in.graph, in.bindings);
    in.graph.set_output(weighted_sum(in.graph, y, out, s));
    return in;
  };
}

// Model front (adapter, offsets, temperature) followed by a loss on the similarity.
Builder pipeline(std::function<Var(Graph&, const ModelNodes&, std::size_t, std::size_t, Sampler&)>
                     loss) {
  return [loss](Sampler& s) {
    Instance in;
    const std::size_t m = s.dim(2, 8);
    const std::size_t k = s.dim(2, 6);
    const std::size_t d = s.dim(2, 6);
    const RowMatrixXd raw_features = s.matrix(m, d);
    const RowMatrixXd raw_prototypes = s.matrix(k, d);
    RowMatrixXd adapter = RowMatrixXd::Identity(static_cast<Eigen::Index>(d),
                                                static_cast<Eigen::Index>(d)) +
                          0.3 * s.matrix(d, d, -1.0, 1.0);
    in.bindings[ModelParams::kAdapter] = Tensor::from_matrix(adapter);
    in.bindings[ModelParams::kProtoOffsets] = Tensor::from_matrix(0.3 * s.matrix(k, d, -1.0, 1.0));
    in.bindings[ModelParams::kLogTemperature] =
        Tensor::scalar(std::log(s.uniform(0.05, 1.0)));
    const ModelNodes nodes = build_model_graph(in.graph, raw_features, raw_prototypes);
    in.graph.set_output(loss(in.graph, nodes, m, k, s));
    return in;
  };
}

DiscreteDistribution random_distribution(Sampler& s, std::size_t n) {
  VectorXd w(static_cast<Eigen::Index>(n));
  for (Eigen::Index i = 0; i < w.size(); ++i) w[i] = s.uniform(0.1, 1.0);
  return DiscreteDistribution::normalized(w);
}

std::vector<std::pair<std::string, Builder>> chains() {
  using grad::kAllAxes;
  std::vector<std::pair<std::string, Builder>> out = {
      {"op:matmul", binary_op([](Graph& g, Var a, Var b) { return g.matmul(a, b); }, true)},
      {"op:transpose", unary_op([](Graph& g, Var x) { return g.transpose(x); }, -2, 2)},
      {"op:add", binary_op([](Graph& g, Var a, Var b) { return g.add(a, b); }, false)},
      {"op:sub", binary_op([](Graph& g, Var a, Var b) { return g.sub(a, b); }, false)},
      {"op:mul", binary_op([](Graph& g, Var a, Var b) { return g.mul(a, b); }, false)},
      {"op:scalar_mul", scalar_mul_op()},
      {"op:exp", unary_op([](Graph& g, Var x) { return g.exp(x); }, -2, 2)},
      {"op:log", unary_op([](Graph& g, Var x) { return g.log(x); }, 0.2, 2)},
      {"op:row_l2_normalize", unary_op([](Graph& g, Var x) { return g.row_l2_normalize(x); }, -2, 2)},
      {"op:softmax(0)", unary_op([](Graph& g, Var x) { return g.softmax(x, 0); }, -2, 2)},
      {"op:softmax(1)", unary_op([](Graph& g, Var x) { return g.softmax(x, 1); }, -2, 2)},
      {"op:sum(0)", unary_op([](Graph& g, Var x) { return g.sum(x, 0); }, -2, 2)},
      {"op:sum(1)", unary_op([](Graph& g, Var x) { return g.sum(x, 1); }, -2, 2)},
      {"op:sum", unary_op([](Graph& g, Var x) { return g.sum(x, kAllAxes); }, -2, 2)},
      {"op:mean(0)", unary_op([](Graph& g, Var x) { return g.mean(x, 0); }, -2, 2)},
      {"op:mean(1)", unary_op([](Graph& g, Var x) { return g.mean(x, 1); }, -2, 2)},
      {"op:mean", unary_op([](Graph& g, Var x) { return g.mean(x, kAllAxes); }, -2, 2)},
  };
  out.emplace_back("encode->prototypes->ct_loss(cosine, uniform prior)",
                   pipeline([](Graph& g, const ModelNodes& n, std::size_t m, std::size_t k,
                               Sampler&) {
                     return graph_ct_loss(g, n.similarity, n.inv_temperature,
                                          DiscreteDistribution::uniform(k), m)
                         .value;
                   }));
  out.emplace_back("encode->prototypes->ct_loss(cosine, random prior)",
                   pipeline([](Graph& g, const ModelNodes& n, std::size_t m, std::size_t k,
                               Sampler& s) {
                     return graph_ct_loss(g, n.similarity, n.inv_temperature,
                                          random_distribution(s, k), m)
                         .value;
                   }));
  out.emplace_back("encode->prototypes->ct_loss(exp-neg-dot)",
                   pipeline([](Graph& g, const ModelNodes& n, std::size_t m, std::size_t k,
                               Sampler&) {
                     return graph_ct_loss(g, n.similarity, n.inv_temperature,
                                          DiscreteDistribution::uniform(k), m,
                                          CostKind::kExpNegDot)
                         .value;
                   }));
  out.emplace_back("encode->prototypes->predict->mi_loss",
                   pipeline([](Graph& g, const ModelNodes& n, std::size_t, std::size_t,
                               Sampler&) {
                     return graph_mi_loss(g, graph_predict(g, n.similarity, n.inv_temperature))
                         .value;
                   }));
  out.emplace_back("encode->prototypes->predict->conditional_entropy",
                   pipeline([](Graph& g, const ModelNodes& n, std::size_t, std::size_t,
                               Sampler&) {
                     return graph_conditional_entropy(
                         g, graph_predict(g, n.similarity, n.inv_temperature));
                   }));
  out.emplace_back("encode->prototypes->predict->cross_entropy",
                   pipeline([](Graph& g, const ModelNodes& n, std::size_t m, std::size_t k,
                               Sampler& s) {
                     std::vector<int> labels(m);
                     for (auto& y : labels) y = static_cast<int>(s.dim(0, k - 1));
                     return graph_cross_entropy(
                         g, graph_predict(g, n.similarity, n.inv_temperature), labels, k);
                   }));
  out.emplace_back("encode->prototypes->predict",
                   pipeline([](Graph& g, const ModelNodes& n, std::size_t m, std::size_t k,
                               Sampler& s) {
                     const Var probs = graph_predict(g, n.similarity, n.inv_temperature);
                     return weighted_sum(g, probs, Tensor::zeros({m, k}), s);
                   }));
  out.emplace_back("encode->prototypes->ct_loss + 0.3 mi_loss",
                   pipeline([](Graph& g, const ModelNodes& n, std::size_t m, std::size_t k,
                               Sampler&) {
                     const Var ct = graph_ct_loss(g, n.similarity, n.inv_temperature,
                                                  DiscreteDistribution::uniform(k), m)
                                        .value;
                     const Var mi =
                         graph_mi_loss(g, graph_predict(g, n.similarity, n.inv_temperature)).value;
                     return g.add(ct, g.scale(0.3, mi));
                   }));
  out.emplace_back("encode->prototypes->cost->plan_cost(fixed plan)",
                   pipeline([](Graph& g, const ModelNodes& n, std::size_t m, std::size_t k,
                               Sampler& s) {
                     // Any fixed non-negative coupling; the plan is a constant of the graph.
                     const RowMatrixXd plan = s.matrix(m, k, 0.0, 1.0) / static_cast<double>(m * k);
                     const Var cost = graph_cost(g, n.similarity, CostKind::kCosineDistance, m, k);
                     return graph_plan_cost(g, cost, plan);
                   }));
  return out;
}

}  // namespace

GradcheckReport run_gradcheck(const GradcheckOptions& options) {
  GradcheckReport report;
  Sampler sampler(options.seed);
  for (auto& [name, build] : chains()) {
    GradcheckChain chain;
    chain.name = name;
    for (std::size_t i = 0; i < options.instances; ++i) {
      Instance in = build(sampler);
      std::set<std::string> wrt;
      for (const auto& p : in.graph.parameter_names()) wrt.insert(p);
      grad::Gradients analytic = grad::gradient(in.graph, in.bindings, wrt);
      if (options.flip_sign) {
        for (auto& [pname, t] : analytic) t.matrix() *= -1.0;
      }
      const grad::Gradients numeric =
          grad::finite_difference(grad::as_function(in.graph), in.bindings, wrt, options.step);
      chain.worst = std::max(chain.worst,
                             grad::gradient_mismatch(analytic, numeric, options.rtol, options.atol));
      ++chain.instances;
    }
    chain.passed = chain.worst <= options.rtol;
    report.worst = std::max(report.worst, chain.worst);
    report.passed = report.passed && chain.passed;
    report.chains.push_back(std::move(chain));
  }
  return report;
}

}  // namespace pouf
