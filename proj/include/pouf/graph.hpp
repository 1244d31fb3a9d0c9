#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "pouf/tensor.hpp"

namespace pouf::grad {

/// The closed set of differentiable operations.
enum class Op {
  kConstant,
  kParameter,
  kMatMul,
  kTranspose,
  kAdd,
  kSub,
  kMul,
  kScalarMul,
  kExp,
  kLog,
  kRowL2Normalize,
  kSoftmax,
  kSum,
  kMean,
};

const char* op_name(Op op) noexcept;

/// Reduce over every element (sum/mean only).
inline constexpr int kAllAxes = -1;

/// Handle to a node of a `Graph`.
struct Var {
  std::size_t id = 0;
};

struct Node {
  Op op = Op::kConstant;
  std::vector<std::size_t> inputs;
  int axis = kAllAxes;
  double shift = 0.0;  // log(x + shift)
  std::string name;
  Tensor value;        // constants only
};

/// Append-only computation graph; node inputs always precede the node, so the
/// node vector is a topological order.
class Graph {
 public:
  Var constant(Tensor value, std::string name = {});
  Var parameter(std::string name);

  Var matmul(Var a, Var b);
  Var transpose(Var a);
  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var mul(Var a, Var b);
  /// `s * x` where `s` holds exactly one element.
  Var scalar_mul(Var s, Var x);
  Var scale(double s, Var x);
  Var exp(Var a);
  /// Elementwise `log(a + shift)`.
  Var log(Var a, double shift = 0.0);
  Var row_l2_normalize(Var a);
  /// Normalizes along `axis` (0: down each column, 1: across each row).
  Var softmax(Var a, int axis);
  Var sum(Var a, int axis = kAllAxes);
  Var mean(Var a, int axis = kAllAxes);

  /// Attaches a label used in error messages.
  Var named(Var v, std::string name);

  void set_output(Var v);
  Var output() const;
  bool has_output() const noexcept { return output_.has_value(); }

  const Node& node(Var v) const { return nodes_.at(v.id); }
  const std::vector<Node>& nodes() const noexcept { return nodes_; }
  std::size_t size() const noexcept { return nodes_.size(); }
  std::vector<std::string> parameter_names() const;
  std::string describe(std::size_t id) const;

 private:
  Var push(Node node);
  void check(Var v) const;

  std::vector<Node> nodes_;
  std::optional<std::size_t> output_;
};

using Bindings = std::map<std::string, Tensor>;
using Gradients = std::map<std::string, Tensor>;

/// Forward values for every node of a graph.
class Evaluation {
 public:
  const Tensor& operator[](Var v) const { return values_.at(v.id); }
  const Tensor& output() const { return values_.at(output_); }
  const std::vector<Tensor>& values() const noexcept { return values_; }

 private:
  friend Evaluation forward(const Graph&, const Bindings&);
  std::vector<Tensor> values_;
  std::size_t output_ = 0;
};

/// Computes every node value. Throws ShapeError naming the node on a shape mismatch and
/// NumericError when log/softmax/normalize produce or consume non-finite values.
Evaluation forward(const Graph& graph, const Bindings& bindings);

/// Reverse pass from the scalar output. `wrt` must name parameters of the graph.
Gradients backward(const Graph& graph, const Evaluation& values,
                   const std::set<std::string>& wrt);

/// The output tensor.
Tensor evaluate(const Graph& graph, const Bindings& bindings);

/// d(output)/d(parameter) for each requested parameter, same shape as the parameter.
Gradients gradient(const Graph& graph, const Bindings& bindings,
                   const std::set<std::string>& wrt);

}  // namespace pouf::grad
