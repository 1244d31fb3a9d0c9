#include "pouf/graph.hpp"

#include <cmath>

#include "pouf/errors.hpp"

namespace pouf::grad {
namespace {

using Index = Eigen::Index;

// Rank-1 tensors view as a single row, so their only axis is the view's column axis.
int view_axis(const Tensor& t, int axis) { return t.rank() == 1 ? 1 : axis; }

void check_axis(const Graph& g, std::size_t id, const Tensor& t, int axis, bool allow_all) {
  if (allow_all && axis == kAllAxes) return;
  const bool ok = (t.rank() == 2 && (axis == 0 || axis == 1)) || (t.rank() == 1 && axis == 0);
  if (!ok) {
    throw ShapeError("axis " + std::to_string(axis) + " invalid for shape " + t.shape_string(),
                     g.describe(id));
  }
}

void require_finite(const Graph& g, std::size_t id, const Tensor& t) {
  if (!t.all_finite()) {
    throw NumericError("node '" + g.describe(id) + "' (" + op_name(g.nodes()[id].op) +
                       ") produced a non-finite value");
  }
}

Tensor reduce(const Tensor& x, int axis, bool average) {
  const auto m = x.matrix();
  if (axis == kAllAxes) {
    const double s = m.sum();
    return Tensor::scalar(average ? s / static_cast<double>(x.size()) : s);
  }
  if (x.rank() == 1) {
    const double s = m.sum();
    return Tensor::scalar(average ? s / static_cast<double>(x.size()) : s);
  }
  if (axis == 0) {
    VectorXd s = m.colwise().sum().transpose();
    if (average) s /= static_cast<double>(m.rows());
    return Tensor::from_vector(s);
  }
  VectorXd s = m.rowwise().sum();
  if (average) s /= static_cast<double>(m.cols());
  return Tensor::from_vector(s);
}

// Gradient of a reduction: spread the upstream gradient back over the reduced axis.
Tensor unreduce(const Tensor& x, const Tensor& g, int axis, bool average) {
  Tensor out = Tensor::zeros(x.shape());
  auto o = out.matrix();
  const auto gm = g.matrix();
  if (axis == kAllAxes || x.rank() == 1) {
    const double n = average ? static_cast<double>(x.size()) : 1.0;
    o.setConstant(g.item() / n);
  } else if (axis == 0) {
    const double n = average ? static_cast<double>(o.rows()) : 1.0;
    o = (gm.replicate(o.rows(), 1) / n);
  } else {
    const double n = average ? static_cast<double>(o.cols()) : 1.0;
    o = (gm.transpose().replicate(1, o.cols()) / n);
  }
  return out;
}

Tensor softmax(const Tensor& x, int axis) {
  Tensor out = x;
  auto y = out.matrix();
  if (view_axis(x, axis) == 1) {
    for (Index r = 0; r < y.rows(); ++r) {
      const double mx = y.row(r).maxCoeff();
      y.row(r) = (y.row(r).array() - mx).exp();
      y.row(r) /= y.row(r).sum();
    }
  } else {
    for (Index c = 0; c < y.cols(); ++c) {
      const double mx = y.col(c).maxCoeff();
      y.col(c) = (y.col(c).array() - mx).exp();
      y.col(c) /= y.col(c).sum();
    }
  }
  return out;
}

}  // namespace

const char* op_name(Op op) noexcept {
  switch (op) {
    case Op::kConstant: return "constant";
    case Op::kParameter: return "parameter";
    case Op::kMatMul: return "matmul";
    case Op::kTranspose: return "transpose";
    case Op::kAdd: return "add";
    case Op::kSub: return "sub";
    case Op::kMul: return "mul";
    case Op::kScalarMul: return "scalar_mul";
    case Op::kExp: return "exp";
    case Op::kLog: return "log";
    case Op::kRowL2Normalize: return "row_l2_normalize";
    case Op::kSoftmax: return "softmax";
    case Op::kSum: return "sum";
    case Op::kMean: return "mean";
  }
  return "?";
}

Var Graph::push(Node node) {
  for (std::size_t in : node.inputs) {
    if (in >= nodes_.size()) throw ValidationError("graph input refers to a later node");
  }
  nodes_.push_back(std::move(node));
  return Var{nodes_.size() - 1};
}

void Graph::check(Var v) const {
  if (v.id >= nodes_.size()) throw ValidationError("unknown graph node " + std::to_string(v.id));
}

Var Graph::constant(Tensor value, std::string name) {
  Node n;
  n.op = Op::kConstant;
  n.value = std::move(value);
  n.name = std::move(name);
  return push(std::move(n));
}

Var Graph::parameter(std::string name) {
  if (name.empty()) throw ValidationError("parameters need a name");
  for (const Node& n : nodes_) {
    if (n.op == Op::kParameter && n.name == name) {
      throw ValidationError("duplicate parameter '" + name + "'");
    }
  }
  Node n;
  n.op = Op::kParameter;
  n.name = std::move(name);
  return push(std::move(n));
}

#define POUF_UNARY(fn, kind)            \
  Var Graph::fn(Var a) {                \
    check(a);                           \
    Node n;                             \
    n.op = kind;                        \
    n.inputs = {a.id};                  \
    return push(std::move(n));          \
  }
#define POUF_BINARY(fn, kind)           \
  Var Graph::fn(Var a, Var b) {         \
    check(a);                           \
    check(b);                           \
    Node n;                             \
    n.op = kind;                        \
    n.inputs = {a.id, b.id};            \
    return push(std::move(n));          \
  }

POUF_BINARY(matmul, Op::kMatMul)
POUF_UNARY(transpose, Op::kTranspose)
POUF_BINARY(add, Op::kAdd)
POUF_BINARY(sub, Op::kSub)
POUF_BINARY(mul, Op::kMul)
POUF_BINARY(scalar_mul, Op::kScalarMul)
POUF_UNARY(exp, Op::kExp)
POUF_UNARY(row_l2_normalize, Op::kRowL2Normalize)

#undef POUF_UNARY
#undef POUF_BINARY

Var Graph::scale(double s, Var x) { return scalar_mul(constant(Tensor::scalar(s)), x); }

Var Graph::log(Var a, double shift) {
  check(a);
  Node n;
  n.op = Op::kLog;
  n.inputs = {a.id};
  n.shift = shift;
  return push(std::move(n));
}

Var Graph::softmax(Var a, int axis) {
  check(a);
  Node n;
  n.op = Op::kSoftmax;
  n.inputs = {a.id};
  n.axis = axis;
  return push(std::move(n));
}

Var Graph::sum(Var a, int axis) {
  check(a);
  Node n;
  n.op = Op::kSum;
  n.inputs = {a.id};
  n.axis = axis;
  return push(std::move(n));
}

Var Graph::mean(Var a, int axis) {
  check(a);
  Node n;
  n.op = Op::kMean;
  n.inputs = {a.id};
  n.axis = axis;
  return push(std::move(n));
}

Var Graph::named(Var v, std::string name) {
  check(v);
  if (nodes_[v.id].op != Op::kParameter) nodes_[v.id].name = std::move(name);
  return v;
}

void Graph::set_output(Var v) {
  check(v);
  output_ = v.id;
}

Var Graph::output() const {
  if (!output_) throw ValidationError("graph has no designated output");
  return Var{*output_};
}

std::vector<std::string> Graph::parameter_names() const {
  std::vector<std::string> names;
  for (const Node& n : nodes_) {
    if (n.op == Op::kParameter) names.push_back(n.name);
  }
  return names;
}

std::string Graph::describe(std::size_t id) const {
  const Node& n = nodes_.at(id);
  if (!n.name.empty()) return n.name;
  return std::string(op_name(n.op)) + "#" + std::to_string(id);
}

Evaluation forward(const Graph& graph, const Bindings& bindings) {
  const Var out = graph.output();
  Evaluation ev;
  ev.output_ = out.id;
  ev.values_.reserve(graph.size());
  auto& vals = ev.values_;

  for (std::size_t id = 0; id < graph.size(); ++id) {
    const Node& n = graph.nodes()[id];
    auto in = [&](std::size_t k) -> const Tensor& { return vals[n.inputs[k]]; };
    auto shape_error = [&](const std::string& msg) {
      return ShapeError(msg, graph.describe(id));
    };

    switch (n.op) {
      case Op::kConstant:
        vals.push_back(n.value);
        break;
      case Op::kParameter: {
        auto it = bindings.find(n.name);
        if (it == bindings.end()) {
          throw ValidationError("parameter '" + n.name + "' is not bound");
        }
        vals.push_back(it->second);
        break;
      }
      case Op::kMatMul: {
        const Tensor& a = in(0);
        const Tensor& b = in(1);
        if (a.rank() != 2 || b.rank() != 2 || a.shape()[1] != b.shape()[0]) {
          throw shape_error("matmul of " + a.shape_string() + " and " + b.shape_string());
        }
        vals.push_back(Tensor::from_matrix(a.matrix() * b.matrix()));
        break;
      }
      case Op::kTranspose: {
        const Tensor& a = in(0);
        if (a.rank() != 2) throw shape_error("transpose needs rank 2, got " + a.shape_string());
        vals.push_back(Tensor::from_matrix(a.matrix().transpose()));
        break;
      }
      case Op::kAdd:
      case Op::kSub:
      case Op::kMul: {
        const Tensor& a = in(0);
        const Tensor& b = in(1);
        if (!a.same_shape(b)) {
          throw shape_error(std::string(op_name(n.op)) + " of " + a.shape_string() + " and " +
                            b.shape_string());
        }
        Tensor r = a;
        if (n.op == Op::kAdd) {
          r.matrix() += b.matrix();
        } else if (n.op == Op::kSub) {
          r.matrix() -= b.matrix();
        } else {
          r.matrix().array() *= b.matrix().array();
        }
        vals.push_back(std::move(r));
        break;
      }
      case Op::kScalarMul: {
        const Tensor& s = in(0);
        if (s.size() != 1) {
          throw shape_error("scalar_mul factor must have one element, got " + s.shape_string());
        }
        Tensor r = in(1);
        r.matrix() *= s[0];
        vals.push_back(std::move(r));
        break;
      }
      case Op::kExp: {
        Tensor r = in(0);
        r.matrix() = r.matrix().array().exp().matrix();
        require_finite(graph, id, r);
        vals.push_back(std::move(r));
        break;
      }
      case Op::kLog: {
        Tensor r = in(0);
        auto m = r.matrix();
        for (Index i = 0; i < m.size(); ++i) {
          const double x = m.data()[i] + n.shift;
          if (!(x > 0.0)) {
            throw NumericError("node '" + graph.describe(id) + "': log of non-positive value " +
                               std::to_string(x));
          }
          m.data()[i] = std::log(x);
        }
        require_finite(graph, id, r);
        vals.push_back(std::move(r));
        break;
      }
      case Op::kRowL2Normalize: {
        const Tensor& a = in(0);
        if (a.rank() == 0) throw shape_error("row_l2_normalize needs rank >= 1");
        Tensor r = a;
        auto m = r.matrix();
        for (Index row = 0; row < m.rows(); ++row) {
          const double norm = m.row(row).norm();
          if (!(norm >= kMinRowNorm)) {
            throw NumericError("node '" + graph.describe(id) + "': row " + std::to_string(row) +
                               " has norm " + std::to_string(norm) + " below " +
                               std::to_string(kMinRowNorm));
          }
          m.row(row) /= norm;
        }
        vals.push_back(std::move(r));
        break;
      }
      case Op::kSoftmax: {
        const Tensor& a = in(0);
        check_axis(graph, id, a, n.axis, false);
        if (!a.all_finite()) {
          throw NumericError("node '" + graph.describe(id) + "': softmax of non-finite input");
        }
        Tensor r = softmax(a, n.axis);
        require_finite(graph, id, r);
        vals.push_back(std::move(r));
        break;
      }
      case Op::kSum:
      case Op::kMean: {
        const Tensor& a = in(0);
        check_axis(graph, id, a, n.axis, true);
        vals.push_back(reduce(a, n.axis, n.op == Op::kMean));
        break;
      }
    }
  }
  return ev;
}

Gradients backward(const Graph& graph, const Evaluation& values,
                   const std::set<std::string>& wrt) {
  const auto& vals = values.values();
  const std::size_t out = graph.output().id;
  if (vals.size() != graph.size()) throw ValidationError("evaluation does not match graph");
  if (vals[out].size() != 1) {
    throw ShapeError("gradient needs a scalar output, got " + vals[out].shape_string(),
                     graph.describe(out));
  }
  std::map<std::string, std::size_t> param_ids;
  for (std::size_t id = 0; id < graph.size(); ++id) {
    const Node& n = graph.nodes()[id];
    if (n.op == Op::kParameter) param_ids[n.name] = id;
  }
  for (const auto& name : wrt) {
    if (!param_ids.count(name)) throw ValidationError("unknown parameter '" + name + "'");
  }

  std::vector<std::optional<Tensor>> adj(graph.size());
  adj[out] = Tensor(vals[out].shape(), {1.0});

  auto accumulate = [&](std::size_t id, Tensor g) {
    if (adj[id]) {
      adj[id]->matrix() += g.matrix();
    } else {
      adj[id] = std::move(g);
    }
  };

  for (std::size_t id = out + 1; id-- > 0;) {
    if (!adj[id]) continue;
    const Node& n = graph.nodes()[id];
    const Tensor& g = *adj[id];
    const Tensor& y = vals[id];
    auto in = [&](std::size_t k) -> const Tensor& { return vals[n.inputs[k]]; };

    switch (n.op) {
      case Op::kConstant:
      case Op::kParameter:
        break;
      case Op::kMatMul: {
        accumulate(n.inputs[0], Tensor::from_matrix(g.matrix() * in(1).matrix().transpose()));
        accumulate(n.inputs[1], Tensor::from_matrix(in(0).matrix().transpose() * g.matrix()));
        break;
      }
      case Op::kTranspose:
        accumulate(n.inputs[0], Tensor::from_matrix(g.matrix().transpose()));
        break;
      case Op::kAdd:
        accumulate(n.inputs[0], g);
        accumulate(n.inputs[1], g);
        break;
      case Op::kSub: {
        accumulate(n.inputs[0], g);
        Tensor neg = g;
        neg.matrix() *= -1.0;
        accumulate(n.inputs[1], std::move(neg));
        break;
      }
      case Op::kMul: {
        Tensor ga = g;
        ga.matrix().array() *= in(1).matrix().array();
        Tensor gb = g;
        gb.matrix().array() *= in(0).matrix().array();
        accumulate(n.inputs[0], std::move(ga));
        accumulate(n.inputs[1], std::move(gb));
        break;
      }
      case Op::kScalarMul: {
        const Tensor& s = in(0);
        const double ds = (g.matrix().array() * in(1).matrix().array()).sum();
        accumulate(n.inputs[0], Tensor(s.shape(), {ds}));
        Tensor gx = g;
        gx.matrix() *= s[0];
        accumulate(n.inputs[1], std::move(gx));
        break;
      }
      case Op::kExp: {
        Tensor gx = g;
        gx.matrix().array() *= y.matrix().array();
        accumulate(n.inputs[0], std::move(gx));
        break;
      }
      case Op::kLog: {
        Tensor gx = g;
        gx.matrix().array() /= (in(0).matrix().array() + n.shift);
        accumulate(n.inputs[0], std::move(gx));
        break;
      }
      case Op::kRowL2Normalize: {
        const auto x = in(0).matrix();
        const auto ym = y.matrix();
        const auto gm = g.matrix();
        Tensor gx = Tensor::zeros(in(0).shape());
        auto o = gx.matrix();
        for (Index r = 0; r < x.rows(); ++r) {
          const double norm = x.row(r).norm();
          const double proj = ym.row(r).dot(gm.row(r));
          o.row(r) = (gm.row(r) - proj * ym.row(r)) / norm;
        }
        accumulate(n.inputs[0], std::move(gx));
        break;
      }
      case Op::kSoftmax: {
        const auto ym = y.matrix();
        const auto gm = g.matrix();
        Tensor gx = y;
        auto o = gx.matrix();
        if (view_axis(y, n.axis) == 1) {
          for (Index r = 0; r < ym.rows(); ++r) {
            const double dot = ym.row(r).dot(gm.row(r));
            o.row(r) = ym.row(r).array() * (gm.row(r).array() - dot);
          }
        } else {
          for (Index c = 0; c < ym.cols(); ++c) {
            const double dot = ym.col(c).dot(gm.col(c));
            o.col(c) = ym.col(c).array() * (gm.col(c).array() - dot);
          }
        }
        accumulate(n.inputs[0], std::move(gx));
        break;
      }
      case Op::kSum:
      case Op::kMean:
        accumulate(n.inputs[0], unreduce(in(0), g, n.axis, n.op == Op::kMean));
        break;
    }
  }

  Gradients grads;
  for (const auto& name : wrt) {
    const std::size_t id = param_ids.at(name);
    grads[name] = adj[id] ? *adj[id] : Tensor::zeros(vals[id].shape());
  }
  return grads;
}

Tensor evaluate(const Graph& graph, const Bindings& bindings) {
  return forward(graph, bindings).output();
}

Gradients gradient(const Graph& graph, const Bindings& bindings,
                   const std::set<std::string>& wrt) {
  return backward(graph, forward(graph, bindings), wrt);
}

}  // namespace pouf::grad
