#include "pouf/finite_difference.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "pouf/errors.hpp"

namespace pouf::grad {

Gradients finite_difference(const ScalarFunction& fn, const Bindings& bindings,
                            const std::set<std::string>& wrt, double h) {
  if (!(h > 0.0)) throw ValidationError("finite-difference step must be positive");
  Gradients out;
  Bindings probe = bindings;
  for (const auto& name : wrt) {
    auto it = probe.find(name);
    if (it == probe.end()) throw ValidationError("unknown parameter '" + name + "'");
    Tensor& x = it->second;
    Tensor g = Tensor::zeros(x.shape());
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double saved = x[i];
      x[i] = saved + h;
      const double up = fn(probe);
      x[i] = saved - h;
      const double down = fn(probe);
      x[i] = saved;
      g[i] = (up - down) / (2.0 * h);
    }
    out[name] = std::move(g);
  }
  return out;
}

ScalarFunction as_function(const Graph& graph) {
  return [&graph](const Bindings& b) { return evaluate(graph, b).item(); };
}

double gradient_mismatch(const Gradients& analytic, const Gradients& numeric, double rtol,
                         double atol) {
  double worst = 0.0;
  const double floor = atol / rtol;
  for (const auto& [name, a] : analytic) {
    auto it = numeric.find(name);
    if (it == numeric.end() || !it->second.same_shape(a)) {
      throw ValidationError("gradient maps disagree on parameter '" + name + "'");
    }
    const Tensor& b = it->second;
    for (std::size_t i = 0; i < a.size(); ++i) {
      const double err = std::abs(a[i] - b[i]);
      const double scale = std::max(std::abs(a[i]), std::abs(b[i])) + floor;
      const double rel = err / scale;
      if (!std::isfinite(rel)) return std::numeric_limits<double>::infinity();
      worst = std::max(worst, rel);
    }
  }
  return worst;
}

}  // namespace pouf::grad
