#pragma once

#include <functional>
#include <set>
#include <string>

#include "pouf/graph.hpp"

namespace pouf::grad {

using ScalarFunction = std::function<double(const Bindings&)>;

/// Central differences `(fn(x + h) - fn(x - h)) / 2h`, one coordinate at a time.
Gradients finite_difference(const ScalarFunction& fn, const Bindings& bindings,
                            const std::set<std::string>& wrt, double h = 1e-5);

/// `fn` evaluating `graph` and returning its scalar output.
ScalarFunction as_function(const Graph& graph);

/// Worst entrywise mismatch between two gradient maps, normalized so that an entry passes
/// `|a - b| <= atol + rtol * max(|a|, |b|)` exactly when the returned value is <= rtol.
double gradient_mismatch(const Gradients& analytic, const Gradients& numeric,
                         double rtol = 1e-4, double atol = 1e-7);

}  // namespace pouf::grad
