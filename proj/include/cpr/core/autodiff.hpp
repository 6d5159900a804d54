#pragma once

#include <functional>
#include <string>
#include <vector>

#include "cpr/core/params.hpp"

namespace cpr::core {

/// A computation graph builder: records its ops against the scope's graph
/// and returns the output node.
template <typename T>
using Expr = std::function<Var<T>(ParamScope<T>&)>;

/// Several scalar outputs sharing one forward pass.
template <typename T>
using MultiExpr = std::function<std::vector<Var<T>>(ParamScope<T>&)>;

template <typename T>
Tensor<T> forward(const Expr<T>& expr, const ParamSet<T>& inputs);

/// Exact reverse-mode partials of a scalar expression. Every name in `wrt`
/// must be a trainable entry of `inputs`; names the expression never touches
/// get zero gradients.
template <typename T>
ParamSet<T> gradient(const Expr<T>& expr, const ParamSet<T>& inputs,
                     const std::vector<std::string>& wrt);

/// All trainable gradients at once, in lexicographic name order.
template <typename T>
ParamSet<T> gradient(const Expr<T>& expr, const ParamSet<T>& inputs);

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::string worst_name;
  std::size_t worst_index = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  std::size_t checked = 0;
  std::size_t kink_reprobes = 0;     // coordinates whose central stencil crossed a kink
  std::size_t precise_reprobes = 0;  // coordinates re-probed in long double
};

/// Central differences (f(x+eps) - f(x-eps)) / (2 eps) per coordinate of
/// every trainable entry, against gradient(). Relative error uses
/// max(|analytic|, |numeric|, 1e-8) as denominator. Frozen entries are
/// never perturbed and never reported.
///
/// When either probe takes a different branch of a non-smooth op than the
/// unperturbed graph (see Graph::note_branches), the difference straddles a
/// kink and says nothing about the derivative at x. That coordinate is then
/// differenced one-sided on a side that keeps the branches, or, if both
/// sides cross, re-probed with eps / 10, up to three times.
GradCheckReport finite_difference_check(const Expr<double>& expr, const ParamSet<double>& inputs,
                                        double eps = 1e-5);

struct FiniteDifferenceOptions {
  double eps = 1e-5;
  /// 2: (f(x+h) - f(x-h)) / 2h. 4: the five-point stencil
  /// (f(x-2h) - 8f(x-h) + 8f(x+h) - f(x+2h)) / 12h, whose O(h^4) truncation
  /// allows a larger h and so less cancellation noise on tiny gradients.
  int order = 2;
};

/// Same check for several outputs, reusing each perturbed forward pass.
std::vector<GradCheckReport> finite_difference_check(const MultiExpr<double>& expr,
                                                     const ParamSet<double>& inputs,
                                                     double eps = 1e-5);
std::vector<GradCheckReport> finite_difference_check(const MultiExpr<double>& expr,
                                                     const ParamSet<double>& inputs,
                                                     const FiniteDifferenceOptions& opts);

/// As above, but any coordinate whose double-precision probe disagrees by
/// more than 1e-5 is probed again with `probe_expr` (the same computation
/// built in long double), whose evaluation roundoff sits far below the 1e-8
/// floor of the relative error. Analytic gradients always come from `expr`.
std::vector<GradCheckReport> finite_difference_check(const MultiExpr<double>& expr,
                                                     const MultiExpr<long double>& probe_expr,
                                                     const ParamSet<double>& inputs,
                                                     const FiniteDifferenceOptions& opts);

}  // namespace cpr::core
