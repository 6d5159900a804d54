#include "cpr/core/autodiff.hpp"

#include <algorithm>
#include <cstdint>
#include <cmath>
#include <limits>
#include <optional>

namespace cpr::core {

template <typename T>
Tensor<T> forward(const Expr<T>& expr, const ParamSet<T>& inputs) {
  Graph<T> graph;
  ParamScope<T> scope(graph, inputs);
  return expr(scope).value();
}

template <typename T>
ParamSet<T> gradient(const Expr<T>& expr, const ParamSet<T>& inputs,
                     const std::vector<std::string>& wrt) {
  for (const auto& name : wrt) {
    if (!inputs.contains(name)) throw UnknownNameError("gradient: unknown name '" + name + "'");
    if (!inputs.trainable(name)) throw UnknownNameError("gradient: '" + name + "' is frozen");
  }
  Graph<T> graph;
  ParamScope<T> scope(graph, inputs);
  Var<T> out = expr(scope);
  if (out.value().size() != 1) {
    throw NonScalarError("gradient: expression value has shape " + shape_str(out.shape()));
  }
  graph.backward(out);
  ParamSet<T> grads;
  for (const auto& name : wrt) {
    auto it = scope.bound().find(name);
    const Tensor<T>* g = it == scope.bound().end() ? nullptr : graph.grad(it->second);
    grads.add(name, g ? *g : Tensor<T>(inputs.at(name).shape()));
  }
  return grads;
}

template <typename T>
ParamSet<T> gradient(const Expr<T>& expr, const ParamSet<T>& inputs) {
  return gradient(expr, inputs, inputs.trainable_names());
}

namespace {

template <typename P>
struct Evaluation {
  std::vector<P> values;
  std::uint64_t branches = 0;
};

template <typename P>
Evaluation<P> evaluate(const MultiExpr<P>& expr, const ParamSet<P>& inputs) {
  Graph<P> graph;
  ParamScope<P> scope(graph, inputs);
  Evaluation<P> out;
  for (const auto& v : expr(scope)) out.values.push_back(v.value().item());
  out.branches = graph.branch_signature();
  return out;
}

constexpr int kMaxKinkReprobes = 3;
// Forward fourth-order weights for f(x + j h) - f(x), j = 1..4.
constexpr double kOneSided[4] = {48.0 / 12, -36.0 / 12, 16.0 / 12, -3.0 / 12};

std::vector<ParamSet<double>> analytic_gradients(const MultiExpr<double>& expr,
                                                 const ParamSet<double>& inputs,
                                                 const std::vector<std::string>& names) {
  std::vector<ParamSet<double>> analytic;
  Graph<double> graph;
  ParamScope<double> scope(graph, inputs);
  for (const auto& out : expr(scope)) {
    if (out.value().size() != 1) {
      throw NonScalarError("finite_difference_check: output of shape " + shape_str(out.shape()));
    }
    graph.backward(out);
    ParamSet<double> grads;
    for (const auto& name : names) {
      auto it = scope.bound().find(name);
      const Tensor<double>* g = it == scope.bound().end() ? nullptr : graph.grad(it->second);
      grads.add(name, g ? *g : Tensor<double>(inputs.at(name).shape()));
    }
    analytic.push_back(std::move(grads));
  }
  return analytic;
}

// Numeric partials of every output, evaluated in precision P.
template <typename P>
class Prober {
 public:
  Prober(const MultiExpr<P>& expr, const ParamSet<double>& inputs, int order)
      : expr_(expr), params_(inputs.template cast<P>()), base_(evaluate(expr_, params_)) {
    // Symmetric pairs (offset in steps, weight) of the central stencil; each
    // pair contributes weight * (f(x + offset h) - f(x - offset h)) / h, so an
    // output that ignores the coordinate gives exactly zero.
    if (order == 2) {
      stencil_ = {{1, P(0.5)}};
    } else {
      stencil_ = {{1, P(8) / 12}, {2, P(-1) / 12}};
    }
  }

  std::size_t outputs() const { return base_.values.size(); }

  std::vector<double> derivative(const std::string& name, std::size_t i, double eps,
                                 bool& kinked) {
    Tensor<P>& value = params_.at(name);
    const P original = value[i];
    std::vector<P> numeric(outputs());
    P step = static_cast<P>(eps);
    for (int attempt = 0;; ++attempt) {
      std::fill(numeric.begin(), numeric.end(), P(0));
      bool smooth = true;
      for (const auto& [offset, weight] : stencil_) {
        value[i] = original + offset * step;
        const auto plus = evaluate(expr_, params_);
        value[i] = original - offset * step;
        const auto minus = evaluate(expr_, params_);
        smooth = smooth && plus.branches == base_.branches && minus.branches == base_.branches;
        for (std::size_t k = 0; k < numeric.size(); ++k) {
          numeric[k] += weight * (plus.values[k] - minus.values[k]);
        }
      }
      value[i] = original;
      if (!smooth) {
        kinked = true;
        smooth = one_sided(value, i, step, numeric);
      }
      if (smooth || attempt == kMaxKinkReprobes) break;
      step /= 10;
    }
    std::vector<double> out(numeric.size());
    for (std::size_t k = 0; k < out.size(); ++k) out[k] = static_cast<double>(numeric[k] / step);
    return out;
  }

 private:
  // The central stencil straddles a kink. Try a one-sided fourth-order
  // stencil on a side that keeps the branches the analytic pass took.
  bool one_sided(Tensor<P>& value, std::size_t i, P step, std::vector<P>& numeric) {
    const P original = value[i];
    for (const P side : {P(1), P(-1)}) {
      std::vector<Evaluation<P>> f;
      for (int j = 1; j <= 4; ++j) {
        value[i] = original + j * side * step;
        f.push_back(evaluate(expr_, params_));
        if (f.back().branches != base_.branches) break;
      }
      value[i] = original;
      if (f.size() < 4 || f.back().branches != base_.branches) continue;
      for (std::size_t k = 0; k < numeric.size(); ++k) {
        P acc = 0;
        for (int j = 0; j < 4; ++j) acc += P(kOneSided[j]) * (f[j].values[k] - base_.values[k]);
        numeric[k] = side * acc;
      }
      return true;
    }
    return false;
  }

  const MultiExpr<P>& expr_;
  ParamSet<P> params_;
  Evaluation<P> base_;
  std::vector<std::pair<P, P>> stencil_;
};

double relative_error(double exact, double num) {
  const double denom = std::max({std::abs(exact), std::abs(num), 1e-8});
  const double rel = std::abs(exact - num) / denom;
  return std::isnan(rel) ? std::numeric_limits<double>::infinity() : rel;
}

// Double-precision probes whose worst relative error exceeds this are redone
// in long double when a probe expression for it is available.
constexpr double kEscalateAbove = 1e-5;

std::vector<GradCheckReport> check(const MultiExpr<double>& expr,
                                   const MultiExpr<long double>* precise_expr,
                                   const ParamSet<double>& inputs,
                                   const FiniteDifferenceOptions& opts) {
  if (!(opts.eps > 0)) throw DomainError("finite_difference_check: eps must be positive");
  if (opts.order != 2 && opts.order != 4) {
    throw DomainError("finite_difference_check: order must be 2 or 4");
  }
  const auto names = inputs.trainable_names();
  const auto analytic = analytic_gradients(expr, inputs, names);
  Prober<double> fast(expr, inputs, opts.order);
  std::optional<Prober<long double>> precise;

  std::vector<GradCheckReport> reports(analytic.size());
  for (const auto& name : names) {
    for (std::size_t i = 0; i < inputs.at(name).size(); ++i) {
      bool kinked = false;
      auto numeric = fast.derivative(name, i, opts.eps, kinked);
      double worst = 0;
      for (std::size_t k = 0; k < reports.size(); ++k) {
        worst = std::max(worst, relative_error(analytic[k].at(name)[i], numeric[k]));
      }
      if (worst > kEscalateAbove && precise_expr) {
        if (!precise) {
          precise.emplace(*precise_expr, inputs, opts.order);
          if (precise->outputs() != reports.size()) {
            throw ShapeError("finite_difference_check: probe expression has a different output count");
          }
        }
        numeric = precise->derivative(name, i, opts.eps, kinked);
        for (auto& r : reports) ++r.precise_reprobes;
      }
      if (kinked) {
        for (auto& r : reports) ++r.kink_reprobes;
      }
      for (std::size_t k = 0; k < reports.size(); ++k) {
        const double exact = analytic[k].at(name)[i];
        const double rel = relative_error(exact, numeric[k]);
        auto& r = reports[k];
        ++r.checked;
        if (r.worst_name.empty() || rel > r.max_rel_error) {
          r.max_rel_error = rel;
          r.worst_name = name;
          r.worst_index = i;
          r.worst_analytic = exact;
          r.worst_numeric = numeric[k];
        }
      }
    }
  }
  if (fast.outputs() != reports.size()) {
    throw ShapeError("finite_difference_check: output count changed between passes");
  }
  return reports;
}

}  // namespace

std::vector<GradCheckReport> finite_difference_check(const MultiExpr<double>& expr,
                                                     const ParamSet<double>& inputs,
                                                     const FiniteDifferenceOptions& opts) {
  return check(expr, nullptr, inputs, opts);
}

std::vector<GradCheckReport> finite_difference_check(const MultiExpr<double>& expr,
                                                     const MultiExpr<long double>& probe_expr,
                                                     const ParamSet<double>& inputs,
                                                     const FiniteDifferenceOptions& opts) {
  return check(expr, &probe_expr, inputs, opts);
}

std::vector<GradCheckReport> finite_difference_check(const MultiExpr<double>& expr,
                                                     const ParamSet<double>& inputs, double eps) {
  return finite_difference_check(expr, inputs, FiniteDifferenceOptions{eps, 2});
}

GradCheckReport finite_difference_check(const Expr<double>& expr, const ParamSet<double>& inputs,
                                        double eps) {
  MultiExpr<double> multi = [&expr](ParamScope<double>& scope) {
    return std::vector<Var<double>>{expr(scope)};
  };
  return finite_difference_check(multi, inputs, eps).front();
}

template Tensor<float> forward(const Expr<float>&, const ParamSet<float>&);
template Tensor<double> forward(const Expr<double>&, const ParamSet<double>&);
template ParamSet<float> gradient(const Expr<float>&, const ParamSet<float>&,
                                  const std::vector<std::string>&);
template ParamSet<double> gradient(const Expr<double>&, const ParamSet<double>&,
                                   const std::vector<std::string>&);
template ParamSet<float> gradient(const Expr<float>&, const ParamSet<float>&);
template ParamSet<double> gradient(const Expr<double>&, const ParamSet<double>&);

}  // namespace cpr::core
