#pragma once

#include <cstddef>
#include <vector>

#include "cpr/core/graph.hpp"

namespace cpr::core {

// Primitive differentiable ops. All are pure: inputs are never modified and
// results are fresh nodes. Binary elementwise ops follow numpy broadcasting.

template <typename T> Var<T> add(Var<T> a, Var<T> b);
template <typename T> Var<T> sub(Var<T> a, Var<T> b);
template <typename T> Var<T> mul(Var<T> a, Var<T> b);
/// Throws DomainError when any divisor element is zero.
template <typename T> Var<T> divide(Var<T> a, Var<T> b);

template <typename T> Var<T> scale(Var<T> a, T factor);
template <typename T> Var<T> add_scalar(Var<T> a, T offset);
template <typename T> Var<T> neg(Var<T> a) { return scale(a, T(-1)); }

/// (..., k) x (k, n) -> (..., n), or batched (b, n, k) x (b, k, m) -> (b, n, m).
template <typename T> Var<T> matmul(Var<T> a, Var<T> b);

template <typename T> Var<T> exp(Var<T> a);
/// Throws DomainError for nonpositive inputs.
template <typename T> Var<T> log(Var<T> a);
/// Throws DomainError for negative inputs.
template <typename T> Var<T> sqrt(Var<T> a);
template <typename T> Var<T> relu(Var<T> a);
/// Exact GELU: x * Phi(x).
template <typename T> Var<T> gelu(Var<T> a);

/// Normalises over the last axis: (x - mean) / sqrt(var + eps), no affine.
template <typename T> Var<T> layer_norm(Var<T> a, T eps = T(1e-5));
/// Softmax over the last axis, max-subtracted.
template <typename T> Var<T> softmax(Var<T> a);

/// Reductions drop the reduced axis. Max routes the gradient to the first
/// maximal element.
template <typename T> Var<T> max_reduce(Var<T> a, std::size_t axis);
template <typename T> Var<T> mean_reduce(Var<T> a, std::size_t axis);
template <typename T> Var<T> sum_reduce(Var<T> a, std::size_t axis);
template <typename T> Var<T> sum_all(Var<T> a);
template <typename T> Var<T> mean_all(Var<T> a);

template <typename T> Var<T> concat(const std::vector<Var<T>>& parts, std::size_t axis);
/// Selects `indices` along `axis`; repeated indices are allowed and their
/// gradients accumulate.
template <typename T>
Var<T> gather(Var<T> a, const std::vector<std::size_t>& indices, std::size_t axis = 0);

/// Swaps the last two axes.
template <typename T> Var<T> transpose(Var<T> a);
template <typename T> Var<T> permute(Var<T> a, const std::vector<std::size_t>& order);
template <typename T> Var<T> reshape(Var<T> a, Shape shape);
template <typename T> Var<T> broadcast_to(Var<T> a, Shape shape);

/// Composite: rows of the last axis scaled to unit L2 norm.
template <typename T> Var<T> l2_normalize(Var<T> a, T eps = T(1e-12));

/// Composite: x W + b for a (..., in) input, W (in, out), b (out).
template <typename T> Var<T> linear(Var<T> x, Var<T> weight, Var<T> bias);

template <typename T> Var<T> operator+(Var<T> a, Var<T> b) { return add(a, b); }
template <typename T> Var<T> operator-(Var<T> a, Var<T> b) { return sub(a, b); }
template <typename T> Var<T> operator*(Var<T> a, Var<T> b) { return mul(a, b); }

/// numpy-style broadcast of two shapes; throws ShapeError naming both.
Shape broadcast_shapes(const Shape& a, const Shape& b, const char* op);

}  // namespace cpr::core
