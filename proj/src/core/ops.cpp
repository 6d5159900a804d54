#include "cpr/core/ops.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

namespace cpr::core {

namespace {

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using ConstMap = Eigen::Map<const RowMat<T>>;
template <typename T>
using MutMap = Eigen::Map<RowMat<T>>;

using Strides = std::vector<std::size_t>;

/// Strides of `in` laid against the (right-aligned) output shape; broadcast
/// axes get stride 0.
Strides broadcast_strides(const Shape& in, const Shape& out) {
  Strides strides(out.size(), 0);
  std::size_t stride = 1;
  for (std::size_t k = 0; k < in.size(); ++k) {
    std::size_t i = in.size() - 1 - k;
    std::size_t o = out.size() - 1 - k;
    strides[o] = in[i] == 1 && out[o] != 1 ? 0 : stride;
    stride *= in[i];
  }
  return strides;
}

/// Calls f(out_index, a_index, b_index) over every element of `out`.
template <class F>
void for_each_broadcast(const Shape& out, const Strides& sa, const Strides& sb, F&& f) {
  const std::size_t rank = out.size();
  if (rank == 0) {
    f(std::size_t{0}, std::size_t{0}, std::size_t{0});
    return;
  }
  const std::size_t total = numel(out);
  if (total == 0) return;
  const std::size_t inner = out[rank - 1];
  const std::size_t ia_step = sa[rank - 1];
  const std::size_t ib_step = sb[rank - 1];
  std::vector<std::size_t> counter(rank, 0);
  std::size_t ia = 0;
  std::size_t ib = 0;
  for (std::size_t base = 0; base < total; base += inner) {
    for (std::size_t j = 0; j < inner; ++j) f(base + j, ia + j * ia_step, ib + j * ib_step);
    for (std::size_t d = rank - 1; d-- > 0;) {
      ++counter[d];
      ia += sa[d];
      ib += sb[d];
      if (counter[d] < out[d]) break;
      ia -= sa[d] * out[d];
      ib -= sb[d] * out[d];
      counter[d] = 0;
    }
  }
}

struct AxisSplit {
  std::size_t outer = 1;
  std::size_t n = 1;
  std::size_t inner = 1;
};

AxisSplit split_at(const Shape& shape, std::size_t axis, const char* op) {
  if (axis >= shape.size()) {
    throw ShapeError(std::string(op) + ": axis " + std::to_string(axis) + " out of range for " +
                     shape_str(shape));
  }
  AxisSplit s;
  for (std::size_t i = 0; i < axis; ++i) s.outer *= shape[i];
  s.n = shape[axis];
  for (std::size_t i = axis + 1; i < shape.size(); ++i) s.inner *= shape[i];
  return s;
}

Shape drop_axis(const Shape& shape, std::size_t axis) {
  Shape out;
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i != axis) out.push_back(shape[i]);
  }
  return out;
}

template <typename T, class Fwd, class DA, class DB>
Var<T> binary(Var<T> a, Var<T> b, const char* name, Fwd fwd, DA da, DB db) {
  Graph<T>& g = a.graph();
  const Tensor<T>& av = a.value();
  const Tensor<T>& bv = b.value();
  Shape out_shape;
  try {
    out_shape = broadcast_shapes(av.shape(), bv.shape(), name);
  } catch (const ShapeError&) {
    throw ShapeError(std::string(name) + ": shape mismatch between " + g.describe(a.id()) +
                     " and " + g.describe(b.id()));
  }
  Tensor<T> out(out_shape);
  const bool same = av.shape() == bv.shape();
  Strides sa;
  Strides sb;
  if (same) {
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = fwd(av[i], bv[i]);
  } else {
    sa = broadcast_strides(av.shape(), out_shape);
    sb = broadcast_strides(bv.shape(), out_shape);
    for_each_broadcast(out_shape, sa, sb, [&](std::size_t i, std::size_t ia, std::size_t ib) {
      out[i] = fwd(av[ia], bv[ib]);
    });
  }
  const std::size_t ida = a.id();
  const std::size_t idb = b.id();
  return g.record(
      std::move(out), {a, b},
      [ida, idb, same, sa, sb, da, db](const Tensor<T>& go, const Tensor<T>&, Graph<T>& gr) {
        const Tensor<T>& x = gr.value(ida);
        const Tensor<T>& y = gr.value(idb);
        const bool need_a = gr.requires_grad(ida);
        const bool need_b = gr.requires_grad(idb);
        Tensor<T>* ga = need_a ? &gr.grad_of(ida) : nullptr;
        Tensor<T>* gb = need_b ? &gr.grad_of(idb) : nullptr;
        if (same) {
          for (std::size_t i = 0; i < go.size(); ++i) {
            if (ga) (*ga)[i] += da(go[i], x[i], y[i]);
            if (gb) (*gb)[i] += db(go[i], x[i], y[i]);
          }
        } else {
          for_each_broadcast(go.shape(), sa, sb,
                             [&](std::size_t i, std::size_t ia, std::size_t ib) {
                               if (ga) (*ga)[ia] += da(go[i], x[ia], y[ib]);
                               if (gb) (*gb)[ib] += db(go[i], x[ia], y[ib]);
                             });
        }
      },
      name);
}

/// Elementwise unary op; `deriv(x, y)` is dy/dx given input and output.
template <typename T, class Fwd, class Deriv>
Var<T> unary(Var<T> a, const char* name, Fwd fwd, Deriv deriv) {
  const Tensor<T>& av = a.value();
  Tensor<T> out(av.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = fwd(av[i]);
  const std::size_t ida = a.id();
  return a.graph().record(
      std::move(out), {a},
      [ida, deriv](const Tensor<T>& go, const Tensor<T>& y, Graph<T>& gr) {
        const Tensor<T>& x = gr.value(ida);
        Tensor<T>& ga = gr.grad_of(ida);
        for (std::size_t i = 0; i < go.size(); ++i) ga[i] += go[i] * deriv(x[i], y[i]);
      },
      name);
}

}  // namespace

Shape broadcast_shapes(const Shape& a, const Shape& b, const char* op) {
  const std::size_t rank = std::max(a.size(), b.size());
  Shape out(rank, 1);
  for (std::size_t k = 0; k < rank; ++k) {
    std::size_t da = k < a.size() ? a[a.size() - 1 - k] : 1;
    std::size_t db = k < b.size() ? b[b.size() - 1 - k] : 1;
    if (da != db && da != 1 && db != 1) {
      throw ShapeError(std::string(op) + ": cannot broadcast " + shape_str(a) + " with " +
                       shape_str(b));
    }
    out[rank - 1 - k] = da == 1 ? db : da;
  }
  return out;
}

template <typename T>
Var<T> add(Var<T> a, Var<T> b) {
  return binary(
      a, b, "add", [](T x, T y) { return x + y; }, [](T g, T, T) { return g; },
      [](T g, T, T) { return g; });
}

template <typename T>
Var<T> sub(Var<T> a, Var<T> b) {
  return binary(
      a, b, "sub", [](T x, T y) { return x - y; }, [](T g, T, T) { return g; },
      [](T g, T, T) { return -g; });
}

template <typename T>
Var<T> mul(Var<T> a, Var<T> b) {
  return binary(
      a, b, "mul", [](T x, T y) { return x * y; }, [](T g, T, T y) { return g * y; },
      [](T g, T x, T) { return g * x; });
}

template <typename T>
Var<T> divide(Var<T> a, Var<T> b) {
  for (T v : b.value().values()) {
    if (v == T(0)) {
      throw DomainError("divide: zero divisor in " + b.graph().describe(b.id()));
    }
  }
  return binary(
      a, b, "divide", [](T x, T y) { return x / y; }, [](T g, T, T y) { return g / y; },
      [](T g, T x, T y) { return -g * x / (y * y); });
}

template <typename T>
Var<T> scale(Var<T> a, T factor) {
  return unary(
      a, "scale", [factor](T x) { return x * factor; }, [factor](T, T) { return factor; });
}

template <typename T>
Var<T> add_scalar(Var<T> a, T offset) {
  return unary(
      a, "add_scalar", [offset](T x) { return x + offset; }, [](T, T) { return T(1); });
}

template <typename T>
Var<T> matmul(Var<T> a, Var<T> b) {
  Graph<T>& g = a.graph();
  const Tensor<T>& av = a.value();
  const Tensor<T>& bv = b.value();
  const auto mismatch = [&] {
    return ShapeError("matmul: shape mismatch between " + g.describe(a.id()) + " and " +
                      g.describe(b.id()));
  };
  const std::size_t ida = a.id();
  const std::size_t idb = b.id();

  if (bv.rank() == 2 && av.rank() >= 1) {
    const std::size_t k = bv.dim(0);
    const std::size_t n = bv.dim(1);
    if (av.shape().back() != k) throw mismatch();
    const std::size_t rows = av.size() / k;
    Shape out_shape(av.shape().begin(), av.shape().end() - 1);
    out_shape.push_back(n);
    Tensor<T> out(out_shape);
    MutMap<T>(out.data(), rows, n).noalias() =
        ConstMap<T>(av.data(), rows, k) * ConstMap<T>(bv.data(), k, n);
    return g.record(
        std::move(out), {a, b},
        [ida, idb, rows, k, n](const Tensor<T>& go, const Tensor<T>&, Graph<T>& gr) {
          ConstMap<T> dc(go.data(), rows, n);
          if (gr.requires_grad(ida)) {
            MutMap<T>(gr.grad_of(ida).data(), rows, k).noalias() +=
                dc * ConstMap<T>(gr.value(idb).data(), k, n).transpose();
          }
          if (gr.requires_grad(idb)) {
            MutMap<T>(gr.grad_of(idb).data(), k, n).noalias() +=
                ConstMap<T>(gr.value(ida).data(), rows, k).transpose() * dc;
          }
        },
        "matmul");
  }

  if (av.rank() == 3 && bv.rank() == 3 && av.dim(0) == bv.dim(0) && av.dim(2) == bv.dim(1)) {
    const std::size_t batch = av.dim(0);
    const std::size_t n = av.dim(1);
    const std::size_t k = av.dim(2);
    const std::size_t m = bv.dim(2);
    Tensor<T> out(Shape{batch, n, m});
    for (std::size_t i = 0; i < batch; ++i) {
      MutMap<T>(out.data() + i * n * m, n, m).noalias() =
          ConstMap<T>(av.data() + i * n * k, n, k) * ConstMap<T>(bv.data() + i * k * m, k, m);
    }
    return g.record(
        std::move(out), {a, b},
        [ida, idb, batch, n, k, m](const Tensor<T>& go, const Tensor<T>&, Graph<T>& gr) {
          const bool need_a = gr.requires_grad(ida);
          const bool need_b = gr.requires_grad(idb);
          T* ga = need_a ? gr.grad_of(ida).data() : nullptr;
          T* gb = need_b ? gr.grad_of(idb).data() : nullptr;
          const T* x = gr.value(ida).data();
          const T* y = gr.value(idb).data();
          for (std::size_t i = 0; i < batch; ++i) {
            ConstMap<T> dc(go.data() + i * n * m, n, m);
            if (ga) {
              MutMap<T>(ga + i * n * k, n, k).noalias() +=
                  dc * ConstMap<T>(y + i * k * m, k, m).transpose();
            }
            if (gb) {
              MutMap<T>(gb + i * k * m, k, m).noalias() +=
                  ConstMap<T>(x + i * n * k, n, k).transpose() * dc;
            }
          }
        },
        "matmul");
  }
  throw mismatch();
}

template <typename T>
Var<T> exp(Var<T> a) {
  return unary(
      a, "exp", [](T x) { return std::exp(x); }, [](T, T y) { return y; });
}

template <typename T>
Var<T> log(Var<T> a) {
  for (T v : a.value().values()) {
    if (!(v > T(0))) throw DomainError("log: nonpositive operand in " + a.graph().describe(a.id()));
  }
  return unary(
      a, "log", [](T x) { return std::log(x); }, [](T x, T) { return T(1) / x; });
}

template <typename T>
Var<T> sqrt(Var<T> a) {
  for (T v : a.value().values()) {
    if (v < T(0)) throw DomainError("sqrt: negative operand in " + a.graph().describe(a.id()));
  }
  return unary(
      a, "sqrt", [](T x) { return std::sqrt(x); }, [](T, T y) { return T(0.5) / y; });
}

template <typename T>
Var<T> relu(Var<T> a) {
  const Tensor<T>& av = a.value();
  std::vector<std::size_t> active;
  for (std::size_t i = 0; i < av.size(); ++i) {
    if (av[i] > T(0)) active.push_back(i);
  }
  a.graph().note_branches(active.data(), active.size());
  return unary(
      a, "relu", [](T x) { return x > T(0) ? x : T(0); },
      [](T x, T) { return x > T(0) ? T(1) : T(0); });
}

template <typename T>
Var<T> gelu(Var<T> a) {
  constexpr T inv_sqrt2 = T(1) / std::numbers::sqrt2_v<T>;
  constexpr T inv_sqrt2pi = std::numbers::inv_sqrtpi_v<T> * inv_sqrt2;
  return unary(
      a, "gelu", [](T x) { return T(0.5) * x * (T(1) + std::erf(x * inv_sqrt2)); },
      [](T x, T) {
        T cdf = T(0.5) * (T(1) + std::erf(x * inv_sqrt2));
        T pdf = inv_sqrt2pi * std::exp(T(-0.5) * x * x);
        return cdf + x * pdf;
      });
}

template <typename T>
Var<T> layer_norm(Var<T> a, T eps) {
  const Tensor<T>& av = a.value();
  if (av.rank() == 0) throw ShapeError("layer_norm: scalar operand " + a.graph().describe(a.id()));
  const std::size_t width = av.shape().back();
  const std::size_t rows = width == 0 ? 0 : av.size() / width;
  Tensor<T> out(av.shape());
  std::vector<T> inv_std(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    const T* x = av.data() + r * width;
    T* y = out.data() + r * width;
    T mean = 0;
    for (std::size_t j = 0; j < width; ++j) mean += x[j];
    mean /= T(width);
    T var = 0;
    for (std::size_t j = 0; j < width; ++j) var += (x[j] - mean) * (x[j] - mean);
    var /= T(width);
    inv_std[r] = T(1) / std::sqrt(var + eps);
    for (std::size_t j = 0; j < width; ++j) y[j] = (x[j] - mean) * inv_std[r];
  }
  const std::size_t ida = a.id();
  return a.graph().record(
      std::move(out), {a},
      [ida, rows, width, inv_std = std::move(inv_std)](const Tensor<T>& go, const Tensor<T>& yv,
                                                       Graph<T>& gr) {
        Tensor<T>& ga = gr.grad_of(ida);
        for (std::size_t r = 0; r < rows; ++r) {
          const T* g = go.data() + r * width;
          const T* y = yv.data() + r * width;
          T mean_g = 0;
          T mean_gy = 0;
          for (std::size_t j = 0; j < width; ++j) {
            mean_g += g[j];
            mean_gy += g[j] * y[j];
          }
          mean_g /= T(width);
          mean_gy /= T(width);
          T* dx = ga.data() + r * width;
          for (std::size_t j = 0; j < width; ++j) {
            dx[j] += inv_std[r] * (g[j] - mean_g - y[j] * mean_gy);
          }
        }
      },
      "layer_norm");
}

template <typename T>
Var<T> softmax(Var<T> a) {
  const Tensor<T>& av = a.value();
  if (av.rank() == 0) throw ShapeError("softmax: scalar operand " + a.graph().describe(a.id()));
  const std::size_t width = av.shape().back();
  const std::size_t rows = width == 0 ? 0 : av.size() / width;
  Tensor<T> out(av.shape());
  for (std::size_t r = 0; r < rows; ++r) {
    const T* x = av.data() + r * width;
    T* y = out.data() + r * width;
    T mx = x[0];
    for (std::size_t j = 1; j < width; ++j) mx = std::max(mx, x[j]);
    T total = 0;
    for (std::size_t j = 0; j < width; ++j) {
      y[j] = std::exp(x[j] - mx);
      total += y[j];
    }
    for (std::size_t j = 0; j < width; ++j) y[j] /= total;
  }
  const std::size_t ida = a.id();
  return a.graph().record(
      std::move(out), {a},
      [ida, rows, width](const Tensor<T>& go, const Tensor<T>& yv, Graph<T>& gr) {
        Tensor<T>& ga = gr.grad_of(ida);
        for (std::size_t r = 0; r < rows; ++r) {
          const T* g = go.data() + r * width;
          const T* y = yv.data() + r * width;
          T dot = 0;
          for (std::size_t j = 0; j < width; ++j) dot += g[j] * y[j];
          T* dx = ga.data() + r * width;
          for (std::size_t j = 0; j < width; ++j) dx[j] += y[j] * (g[j] - dot);
        }
      },
      "softmax");
}

template <typename T>
Var<T> max_reduce(Var<T> a, std::size_t axis) {
  const Tensor<T>& av = a.value();
  const AxisSplit s = split_at(av.shape(), axis, "max_reduce");
  if (s.n == 0) throw ShapeError("max_reduce: empty axis in " + a.graph().describe(a.id()));
  Tensor<T> out(drop_axis(av.shape(), axis));
  std::vector<std::size_t> arg(out.size());
  for (std::size_t o = 0; o < s.outer; ++o) {
    for (std::size_t i = 0; i < s.inner; ++i) {
      std::size_t best = o * s.n * s.inner + i;
      for (std::size_t j = 1; j < s.n; ++j) {
        std::size_t idx = (o * s.n + j) * s.inner + i;
        if (av[idx] > av[best]) best = idx;
      }
      out[o * s.inner + i] = av[best];
      arg[o * s.inner + i] = best;
    }
  }
  a.graph().note_branches(arg.data(), arg.size());
  const std::size_t ida = a.id();
  return a.graph().record(
      std::move(out), {a},
      [ida, arg = std::move(arg)](const Tensor<T>& go, const Tensor<T>&, Graph<T>& gr) {
        Tensor<T>& ga = gr.grad_of(ida);
        for (std::size_t i = 0; i < go.size(); ++i) ga[arg[i]] += go[i];
      },
      "max_reduce");
}

template <typename T>
Var<T> sum_reduce(Var<T> a, std::size_t axis) {
  const Tensor<T>& av = a.value();
  const AxisSplit s = split_at(av.shape(), axis, "sum_reduce");
  Tensor<T> out(drop_axis(av.shape(), axis));
  for (std::size_t o = 0; o < s.outer; ++o) {
    for (std::size_t j = 0; j < s.n; ++j) {
      const T* x = av.data() + (o * s.n + j) * s.inner;
      T* y = out.data() + o * s.inner;
      for (std::size_t i = 0; i < s.inner; ++i) y[i] += x[i];
    }
  }
  const std::size_t ida = a.id();
  return a.graph().record(
      std::move(out), {a},
      [ida, s](const Tensor<T>& go, const Tensor<T>&, Graph<T>& gr) {
        Tensor<T>& ga = gr.grad_of(ida);
        for (std::size_t o = 0; o < s.outer; ++o) {
          for (std::size_t j = 0; j < s.n; ++j) {
            T* dx = ga.data() + (o * s.n + j) * s.inner;
            const T* g = go.data() + o * s.inner;
            for (std::size_t i = 0; i < s.inner; ++i) dx[i] += g[i];
          }
        }
      },
      "sum_reduce");
}

template <typename T>
Var<T> mean_reduce(Var<T> a, std::size_t axis) {
  const AxisSplit s = split_at(a.value().shape(), axis, "mean_reduce");
  if (s.n == 0) throw ShapeError("mean_reduce: empty axis in " + a.graph().describe(a.id()));
  return scale(sum_reduce(a, axis), T(1) / T(s.n));
}

template <typename T>
Var<T> sum_all(Var<T> a) {
  const Tensor<T>& av = a.value();
  T total = 0;
  for (T v : av.values()) total += v;
  const std::size_t ida = a.id();
  return a.graph().record(
      Tensor<T>::scalar(total), {a},
      [ida](const Tensor<T>& go, const Tensor<T>&, Graph<T>& gr) {
        Tensor<T>& ga = gr.grad_of(ida);
        for (auto& v : ga.values()) v += go[0];
      },
      "sum_all");
}

template <typename T>
Var<T> mean_all(Var<T> a) {
  const std::size_t n = a.value().size();
  if (n == 0) throw ShapeError("mean_all: empty operand " + a.graph().describe(a.id()));
  return scale(sum_all(a), T(1) / T(n));
}

template <typename T>
Var<T> concat(const std::vector<Var<T>>& parts, std::size_t axis) {
  if (parts.empty()) throw ShapeError("concat: no operands");
  Graph<T>& g = parts.front().graph();
  const Shape& first = parts.front().value().shape();
  if (axis >= first.size()) {
    throw ShapeError("concat: axis " + std::to_string(axis) + " out of range for " +
                     g.describe(parts.front().id()));
  }
  Shape out_shape = first;
  out_shape[axis] = 0;
  std::vector<std::size_t> widths;
  for (const auto& p : parts) {
    const Shape& sh = p.value().shape();
    bool ok = sh.size() == first.size();
    for (std::size_t i = 0; ok && i < sh.size(); ++i) ok = i == axis || sh[i] == first[i];
    if (!ok) {
      throw ShapeError("concat: shape mismatch between " + g.describe(parts.front().id()) +
                       " and " + g.describe(p.id()));
    }
    out_shape[axis] += sh[axis];
  }
  const AxisSplit s = split_at(out_shape, axis, "concat");
  for (const auto& p : parts) widths.push_back(p.value().dim(axis) * s.inner);
  const std::size_t row = s.n * s.inner;
  Tensor<T> out(out_shape);
  std::size_t offset = 0;
  for (std::size_t k = 0; k < parts.size(); ++k) {
    const T* x = parts[k].value().data();
    for (std::size_t o = 0; o < s.outer; ++o) {
      std::copy_n(x + o * widths[k], widths[k], out.data() + o * row + offset);
    }
    offset += widths[k];
  }
  std::vector<std::size_t> ids;
  for (const auto& p : parts) ids.push_back(p.id());
  return g.record(
      std::move(out), parts,
      [ids, widths, row, outer = s.outer](const Tensor<T>& go, const Tensor<T>&, Graph<T>& gr) {
        std::size_t off = 0;
        for (std::size_t k = 0; k < ids.size(); ++k) {
          if (gr.requires_grad(ids[k])) {
            T* dx = gr.grad_of(ids[k]).data();
            for (std::size_t o = 0; o < outer; ++o) {
              const T* gsrc = go.data() + o * row + off;
              T* dst = dx + o * widths[k];
              for (std::size_t i = 0; i < widths[k]; ++i) dst[i] += gsrc[i];
            }
          }
          off += widths[k];
        }
      },
      "concat");
}

template <typename T>
Var<T> gather(Var<T> a, const std::vector<std::size_t>& indices, std::size_t axis) {
  const Tensor<T>& av = a.value();
  const AxisSplit s = split_at(av.shape(), axis, "gather");
  for (auto idx : indices) {
    if (idx >= s.n) {
      throw ShapeError("gather: index " + std::to_string(idx) + " out of range for axis " +
                       std::to_string(axis) + " of " + a.graph().describe(a.id()));
    }
  }
  Shape out_shape = av.shape();
  out_shape[axis] = indices.size();
  Tensor<T> out(out_shape);
  const std::size_t m = indices.size();
  for (std::size_t o = 0; o < s.outer; ++o) {
    for (std::size_t j = 0; j < m; ++j) {
      std::copy_n(av.data() + (o * s.n + indices[j]) * s.inner, s.inner,
                  out.data() + (o * m + j) * s.inner);
    }
  }
  const std::size_t ida = a.id();
  return a.graph().record(
      std::move(out), {a},
      [ida, s, indices](const Tensor<T>& go, const Tensor<T>&, Graph<T>& gr) {
        Tensor<T>& ga = gr.grad_of(ida);
        const std::size_t m = indices.size();
        for (std::size_t o = 0; o < s.outer; ++o) {
          for (std::size_t j = 0; j < m; ++j) {
            const T* gsrc = go.data() + (o * m + j) * s.inner;
            T* dst = ga.data() + (o * s.n + indices[j]) * s.inner;
            for (std::size_t i = 0; i < s.inner; ++i) dst[i] += gsrc[i];
          }
        }
      },
      "gather");
}

template <typename T>
Var<T> permute(Var<T> a, const std::vector<std::size_t>& order) {
  const Tensor<T>& av = a.value();
  const Shape& in = av.shape();
  if (order.size() != in.size()) {
    throw ShapeError("permute: order of length " + std::to_string(order.size()) + " for " +
                     a.graph().describe(a.id()));
  }
  std::vector<bool> seen(in.size(), false);
  for (auto o : order) {
    if (o >= in.size() || seen[o]) throw ShapeError("permute: invalid axis order");
    seen[o] = true;
  }
  Strides in_strides(in.size(), 1);
  for (std::size_t i = in.size(); i-- > 1;) in_strides[i - 1] = in_strides[i] * in[i];
  Shape out_shape(in.size());
  Strides src(in.size());
  for (std::size_t i = 0; i < in.size(); ++i) {
    out_shape[i] = in[order[i]];
    src[i] = in_strides[order[i]];
  }
  Tensor<T> out(out_shape);
  for_each_broadcast(out_shape, src, src,
                     [&](std::size_t i, std::size_t ia, std::size_t) { out[i] = av[ia]; });
  const std::size_t ida = a.id();
  return a.graph().record(
      std::move(out), {a},
      [ida, src](const Tensor<T>& go, const Tensor<T>&, Graph<T>& gr) {
        Tensor<T>& ga = gr.grad_of(ida);
        for_each_broadcast(go.shape(), src, src,
                           [&](std::size_t i, std::size_t ia, std::size_t) { ga[ia] += go[i]; });
      },
      "permute");
}

template <typename T>
Var<T> transpose(Var<T> a) {
  const std::size_t rank = a.value().rank();
  if (rank < 2) throw ShapeError("transpose: rank < 2 for " + a.graph().describe(a.id()));
  std::vector<std::size_t> order(rank);
  for (std::size_t i = 0; i < rank; ++i) order[i] = i;
  std::swap(order[rank - 1], order[rank - 2]);
  return permute(a, order);
}

template <typename T>
Var<T> reshape(Var<T> a, Shape shape) {
  const Tensor<T>& av = a.value();
  if (numel(shape) != av.size()) {
    throw ShapeError("reshape: cannot view " + a.graph().describe(a.id()) + " as " +
                     shape_str(shape));
  }
  const std::size_t ida = a.id();
  return a.graph().record(
      av.reshaped(std::move(shape)), {a},
      [ida](const Tensor<T>& go, const Tensor<T>&, Graph<T>& gr) {
        Tensor<T>& ga = gr.grad_of(ida);
        for (std::size_t i = 0; i < go.size(); ++i) ga[i] += go[i];
      },
      "reshape");
}

template <typename T>
Var<T> broadcast_to(Var<T> a, Shape shape) {
  const Tensor<T>& av = a.value();
  Shape joined;
  try {
    joined = broadcast_shapes(av.shape(), shape, "broadcast_to");
  } catch (const ShapeError&) {
    throw ShapeError("broadcast_to: cannot broadcast " + a.graph().describe(a.id()) + " to " +
                     shape_str(shape));
  }
  if (joined != shape) {
    throw ShapeError("broadcast_to: cannot broadcast " + a.graph().describe(a.id()) + " to " +
                     shape_str(shape));
  }
  const Strides sa = broadcast_strides(av.shape(), shape);
  Tensor<T> out(shape);
  for_each_broadcast(shape, sa, sa,
                     [&](std::size_t i, std::size_t ia, std::size_t) { out[i] = av[ia]; });
  const std::size_t ida = a.id();
  return a.graph().record(
      std::move(out), {a},
      [ida, sa](const Tensor<T>& go, const Tensor<T>&, Graph<T>& gr) {
        Tensor<T>& ga = gr.grad_of(ida);
        for_each_broadcast(go.shape(), sa, sa,
                           [&](std::size_t i, std::size_t ia, std::size_t) { ga[ia] += go[i]; });
      },
      "broadcast_to");
}

template <typename T>
Var<T> l2_normalize(Var<T> a, T eps) {
  const Shape& shape = a.value().shape();
  if (shape.empty()) throw ShapeError("l2_normalize: scalar operand");
  Shape keep = shape;
  keep.back() = 1;
  Var<T> norm = sqrt(add_scalar(sum_reduce(mul(a, a), shape.size() - 1), eps));
  return divide(a, reshape(norm, keep));
}

template <typename T>
Var<T> linear(Var<T> x, Var<T> weight, Var<T> bias) {
  return add(matmul(x, weight), bias);
}

#define CPR_INSTANTIATE_OPS(T)                                                   \
  template Var<T> add(Var<T>, Var<T>);                                           \
  template Var<T> sub(Var<T>, Var<T>);                                           \
  template Var<T> mul(Var<T>, Var<T>);                                           \
  template Var<T> divide(Var<T>, Var<T>);                                        \
  template Var<T> scale(Var<T>, T);                                              \
  template Var<T> add_scalar(Var<T>, T);                                         \
  template Var<T> matmul(Var<T>, Var<T>);                                        \
  template Var<T> exp(Var<T>);                                                   \
  template Var<T> log(Var<T>);                                                   \
  template Var<T> sqrt(Var<T>);                                                  \
  template Var<T> relu(Var<T>);                                                  \
  template Var<T> gelu(Var<T>);                                                  \
  template Var<T> layer_norm(Var<T>, T);                                         \
  template Var<T> softmax(Var<T>);                                               \
  template Var<T> max_reduce(Var<T>, std::size_t);                               \
  template Var<T> mean_reduce(Var<T>, std::size_t);                              \
  template Var<T> sum_reduce(Var<T>, std::size_t);                               \
  template Var<T> sum_all(Var<T>);                                               \
  template Var<T> mean_all(Var<T>);                                              \
  template Var<T> concat(const std::vector<Var<T>>&, std::size_t);               \
  template Var<T> gather(Var<T>, const std::vector<std::size_t>&, std::size_t);  \
  template Var<T> transpose(Var<T>);                                             \
  template Var<T> permute(Var<T>, const std::vector<std::size_t>&);              \
  template Var<T> reshape(Var<T>, Shape);                                        \
  template Var<T> broadcast_to(Var<T>, Shape);                                   \
  template Var<T> l2_normalize(Var<T>, T);                                       \
  template Var<T> linear(Var<T>, Var<T>, Var<T>);

CPR_INSTANTIATE_OPS(float)
CPR_INSTANTIATE_OPS(double)
CPR_INSTANTIATE_OPS(long double)

#undef CPR_INSTANTIATE_OPS

}  // namespace cpr::core
