#include "cpr/geom/pcgeom.hpp"

#include "cpr/core/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

namespace cpr::geom {

template <typename T>
PointSet<T>::PointSet(std::size_t d, std::vector<T> c, std::optional<int> t)
    : dim(d), coords(std::move(c)), frame_time(t) {
  if (dim == 0 || coords.size() % dim != 0) {
    throw ShapeError("point set of " + std::to_string(coords.size()) +
                     " values is not divisible into dimension " + std::to_string(dim));
  }
}

template <typename T>
PointSet<T> PointSet<T>::from_tensor(const Tensor<T>& t) {
  if (t.rank() != 2) throw ShapeError("point set needs an (n, d) tensor, got " + core::shape_str(t.shape()));
  return PointSet(t.dim(1), t.vec());
}

template <typename T>
PointSet<T> PointSet<T>::frame_of(const Tensor<T>& t, std::size_t frame) {
  if (t.rank() != 3 || frame >= t.dim(0)) {
    throw ShapeError("frame " + std::to_string(frame) + " of tensor " + core::shape_str(t.shape()));
  }
  const std::size_t stride = t.dim(1) * t.dim(2);
  std::vector<T> c(t.data() + frame * stride, t.data() + (frame + 1) * stride);
  return PointSet(t.dim(2), std::move(c), static_cast<int>(frame));
}

template <typename T>
T squared_distance(std::span<const T> a, std::span<const T> b) {
  T s = 0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    const T d = a[k] - b[k];
    s += d * d;
  }
  return s;
}

namespace {

template <typename T>
void require_nonempty(const PointSet<T>& p, const char* what) {
  if (p.size() == 0) throw ShapeError(std::string(what) + ": empty point set");
}

template <typename T>
void require_same_dim(const PointSet<T>& a, const PointSet<T>& b, const char* what) {
  if (a.dim != b.dim) {
    throw ShapeError(std::string(what) + ": dimension mismatch " + std::to_string(a.dim) +
                     " vs " + std::to_string(b.dim));
  }
}

/// All sources ordered by (squared distance, index), truncated to `keep`.
template <typename T>
std::vector<std::pair<T, std::size_t>> nearest(std::span<const T> q, const PointSet<T>& source,
                                               std::size_t keep) {
  std::vector<std::pair<T, std::size_t>> d2(source.size());
  for (std::size_t j = 0; j < source.size(); ++j) d2[j] = {squared_distance(q, source.point(j)), j};
  keep = std::min(keep, d2.size());
  std::partial_sort(d2.begin(), d2.begin() + static_cast<std::ptrdiff_t>(keep), d2.end());
  d2.resize(keep);
  return d2;
}

}  // namespace

template <typename T>
std::vector<std::size_t> farthest_point_sample(const PointSet<T>& points, std::size_t m,
                                               std::size_t start) {
  require_nonempty(points, "farthest_point_sample");
  const std::size_t n = points.size();
  if (m > n) {
    throw ShapeError("farthest_point_sample: m=" + std::to_string(m) + " exceeds n=" + std::to_string(n));
  }
  if (start >= n) throw ShapeError("farthest_point_sample: start index out of range");
  std::vector<std::size_t> picked;
  picked.reserve(m);
  if (m == 0) return picked;
  std::vector<T> min_d2(n, std::numeric_limits<T>::infinity());
  std::vector<bool> taken(n, false);
  std::size_t current = start;
  for (std::size_t step = 0; step < m; ++step) {
    picked.push_back(current);
    taken[current] = true;
    if (step + 1 == m) break;
    std::size_t best = n;
    for (std::size_t i = 0; i < n; ++i) {
      if (taken[i]) continue;
      min_d2[i] = std::min(min_d2[i], squared_distance(points.point(i), points.point(current)));
      if (best == n || min_d2[i] > min_d2[best]) best = i;
    }
    current = best;
  }
  return picked;
}

template <typename T>
std::vector<std::size_t> farthest_point_sample(const PointSet<T>& points, std::size_t m,
                                               std::mt19937_64& rng) {
  require_nonempty(points, "farthest_point_sample");
  std::uniform_int_distribution<std::size_t> pick(0, points.size() - 1);
  return farthest_point_sample(points, m, pick(rng));
}

template <typename T>
NeighborIndex<T> ball_query(const PointSet<T>& centers, const PointSet<T>& source, T radius,
                            std::size_t k) {
  require_nonempty(source, "ball_query");
  require_same_dim(centers, source, "ball_query");
  if (!(radius > 0)) throw DomainError("ball_query: radius must be positive");
  if (k == 0) throw DomainError("ball_query: k must be at least 1");
  NeighborIndex<T> out;
  out.queries = centers.size();
  out.k = k;
  out.indices.resize(out.queries * k);
  out.distances.resize(out.queries * k);
  out.valid_counts.resize(out.queries);
  for (std::size_t q = 0; q < out.queries; ++q) {
    auto sorted = nearest(centers.point(q), source, source.size());
    std::size_t hits = 0;
    while (hits < sorted.size() && hits < k && std::sqrt(sorted[hits].first) <= radius) ++hits;
    out.valid_counts[q] = std::max<std::size_t>(hits, 1);
    for (std::size_t j = 0; j < k; ++j) {
      const auto& pick = j < hits ? sorted[j] : sorted[0];
      out.indices[q * k + j] = pick.second;
      out.distances[q * k + j] = std::sqrt(pick.first);
    }
  }
  return out;
}

template <typename T>
NeighborIndex<T> knn(const PointSet<T>& query, const PointSet<T>& source, std::size_t k) {
  require_same_dim(query, source, "knn");
  if (k > source.size()) {
    throw ShapeError("knn: k=" + std::to_string(k) + " exceeds source size " +
                     std::to_string(source.size()));
  }
  NeighborIndex<T> out;
  out.queries = query.size();
  out.k = k;
  out.indices.resize(out.queries * k);
  out.distances.resize(out.queries * k);
  out.valid_counts.assign(out.queries, k);
  for (std::size_t q = 0; q < out.queries; ++q) {
    auto sorted = nearest(query.point(q), source, k);
    for (std::size_t j = 0; j < k; ++j) {
      out.indices[q * k + j] = sorted[j].second;
      out.distances[q * k + j] = std::sqrt(sorted[j].first);
    }
  }
  return out;
}

template <typename T>
InterpolationWeights<T> interpolation_weights(const PointSet<T>& query, const PointSet<T>& source,
                                              std::size_t k) {
  const auto nn = knn(query, source, k);
  InterpolationWeights<T> w;
  w.queries = nn.queries;
  w.k = k;
  w.indices = nn.indices;
  w.weights.resize(nn.distances.size());
  for (std::size_t q = 0; q < w.queries; ++q) {
    T total = 0;
    for (std::size_t j = 0; j < k; ++j) {
      const T inv = T(1) / (nn.distance(q, j) + T(kInterpolationEps));
      w.weights[q * k + j] = inv;
      total += inv;
    }
    for (std::size_t j = 0; j < k; ++j) w.weights[q * k + j] /= total;
  }
  return w;
}

template <typename T>
Var<T> interpolate_features(const InterpolationWeights<T>& weights, Var<T> source_feats) {
  const Shape& fs = source_feats.shape();
  if (fs.size() != 2) {
    throw ShapeError("interpolate_features: source features must be (n, c), got " + core::shape_str(fs));
  }
  for (auto idx : weights.indices) {
    if (idx >= fs[0]) throw ShapeError("interpolate_features: feature rows do not match source size");
  }
  auto& g = source_feats.graph();
  const std::size_t c = fs[1];
  Var<T> rows = core::gather(source_feats, weights.indices, 0);  // (q*k, c)
  Var<T> w = g.constant(Tensor<T>({weights.queries * weights.k, 1}, weights.weights));
  Var<T> weighted = core::reshape(core::mul(rows, w), {weights.queries, weights.k, c});
  return core::sum_reduce(weighted, 1);
}

template <typename T>
Var<T> interpolate_features(const PointSet<T>& query, const PointSet<T>& source,
                            Var<T> source_feats, std::size_t k) {
  if (source_feats.shape().empty() || source_feats.shape()[0] != source.size()) {
    throw ShapeError("interpolate_features: " + std::to_string(source.size()) +
                     " sources but features " + core::shape_str(source_feats.shape()));
  }
  return interpolate_features(interpolation_weights(query, source, k), source_feats);
}

namespace {

/// Mean over rows of `from` of the squared distance to the nearest row of `to`.
template <typename T>
T directed_chamfer(const T* from, std::size_t n, const T* to, std::size_t m, std::size_t d,
                   std::size_t* argmin) {
  T total = 0;
  for (std::size_t i = 0; i < n; ++i) {
    T best = std::numeric_limits<T>::infinity();
    std::size_t best_j = 0;
    for (std::size_t j = 0; j < m; ++j) {
      const T dist = squared_distance<T>({from + i * d, d}, {to + j * d, d});
      if (dist < best) {
        best = dist;
        best_j = j;
      }
    }
    if (argmin) argmin[i] = best_j;
    total += best;
  }
  return total / T(n);
}

}  // namespace

template <typename T>
T chamfer_distance(const PointSet<T>& a, const PointSet<T>& b) {
  require_nonempty(a, "chamfer_distance");
  require_nonempty(b, "chamfer_distance");
  require_same_dim(a, b, "chamfer_distance");
  const T ab = directed_chamfer(a.coords.data(), a.size(), b.coords.data(), b.size(), a.dim, nullptr);
  const T ba = directed_chamfer(b.coords.data(), b.size(), a.coords.data(), a.size(), a.dim, nullptr);
  return ab + ba;
}

template <typename T>
Var<T> chamfer_distance(Var<T> a, Var<T> b) {
  auto& g = a.graph();
  const Shape& sa = a.shape();
  const Shape& sb = b.shape();
  const bool batched = sa.size() == 3;
  const bool ok = (sa.size() == 2 || sa.size() == 3) && sb.size() == sa.size() &&
                  sa.back() == sb.back() && (!batched || sa[0] == sb[0]);
  if (!ok) {
    throw ShapeError("chamfer_distance: incompatible operands " + g.describe(a.id()) + " and " +
                     g.describe(b.id()));
  }
  const std::size_t batch = batched ? sa[0] : 1;
  const std::size_t n = sa[sa.size() - 2];
  const std::size_t m = sb[sb.size() - 2];
  const std::size_t d = sa.back();
  if (n == 0 || m == 0) throw ShapeError("chamfer_distance: empty point set");

  std::vector<std::size_t> nn_ab(batch * n);
  std::vector<std::size_t> nn_ba(batch * m);
  Tensor<T> out(batched ? Shape{batch} : Shape{});
  const T* av = a.value().data();
  const T* bv = b.value().data();
  for (std::size_t s = 0; s < batch; ++s) {
    const T ab = directed_chamfer(av + s * n * d, n, bv + s * m * d, m, d, nn_ab.data() + s * n);
    const T ba = directed_chamfer(bv + s * m * d, m, av + s * n * d, n, d, nn_ba.data() + s * m);
    out[s] = ab + ba;
  }
  g.note_branches(nn_ab.data(), nn_ab.size());
  g.note_branches(nn_ba.data(), nn_ba.size());
  const std::size_t ida = a.id();
  const std::size_t idb = b.id();
  return g.record(
      std::move(out), {a, b},
      [=, nn_ab = std::move(nn_ab), nn_ba = std::move(nn_ba)](const Tensor<T>& go,
                                                              const Tensor<T>&,
                                                              core::Graph<T>& gr) {
        const T* x = gr.value(ida).data();
        const T* y = gr.value(idb).data();
        T* ga = gr.requires_grad(ida) ? gr.grad_of(ida).data() : nullptr;
        T* gb = gr.requires_grad(idb) ? gr.grad_of(idb).data() : nullptr;
        for (std::size_t s = 0; s < batch; ++s) {
          const T wa = T(2) * go[s] / T(n);
          const T wb = T(2) * go[s] / T(m);
          for (std::size_t i = 0; i < n; ++i) {
            const std::size_t ai = (s * n + i) * d;
            const std::size_t bj = (s * m + nn_ab[s * n + i]) * d;
            for (std::size_t k = 0; k < d; ++k) {
              const T diff = x[ai + k] - y[bj + k];
              if (ga) ga[ai + k] += wa * diff;
              if (gb) gb[bj + k] -= wa * diff;
            }
          }
          for (std::size_t j = 0; j < m; ++j) {
            const std::size_t bj = (s * m + j) * d;
            const std::size_t ai = (s * n + nn_ba[s * m + j]) * d;
            for (std::size_t k = 0; k < d; ++k) {
              const T diff = y[bj + k] - x[ai + k];
              if (gb) gb[bj + k] += wb * diff;
              if (ga) ga[ai + k] -= wb * diff;
            }
          }
        }
      },
      "chamfer");
}

std::array<double, 3> frame_color(std::size_t frame, std::size_t frames) {
  const double t = frames <= 1 ? 0.0 : static_cast<double>(frame) / static_cast<double>(frames - 1);
  if (t <= 0.5) return {1.0 - 2.0 * t, 2.0 * t, 0.0};
  return {0.0, 2.0 - 2.0 * t, 2.0 * t - 1.0};
}

template <typename T>
Tensor<T> colorize_segment(const Tensor<T>& segment) {
  if (segment.rank() != 3 || segment.dim(2) != 3 || segment.dim(0) == 0) {
    throw ShapeError("colorize_segment: expected (M>=1, n, 3), got " + core::shape_str(segment.shape()));
  }
  const std::size_t frames = segment.dim(0);
  const std::size_t n = segment.dim(1);
  Tensor<T> out({frames, n, 6});
  for (std::size_t f = 0; f < frames; ++f) {
    const auto rgb = frame_color(f, frames);
    for (std::size_t i = 0; i < n; ++i) {
      const T* src = segment.data() + (f * n + i) * 3;
      T* dst = out.data() + (f * n + i) * 6;
      for (int k = 0; k < 3; ++k) {
        dst[k] = src[k];
        dst[3 + k] = static_cast<T>(rgb[k]);
      }
    }
  }
  return out;
}

template <typename T>
NormalizedSequence<T> normalize_sequence(const Tensor<T>& frames) {
  if (frames.rank() != 3 || frames.dim(2) != 3 || frames.size() == 0) {
    throw ShapeError("normalize_sequence: expected non-empty (T, N, 3), got " +
                     core::shape_str(frames.shape()));
  }
  const std::size_t count = frames.size() / 3;
  NormalizedSequence<T> out;
  std::array<double, 3> sum{0, 0, 0};
  for (std::size_t i = 0; i < count; ++i) {
    for (int k = 0; k < 3; ++k) sum[k] += frames[i * 3 + k];
  }
  for (int k = 0; k < 3; ++k) out.centroid[k] = static_cast<T>(sum[k] / double(count));
  out.frames = frames;
  T max_norm = 0;
  T max_coord = 0;
  for (std::size_t i = 0; i < count; ++i) {
    T n2 = 0;
    for (int k = 0; k < 3; ++k) {
      T& v = out.frames[i * 3 + k];
      max_coord = std::max(max_coord, std::abs(v));
      v -= out.centroid[k];
      n2 += v * v;
    }
    max_norm = std::max(max_norm, std::sqrt(n2));
  }
  // Rounding in the centroid leaves residue on identical points.
  const T tiny = std::numeric_limits<T>::epsilon() * T(16) * (T(1) + max_coord);
  if (max_norm <= tiny) {
    out.degenerate = true;
    out.scale = T(1);
    for (auto& v : out.frames.values()) v = T(0);
    return out;
  }
  out.scale = max_norm;
  for (auto& v : out.frames.values()) v /= max_norm;
  return out;
}

#define CPR_INSTANTIATE_GEOM(T)                                                                   \
  template struct PointSet<T>;                                                                    \
  template T squared_distance(std::span<const T>, std::span<const T>);                            \
  template std::vector<std::size_t> farthest_point_sample(const PointSet<T>&, std::size_t,        \
                                                          std::size_t);                           \
  template std::vector<std::size_t> farthest_point_sample(const PointSet<T>&, std::size_t,        \
                                                          std::mt19937_64&);                      \
  template NeighborIndex<T> ball_query(const PointSet<T>&, const PointSet<T>&, T, std::size_t);   \
  template NeighborIndex<T> knn(const PointSet<T>&, const PointSet<T>&, std::size_t);             \
  template InterpolationWeights<T> interpolation_weights(const PointSet<T>&, const PointSet<T>&,  \
                                                         std::size_t);                            \
  template Var<T> interpolate_features(const InterpolationWeights<T>&, Var<T>);                   \
  template Var<T> interpolate_features(const PointSet<T>&, const PointSet<T>&, Var<T>,            \
                                       std::size_t);                                              \
  template T chamfer_distance(const PointSet<T>&, const PointSet<T>&);                            \
  template Var<T> chamfer_distance(Var<T>, Var<T>);                                               \
  template Tensor<T> colorize_segment(const Tensor<T>&);                                          \
  template NormalizedSequence<T> normalize_sequence(const Tensor<T>&);

CPR_INSTANTIATE_GEOM(float)
CPR_INSTANTIATE_GEOM(double)
CPR_INSTANTIATE_GEOM(long double)

#undef CPR_INSTANTIATE_GEOM

}  // namespace cpr::geom
