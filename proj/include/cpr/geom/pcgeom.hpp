#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <random>
#include <span>
#include <vector>

#include "cpr/core/graph.hpp"
#include "cpr/core/tensor.hpp"

// Non-learned point cloud kernels. Everything here is exact brute force;
// sets are small enough at desk scale that no acceleration structure pays off.
namespace cpr::geom {

using core::Shape;
using core::Tensor;
using core::Var;

template <typename T>
struct PointSet {
  std::size_t dim = 3;
  std::vector<T> coords;  // n x dim, row-major
  std::optional<int> frame_time;

  PointSet() = default;
  PointSet(std::size_t d, std::vector<T> c, std::optional<int> t = std::nullopt);

  /// Rows of an (n, d) tensor, or frame `frame` of an (M, n, d) tensor.
  static PointSet from_tensor(const Tensor<T>& t);
  static PointSet frame_of(const Tensor<T>& t, std::size_t frame);

  std::size_t size() const { return dim == 0 ? 0 : coords.size() / dim; }
  std::span<const T> point(std::size_t i) const { return {coords.data() + i * dim, dim}; }
};

template <typename T>
T squared_distance(std::span<const T> a, std::span<const T> b);

template <typename T>
struct NeighborIndex {
  std::size_t queries = 0;
  std::size_t k = 0;
  std::vector<std::size_t> indices;  // queries x k
  std::vector<T> distances;          // queries x k, Euclidean, non-decreasing per row
  std::vector<std::size_t> valid_counts;

  std::size_t index(std::size_t q, std::size_t j) const { return indices[q * k + j]; }
  T distance(std::size_t q, std::size_t j) const { return distances[q * k + j]; }
};

/// Greedy max-min selection starting at `start`; ties go to the lowest index
/// and already-selected points are never picked again.
template <typename T>
std::vector<std::size_t> farthest_point_sample(const PointSet<T>& points, std::size_t m,
                                               std::size_t start = 0);

/// Seeded-random start variant, used for training-time augmentation.
template <typename T>
std::vector<std::size_t> farthest_point_sample(const PointSet<T>& points, std::size_t m,
                                               std::mt19937_64& rng);

/// Up to k sources within `radius` of each center, nearest first. Underfull
/// rows repeat the nearest hit; rows with no hit fall back to the globally
/// nearest source with valid_count 1.
template <typename T>
NeighborIndex<T> ball_query(const PointSet<T>& centers, const PointSet<T>& source, T radius,
                            std::size_t k);

/// Exact k nearest sources, sorted by distance then index.
template <typename T>
NeighborIndex<T> knn(const PointSet<T>& query, const PointSet<T>& source, std::size_t k);

constexpr double kInterpolationEps = 1e-8;

template <typename T>
struct InterpolationWeights {
  std::size_t queries = 0;
  std::size_t k = 0;
  std::vector<std::size_t> indices;  // queries x k
  std::vector<T> weights;            // queries x k, rows sum to 1
};

/// Inverse-distance weights w_i = (1/(d_i+eps)) / sum_j (1/(d_j+eps)) over
/// the k nearest sources.
template <typename T>
InterpolationWeights<T> interpolation_weights(const PointSet<T>& query, const PointSet<T>& source,
                                              std::size_t k = 3);

/// Differentiable in `source_feats` (n x c); weights are constants.
template <typename T>
Var<T> interpolate_features(const InterpolationWeights<T>& weights, Var<T> source_feats);

template <typename T>
Var<T> interpolate_features(const PointSet<T>& query, const PointSet<T>& source,
                            Var<T> source_feats, std::size_t k = 3);

/// Mean squared nearest-neighbour distance, both directions summed.
template <typename T>
T chamfer_distance(const PointSet<T>& a, const PointSet<T>& b);

/// Graph op. Accepts (n, d) x (m, d) -> scalar, or batched (B, n, d) x
/// (B, m, d) -> (B) per-item distances. Differentiable in both operands.
template <typename T>
Var<T> chamfer_distance(Var<T> a, Var<T> b);

/// RGB for frame m of M on the red -> green -> blue ramp.
std::array<double, 3> frame_color(std::size_t frame, std::size_t frames);

/// (M, n, 3) -> (M, n, 6): each frame's points get the frame colour appended.
template <typename T>
Tensor<T> colorize_segment(const Tensor<T>& segment);

template <typename T>
struct NormalizedSequence {
  Tensor<T> frames;  // same shape as the input
  std::array<T, 3> centroid{};
  T scale = T(1);
  bool degenerate = false;
};

/// Centres all T*N points on their joint centroid and divides by the largest
/// point norm. The same similarity transform applies to every frame.
template <typename T>
NormalizedSequence<T> normalize_sequence(const Tensor<T>& frames);

}  // namespace cpr::geom
