#include "cpr/model/encoder.hpp"

#include <algorithm>
#include <string>

#include "cpr/core/ops.hpp"
#include "cpr/geom/pcgeom.hpp"
#include "cpr/model/init.hpp"

namespace cpr::model {

using geom::PointSet;

template <typename T>
std::size_t centroid_farthest_start(const Tensor<T>& frames, std::size_t frame) {
  const std::size_t n = frames.dim(1);
  const T* p = frames.data() + frame * n * 3;
  double c[3] = {0, 0, 0};
  for (std::size_t i = 0; i < n; ++i) {
    for (int k = 0; k < 3; ++k) c[k] += p[i * 3 + k];
  }
  for (double& v : c) v /= static_cast<double>(n);
  std::size_t best = 0;
  double best_d = -1;
  for (std::size_t i = 0; i < n; ++i) {
    double d = 0;
    for (int k = 0; k < 3; ++k) d += (p[i * 3 + k] - c[k]) * (p[i * 3 + k] - c[k]);
    if (d > best_d) {
      best_d = d;
      best = i;
    }
  }
  return best;
}

template <typename T>
SegmentGeometry<T> segment_geometry(const Tensor<T>& segment, std::size_t segment_index,
                                    std::size_t first_frame, const EncoderConfig& cfg) {
  if (segment.rank() != 3 || segment.dim(2) != 3) {
    throw ShapeError("encode_segment: expected (M, N, 3) segment, got " +
                     core::shape_str(segment.shape()));
  }
  const std::size_t M = segment.dim(0);
  const std::size_t N = segment.dim(1);
  if (M == 0 || N == 0) throw ShapeError("encode_segment: empty segment");
  if (N != cfg.n_points) {
    throw ConfigError("encode_segment: segment has " + std::to_string(N) +
                      " points per frame, config expects " + std::to_string(cfg.n_points));
  }
  if (cfg.r_anchors > N) {
    throw ConfigError("encode_segment: r_anchors exceeds points per frame");
  }
  if (cfg.temporal_kernel % 2 == 0 || cfg.temporal_stride == 0) {
    throw ConfigError("encode_segment: temporal_kernel must be odd and stride positive");
  }
  const std::size_t l = (M + cfg.temporal_stride - 1) / cfg.temporal_stride;
  if (l != cfg.l_out) {
    throw ConfigError("encode_segment: l_out = " + std::to_string(cfg.l_out) + " but M = " +
                      std::to_string(M) + " gives " + std::to_string(l));
  }
  const std::size_t r = cfg.r_anchors;
  const std::size_t k = cfg.k_neighbors;
  const auto half = static_cast<long>(cfg.temporal_kernel / 2);
  // Displacements are expressed in units of the ball radius.
  const T inv_radius = T(1) / static_cast<T>(cfg.radius);

  std::vector<PointSet<T>> frames(M);
  std::vector<PointSet<T>> anchors(M);
  std::vector<geom::NeighborIndex<T>> groups(M);
  for (std::size_t f = 0; f < M; ++f) {
    frames[f] = PointSet<T>::frame_of(segment, f);
    const auto idx =
        geom::farthest_point_sample(frames[f], r, centroid_farthest_start(segment, f));
    std::vector<T> coords;
    coords.reserve(r * 3);
    for (auto i : idx) {
      const auto p = frames[f].point(i);
      coords.insert(coords.end(), p.begin(), p.end());
    }
    anchors[f] = PointSet<T>(3, std::move(coords), static_cast<int>(first_frame + f));
    groups[f] = geom::ball_query(anchors[f], frames[f], static_cast<T>(cfg.radius), k);
  }

  SegmentGeometry<T> out;
  out.segment_index = segment_index;
  out.first_frame = first_frame;
  out.frames = M;
  out.anchor_coords = Tensor<T>({l, r, 4});
  std::vector<T> disp;
  disp.reserve(l * r * cfg.temporal_kernel * k * 3);
  for (std::size_t j = 0; j < l; ++j) {
    const std::size_t f = j * cfg.temporal_stride;
    for (std::size_t a = 0; a < r; ++a) {
      const auto centre = anchors[f].point(a);
      T* ac = out.anchor_coords.data() + (j * r + a) * 4;
      ac[0] = centre[0];
      ac[1] = centre[1];
      ac[2] = centre[2];
      ac[3] = static_cast<T>(first_frame + f);
      for (long o = -half; o <= half; ++o) {
        const auto g = static_cast<std::size_t>(
            std::clamp<long>(static_cast<long>(f) + o, 0, static_cast<long>(M) - 1));
        std::size_t match = a;
        if (g != f) {
          T best = geom::squared_distance(anchors[g].point(0), centre);
          match = 0;
          for (std::size_t b = 1; b < r; ++b) {
            const T d = geom::squared_distance(anchors[g].point(b), centre);
            if (d < best) {
              best = d;
              match = b;
            }
          }
        }
        for (std::size_t n = 0; n < k; ++n) {
          const auto p = frames[g].point(groups[g].index(match, n));
          for (int c = 0; c < 3; ++c) disp.push_back((p[c] - centre[c]) * inv_radius);
        }
      }
    }
  }
  const std::size_t rows = disp.size() / 3;
  out.displacements = Tensor<T>({rows, 3}, std::move(disp));
  return out;
}

template <typename T>
Var<T> encode_geometry(const std::vector<const SegmentGeometry<T>*>& segments,
                       ParamScope<T>& scope, const EncoderConfig& cfg) {
  using namespace core;
  if (segments.empty()) throw ShapeError("encode: no segments");
  const std::size_t G = segments.size();
  const std::size_t l = cfg.l_out;
  const std::size_t r = cfg.r_anchors;
  const std::size_t K = cfg.temporal_kernel;
  const std::size_t k = cfg.k_neighbors;
  const std::size_t c = cfg.c_out;
  const std::size_t rows = l * r * K * k;

  std::vector<T> stacked;
  stacked.reserve(G * rows * 3);
  for (const auto* s : segments) {
    if (s->displacements.dim(0) != rows) {
      throw ShapeError("encode: segment geometry does not match the encoder config");
    }
    stacked.insert(stacked.end(), s->displacements.vec().begin(), s->displacements.vec().end());
  }
  Var<T> x = scope.constant(Tensor<T>({G * rows, 3}, std::move(stacked)));
  Var<T> h = gelu(linear(x, scope("encoder.spatial.w1"), scope("encoder.spatial.b1")));
  h = linear(h, scope("encoder.spatial.w2"), scope("encoder.spatial.b2"));
  h = max_reduce(reshape(h, {G * l * r * K, k, c}), 1);
  h = reshape(h, {G * l * r, K * c});
  h = linear(h, scope("encoder.temporal.w"), scope("encoder.temporal.b"));
  return reshape(h, {G, l, r, c});
}

template <typename T>
SegmentEmbedding<T> encode_segment(const Tensor<T>& segment, std::size_t segment_index,
                                   std::size_t first_frame, ParamScope<T>& scope,
                                   const EncoderConfig& cfg) {
  const auto geo = segment_geometry(segment, segment_index, first_frame, cfg);
  Var<T> feats = encode_geometry<T>({&geo}, scope, cfg);
  return {core::reshape(feats, {cfg.l_out, cfg.r_anchors, cfg.c_out}), geo.anchor_coords,
          segment_index};
}

template <typename T>
std::vector<SegmentEmbedding<T>> encode_prefix(const std::vector<Tensor<T>>& segments,
                                               ParamScope<T>& scope, const EncoderConfig& cfg,
                                               bool hard_negatives) {
  if (segments.empty()) throw ShapeError("encode_prefix: no segments");
  if (hard_negatives && segments.size() < 2) {
    throw ConfigError("encode_prefix: hard negatives need at least 3 segments in the sequence");
  }
  std::vector<SegmentEmbedding<T>> out;
  std::size_t first = 0;
  for (std::size_t i = 0; i < segments.size(); ++i) {
    out.push_back(encode_segment(segments[i], i, first, scope, cfg));
    first += segments[i].dim(0);
  }
  return out;
}

// Zero biases keep the per-point features from being dominated by a shared
// offset, which would make max pooling nearly input independent at init.
void add_encoder_params(ParamSet<float>& params, const EncoderConfig& cfg, std::mt19937_64& rng) {
  add_dense(params, "encoder.spatial.w1", "encoder.spatial.b1", 3, cfg.spatial_hidden, rng, true);
  add_dense(params, "encoder.spatial.w2", "encoder.spatial.b2", cfg.spatial_hidden, cfg.c_out, rng,
            true);
  add_dense(params, "encoder.temporal.w", "encoder.temporal.b", cfg.temporal_kernel * cfg.c_out,
            cfg.c_out, rng, true);
}

#define CPR_INSTANTIATE_ENCODER(T)                                                             \
  template std::size_t centroid_farthest_start(const Tensor<T>&, std::size_t);                \
  template SegmentGeometry<T> segment_geometry(const Tensor<T>&, std::size_t, std::size_t,    \
                                               const EncoderConfig&);                         \
  template Var<T> encode_geometry(const std::vector<const SegmentGeometry<T>*>&,              \
                                  ParamScope<T>&, const EncoderConfig&);                      \
  template SegmentEmbedding<T> encode_segment(const Tensor<T>&, std::size_t, std::size_t,     \
                                              ParamScope<T>&, const EncoderConfig&);          \
  template std::vector<SegmentEmbedding<T>> encode_prefix(const std::vector<Tensor<T>>&,      \
                                                          ParamScope<T>&, const EncoderConfig&, \
                                                          bool);

CPR_INSTANTIATE_ENCODER(float)
CPR_INSTANTIATE_ENCODER(double)
CPR_INSTANTIATE_ENCODER(long double)

}  // namespace cpr::model
