#include "cpr/model/objectives.hpp"

#include <cmath>
#include <numeric>

#include "cpr/core/ops.hpp"
#include "cpr/geom/pcgeom.hpp"
#include "cpr/model/init.hpp"

namespace cpr::model {

using namespace core;

namespace {

std::vector<std::size_t> iota(std::size_t begin, std::size_t end) {
  std::vector<std::size_t> v(end - begin);
  std::iota(v.begin(), v.end(), begin);
  return v;
}

template <typename T>
geom::PointSet<T> spacetime_points(const Tensor<T>& coords, std::size_t first_frame,
                                   std::size_t M, double time_weight) {
  const double denom = M > 1 ? static_cast<double>(M - 1) : 1.0;
  std::vector<T> pts(coords.vec());
  for (std::size_t i = 3; i < pts.size(); i += 4) {
    const double rel = (static_cast<double>(pts[i]) - static_cast<double>(first_frame)) / denom;
    pts[i] = static_cast<T>(time_weight * rel);
  }
  return geom::PointSet<T>(4, std::move(pts));
}

// One fold: pointwise MLP over (points ++ feature), with the first layer
// split so the per-frame feature half is computed once per frame.
template <typename T>
Var<T> fold(Var<T> points, Var<T> frame_feats, ParamScope<T>& scope, const std::string& prefix) {
  const Shape& fs = frame_feats.shape();  // (B, M, c)
  const std::size_t B = fs[0], M = fs[1], c = fs[2];
  const std::size_t d = points.shape().back();
  Var<T> w1 = scope(prefix + ".w1");
  if (w1.shape().size() != 2 || w1.shape()[0] != d + c) {
    throw ShapeError("decoder: " + w1.graph().describe(w1.id()) + " does not take " +
                     std::to_string(d) + " point channels plus " + std::to_string(c) +
                     " feature channels");
  }
  const std::size_t hidden = w1.shape()[1];
  Var<T> point_part = matmul(points, gather(w1, iota(0, d), 0));
  if (point_part.shape().size() == 2) {
    point_part = reshape(point_part, {1, 1, point_part.shape()[0], hidden});
  }
  Var<T> feat_part = reshape(matmul(frame_feats, gather(w1, iota(d, d + c), 0)), {B, M, 1, hidden});
  Var<T> h = gelu(point_part + feat_part + scope(prefix + ".b1"));
  return linear(h, scope(prefix + ".w2"), scope(prefix + ".b2"));
}

}  // namespace

template <typename T>
Var<T> project_head(Var<T> feats, ParamScope<T>& scope, const std::string& head_id) {
  if (head_id != "local" && head_id != "global") {
    throw UnknownNameError("project_head: unknown head '" + head_id + "'");
  }
  const std::string p = "head." + head_id;
  Var<T> h = gelu(linear(feats, scope(p + ".w1"), scope(p + ".b1")));
  return l2_normalize(linear(h, scope(p + ".w2"), scope(p + ".b2")));
}

template <typename T>
Tensor<T> alignment_matrix(const Tensor<T>& pred_coords, std::size_t pred_first_frame,
                           const Tensor<T>& target_coords, std::size_t target_first_frame,
                           std::size_t M, double time_weight, std::size_t k) {
  const auto pred = spacetime_points(pred_coords, pred_first_frame, M, time_weight);
  const auto target = spacetime_points(target_coords, target_first_frame, M, time_weight);
  const auto w = geom::interpolation_weights(target, pred, k);
  Tensor<T> out({target.size(), pred.size()});
  for (std::size_t q = 0; q < w.queries; ++q) {
    for (std::size_t j = 0; j < w.k; ++j) {
      out[q * pred.size() + w.indices[q * w.k + j]] += w.weights[q * w.k + j];
    }
  }
  return out;
}

template <typename T>
Var<T> align_predictions(Var<T> Q, const Tensor<T>& alignment) {
  return matmul(Q.graph().constant(alignment), Q);
}

template <typename T>
Var<T> logsumexp(Var<T> x) {
  const Tensor<T>& v = x.value();
  if (v.rank() == 0 || v.shape().back() == 0) throw ShapeError("logsumexp: empty last axis");
  const std::size_t n = v.shape().back();
  Shape kept(v.shape().begin(), v.shape().end() - 1);
  Tensor<T> peak(kept);
  for (std::size_t r = 0; r < peak.size(); ++r) {
    T best = v[r * n];
    for (std::size_t j = 1; j < n; ++j) best = std::max(best, v[r * n + j]);
    peak[r] = best;
  }
  Shape keep_dims = kept;
  keep_dims.push_back(1);
  Graph<T>& g = x.graph();
  Var<T> shifted = x - g.constant(peak.reshaped(keep_dims));
  return log(sum_reduce(exp(shifted), v.rank() - 1)) + g.constant(peak);
}

template <typename T>
Var<T> local_infonce(Var<T> z, Var<T> q_hat, std::optional<Var<T>> hard, T tau, bool cross_batch) {
  if (!(tau > 0)) throw DomainError("local_infonce: tau must be positive");
  const Shape& s = z.shape();
  if (s.size() != 3 || q_hat.shape() != s) {
    throw ShapeError("local_infonce: z " + shape_str(s) + " and q_hat " +
                     shape_str(q_hat.shape()) + " must share a (B, n, p) shape");
  }
  const std::size_t B = s[0], n = s[1], p = s[2];
  std::vector<Var<T>> blocks;
  if (cross_batch) {
    blocks.push_back(matmul(z, transpose(reshape(q_hat, {B * n, p}))));
  } else {
    blocks.push_back(matmul(z, transpose(q_hat)));
  }
  if (hard) {
    const Shape& hs = hard->shape();
    if (hs.size() != 3 || hs[0] != B || hs[2] != p) {
      throw ShapeError("local_infonce: hard negatives " + shape_str(hs) + " do not match z " +
                       shape_str(s));
    }
    if (hs[1] > 0) blocks.push_back(matmul(z, transpose(*hard)));
  }
  Var<T> logits = blocks.size() == 1 ? blocks[0] : concat(blocks, 2);
  if (logits.shape()[2] < 2) throw DomainError("local_infonce: empty negative set");
  const T inv_tau = T(1) / tau;
  Var<T> positive = scale(sum_reduce(z * q_hat, 2), inv_tau);
  return mean_all(logsumexp(scale(logits, inv_tau)) - positive);
}

template <typename T>
Var<T> global_pool_sequence(Var<T> feats) {
  if (feats.shape().size() != 3 || feats.shape()[1] == 0) {
    throw ShapeError("global_pool_sequence: expected non-empty (B, K, c), got " +
                     shape_str(feats.shape()));
  }
  return max_reduce(feats, 1);
}

template <typename T>
Var<T> global_infonce(Var<T> h, Var<T> g, T tau) {
  if (!(tau > 0)) throw DomainError("global_infonce: tau must be positive");
  const Shape& s = h.shape();
  if (s.size() != 2 || g.shape() != s) {
    throw ShapeError("global_infonce: h " + shape_str(s) + " and g " + shape_str(g.shape()) +
                     " must share a (B, p) shape");
  }
  if (s[0] < 2) throw ShapeError("global_infonce: needs a batch of at least 2");
  const T inv_tau = T(1) / tau;
  Var<T> logits = scale(matmul(h, transpose(g)), inv_tau);
  Var<T> positive = scale(sum_reduce(h * g, 1), inv_tau);
  return mean_all(logsumexp(logits) - positive);
}

template <typename T>
Tensor<T> frame_positional_encoding(std::size_t frames, std::size_t c) {
  Tensor<T> pe({frames, c});
  for (std::size_t m = 0; m < frames; ++m) {
    for (std::size_t j = 0; j < c; ++j) {
      const double freq = std::pow(10000.0, 2.0 * static_cast<double>(j / 2) / static_cast<double>(c));
      const double phase = j % 2 == 0 ? 0.0 : M_PI / 2;
      pe[m * c + j] = static_cast<T>(std::cos(static_cast<double>(m) / freq + phase));
    }
  }
  return pe;
}

template <typename T>
Tensor<T> folding_grid(std::size_t n_prime) {
  const auto side = static_cast<std::size_t>(std::llround(std::sqrt(static_cast<double>(n_prime))));
  if (side * side != n_prime || n_prime == 0) {
    throw ShapeError("folding_grid: N' = " + std::to_string(n_prime) + " is not a perfect square");
  }
  Tensor<T> grid({n_prime, 2});
  auto coord = [side](std::size_t i) {
    return side == 1 ? 0.0 : -1.0 + 2.0 * static_cast<double>(i) / static_cast<double>(side - 1);
  };
  for (std::size_t a = 0; a < side; ++a) {
    for (std::size_t b = 0; b < side; ++b) {
      grid[(a * side + b) * 2] = static_cast<T>(coord(a));
      grid[(a * side + b) * 2 + 1] = static_cast<T>(coord(b));
    }
  }
  return grid;
}

template <typename T>
Var<T> reconstruct_segment(Var<T> Q, ParamScope<T>& scope, std::size_t M, std::size_t n_prime) {
  const Shape& s = Q.shape();
  if (s.size() != 3) throw ShapeError("reconstruct_segment: expected (B, n, c), got " + shape_str(s));
  const std::size_t B = s[0], c = s[2];
  Var<T> grid = scope.constant(folding_grid<T>(n_prime));
  Var<T> pooled = reshape(mean_reduce(Q, 1), {B, 1, c});
  Var<T> frame_feats =
      pooled + reshape(scope.constant(frame_positional_encoding<T>(M, c)), {1, M, c});
  Var<T> first = fold(grid, frame_feats, scope, "decoder.fold1");
  return fold(first, frame_feats, scope, "decoder.fold2");
}

template <typename T>
Tensor<T> reconstruction_target(const Tensor<T>& segment, std::size_t n_prime, bool colorize) {
  if (segment.rank() != 3 || segment.dim(2) != 3) {
    throw ShapeError("reconstruction_target: expected (M, N, 3), got " + shape_str(segment.shape()));
  }
  const std::size_t M = segment.dim(0);
  Tensor<T> down({M, n_prime, 3});
  for (std::size_t f = 0; f < M; ++f) {
    const auto frame = geom::PointSet<T>::frame_of(segment, f);
    const auto idx = geom::farthest_point_sample(frame, n_prime, 0);
    for (std::size_t i = 0; i < n_prime; ++i) {
      const auto p = frame.point(idx[i]);
      std::copy(p.begin(), p.end(), down.data() + (f * n_prime + i) * 3);
    }
  }
  if (!colorize) return down.reshaped({M * n_prime, 3});
  return geom::colorize_segment(down).reshaped({M * n_prime, 6});
}

template <typename T>
Var<T> reconstruction_loss(Var<T> recon, const Tensor<T>& target) {
  const Shape& s = recon.shape();
  if (s.size() != 4 || s[3] != 6) {
    throw ShapeError("reconstruction_loss: expected (B, M, N', 6), got " + shape_str(s));
  }
  const std::size_t B = s[0];
  const std::size_t points = s[1] * s[2];
  if (target.rank() != 3 || target.dim(0) != B || target.dim(1) != points ||
      (target.dim(2) != 6 && target.dim(2) != 3)) {
    throw ShapeError("reconstruction_loss: target " + shape_str(target.shape()) +
                     " does not match reconstruction " + shape_str(s));
  }
  Var<T> flat = reshape(recon, {B, points, 6});
  if (target.dim(2) == 3) flat = gather(flat, {0, 1, 2}, 2);
  return mean_all(geom::chamfer_distance(flat, recon.graph().constant(target)));
}

template <typename T>
Var<T> total_loss(std::optional<Var<T>> local, std::optional<Var<T>> global,
                  std::optional<Var<T>> recon, T lambda) {
  if (lambda < 0) throw DomainError("total_loss: lambda must be non-negative");
  std::optional<Var<T>> total;
  auto accumulate = [&total](Var<T> term) { total = total ? *total + term : term; };
  if (local) accumulate(*local);
  if (global) accumulate(*global);
  if (recon) accumulate(scale(*recon, lambda));
  if (!total) throw ConfigError("total_loss: every loss term is disabled");
  return *total;
}

void add_head_params(ParamSet<float>& params, std::size_t c, std::size_t p, std::mt19937_64& rng) {
  for (const char* id : {"global", "local"}) {
    const std::string pre = std::string("head.") + id;
    add_dense(params, pre + ".w1", pre + ".b1", c, c, rng);
    add_dense(params, pre + ".w2", pre + ".b2", c, p, rng);
  }
}

void add_decoder_params(ParamSet<float>& params, std::size_t c, std::size_t hidden,
                        std::mt19937_64& rng) {
  add_dense(params, "decoder.fold1.w1", "decoder.fold1.b1", 2 + c, hidden, rng);
  add_dense(params, "decoder.fold1.w2", "decoder.fold1.b2", hidden, 6, rng);
  add_dense(params, "decoder.fold2.w1", "decoder.fold2.b1", 6 + c, hidden, rng);
  add_dense(params, "decoder.fold2.w2", "decoder.fold2.b2", hidden, 6, rng);
}

#define CPR_INSTANTIATE_OBJECTIVES(T)                                                         \
  template Var<T> project_head(Var<T>, ParamScope<T>&, const std::string&);                  \
  template Tensor<T> alignment_matrix(const Tensor<T>&, std::size_t, const Tensor<T>&,       \
                                      std::size_t, std::size_t, double, std::size_t);        \
  template Var<T> align_predictions(Var<T>, const Tensor<T>&);                               \
  template Var<T> logsumexp(Var<T>);                                                         \
  template Var<T> local_infonce(Var<T>, Var<T>, std::optional<Var<T>>, T, bool);             \
  template Var<T> global_pool_sequence(Var<T>);                                              \
  template Var<T> global_infonce(Var<T>, Var<T>, T);                                         \
  template Tensor<T> frame_positional_encoding(std::size_t, std::size_t);                    \
  template Tensor<T> folding_grid(std::size_t);                                              \
  template Var<T> reconstruct_segment(Var<T>, ParamScope<T>&, std::size_t, std::size_t);     \
  template Tensor<T> reconstruction_target(const Tensor<T>&, std::size_t, bool);             \
  template Var<T> reconstruction_loss(Var<T>, const Tensor<T>&);                             \
  template Var<T> total_loss(std::optional<Var<T>>, std::optional<Var<T>>,                   \
                             std::optional<Var<T>>, T);

CPR_INSTANTIATE_OBJECTIVES(float)
CPR_INSTANTIATE_OBJECTIVES(double)
CPR_INSTANTIATE_OBJECTIVES(long double)

}  // namespace cpr::model
