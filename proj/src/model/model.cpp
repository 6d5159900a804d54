#include "cpr/model/model.hpp"

#include <numeric>
#include <random>

#include "cpr/core/ops.hpp"

namespace cpr::model {

using namespace core;

namespace {

std::vector<std::size_t> iota(std::size_t begin, std::size_t end) {
  std::vector<std::size_t> v(end - begin);
  std::iota(v.begin(), v.end(), begin);
  return v;
}

template <typename T>
Tensor<T> frames_slice(const Tensor<T>& seq, std::size_t first, std::size_t count) {
  const std::size_t per = seq.dim(1) * seq.dim(2);
  std::vector<T> data(seq.data() + first * per, seq.data() + (first + count) * per);
  return Tensor<T>({count, seq.dim(1), seq.dim(2)}, std::move(data));
}

}  // namespace

template <typename T>
PreparedSample<T> prepare_sample(const Tensor<T>& sequence, const ModelConfig& cfg) {
  if (sequence.shape() != Shape{cfg.T, cfg.N, 3}) {
    throw ShapeError("prepare_sample: sequence " + shape_str(sequence.shape()) +
                     " does not match (T, N, 3) = " + shape_str({cfg.T, cfg.N, 3}));
  }
  const std::size_t M = cfg.M();
  PreparedSample<T> out;
  for (std::size_t s = 0; s < cfg.S; ++s) {
    out.segments.push_back(segment_geometry(frames_slice(sequence, s * M, M), s, s * M, cfg.encoder));
  }
  const std::size_t target_first = (cfg.S - 1) * M;
  const Tensor<T> target = frames_slice(sequence, target_first, M);
  double mean[3] = {0, 0, 0};
  for (std::size_t i = 0; i < target.size(); ++i) mean[i % 3] += target[i];
  const double count = static_cast<double>(target.size() / 3);
  out.target_stats = Tensor<T>({4});
  for (int k = 0; k < 3; ++k) out.target_stats[k] = static_cast<T>(mean[k] / count);
  out.target_stats[3] =
      cfg.T > 1 ? static_cast<T>(static_cast<double>(target_first) / static_cast<double>(cfg.T - 1))
                : T(0);
  const auto& pred = out.segments[cfg.S - 2];
  const auto& tgt = out.segments[cfg.S - 1];
  out.alignment = alignment_matrix(pred.anchor_coords, pred.first_frame, tgt.anchor_coords,
                                   tgt.first_frame, M, cfg.time_weight);
  out.recon_target = reconstruction_target(target, cfg.N_prime, cfg.toggles.colorize_on);
  return out;
}

template <typename T>
PreparedBatch<T> prepare_batch(const std::vector<Tensor<T>>& sequences, const ModelConfig& cfg) {
  PreparedBatch<T> batch;
  for (const auto& seq : sequences) batch.samples.push_back(prepare_sample(seq, cfg));
  return batch;
}

template <typename T>
Var<T> encode_batch(const PreparedBatch<T>& batch, ParamScope<T>& scope, const ModelConfig& cfg) {
  if (batch.size() == 0) throw ShapeError("encode_batch: empty batch");
  std::vector<const SegmentGeometry<T>*> segs;
  for (const auto& s : batch.samples) {
    if (s.segments.size() != cfg.S) throw ShapeError("encode_batch: sample prepared for a different S");
    for (const auto& g : s.segments) segs.push_back(&g);
  }
  Var<T> feats = encode_geometry(segs, scope, cfg.encoder);
  return reshape(feats, {batch.size(), cfg.S * cfg.tokens_per_segment(), cfg.c()});
}

template <typename T>
LossTerms<T> compute_losses(const PreparedBatch<T>& batch, ParamScope<T>& scope,
                            const ModelConfig& cfg) {
  const std::size_t B = batch.size();
  const std::size_t S = cfg.S;
  const std::size_t l = cfg.encoder.l_out;
  const std::size_t r = cfg.encoder.r_anchors;
  const std::size_t lr = l * r;
  const std::size_t c = cfg.c();
  const auto& tg = cfg.toggles;

  Var<T> feats = encode_batch(batch, scope, cfg);                   // (B, S*lr, c)
  Var<T> per_segment = reshape(feats, {B, S, lr, c});
  Var<T> prefix = reshape(gather(per_segment, iota(0, S - 1), 1), {B, S - 1, l, r, c});
  Var<T> target = reshape(gather(per_segment, {S - 1}, 1), {B, lr, c});

  Tensor<T> prefix_coords({B, S - 1, l, r, 4});
  Tensor<T> stats({B, 4});
  std::vector<T> align;
  std::vector<T> recon_target;
  for (std::size_t b = 0; b < B; ++b) {
    const auto& sample = batch.samples[b];
    for (std::size_t s = 0; s + 1 < S; ++s) {
      const auto norm = normalize_positions(sample.segments[s].anchor_coords, cfg.T);
      std::copy(norm.vec().begin(), norm.vec().end(),
                prefix_coords.data() + (b * (S - 1) + s) * lr * 4);
    }
    std::copy_n(sample.target_stats.data(), 4, stats.data() + b * 4);
    align.insert(align.end(), sample.alignment.vec().begin(), sample.alignment.vec().end());
    recon_target.insert(recon_target.end(), sample.recon_target.vec().begin(),
                        sample.recon_target.vec().end());
  }

  LossTerms<T> out;
  const bool need_transformer = tg.local_on || tg.global_on || tg.recon_on;
  if (need_transformer) {
    const auto seq = build_token_sequence(prefix, prefix_coords, stats, scope);
    Var<T> outputs = transformer_forward(seq.tokens, scope, cfg.transformer);
    const auto split = split_outputs(outputs, S - 1, lr);
    const T tau = static_cast<T>(cfg.tau);
    if (tg.local_on) {
      Var<T> q_hat = align_predictions(split.Q, Tensor<T>({B, lr, lr}, align));
      std::optional<Var<T>> hard;
      if (tg.hard_negatives_on) {
        if (!split.hard_pool.valid()) throw ConfigError("hard negatives need S >= 3");
        hard = project_head(split.hard_pool, scope, "local");
      }
      out.local = local_infonce(project_head(target, scope, "local"),
                                project_head(q_hat, scope, "local"), hard, tau,
                                tg.cross_batch_local);
    }
    if (tg.global_on) {
      Var<T> pooled = global_pool_sequence(feats);
      out.global = global_infonce(project_head(pooled, scope, "global"),
                                  project_head(split.class_embed, scope, "global"), tau);
    }
    if (tg.recon_on) {
      const std::size_t D = tg.colorize_on ? 6 : 3;
      Var<T> recon = reconstruct_segment(split.Q, scope, cfg.M(), cfg.N_prime);
      out.recon = reconstruction_loss(
          recon, Tensor<T>({B, cfg.M() * cfg.N_prime, D}, std::move(recon_target)));
    }
  }
  out.total = total_loss(out.local, out.global, out.recon, static_cast<T>(cfg.lambda));
  return out;
}

template <typename T>
Tensor<T> sequence_features(const PreparedBatch<T>& batch, const ParamSet<T>& params,
                            const ModelConfig& cfg) {
  Graph<T> graph;
  ParamScope<T> scope(graph, params);
  return global_pool_sequence(encode_batch(batch, scope, cfg)).value();
}

ParamSet<float> init_params(const ModelConfig& cfg, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  ParamSet<float> params;
  add_encoder_params(params, cfg.encoder, rng);
  add_autoregressor_params(params, cfg.transformer, rng);
  add_head_params(params, cfg.c(), cfg.projection_dim, rng);
  add_decoder_params(params, cfg.c(), cfg.decoder_hidden, rng);
  return params;
}

#define CPR_INSTANTIATE_MODEL(T)                                                               \
  template PreparedSample<T> prepare_sample(const Tensor<T>&, const ModelConfig&);             \
  template PreparedBatch<T> prepare_batch(const std::vector<Tensor<T>>&, const ModelConfig&);  \
  template Var<T> encode_batch(const PreparedBatch<T>&, ParamScope<T>&, const ModelConfig&);   \
  template LossTerms<T> compute_losses(const PreparedBatch<T>&, ParamScope<T>&,                \
                                       const ModelConfig&);                                    \
  template Tensor<T> sequence_features(const PreparedBatch<T>&, const ParamSet<T>&,            \
                                       const ModelConfig&);

CPR_INSTANTIATE_MODEL(float)
CPR_INSTANTIATE_MODEL(double)
CPR_INSTANTIATE_MODEL(long double)

}  // namespace cpr::model
