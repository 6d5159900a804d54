#pragma once

#include <optional>
#include <random>
#include <string>

#include "cpr/core/params.hpp"
#include "cpr/model/config.hpp"

namespace cpr::model {

using core::ParamScope;
using core::ParamSet;
using core::Tensor;
using core::Var;

/// c -> c (GELU) -> p map of the local or global head, rows L2-normalised.
template <typename T>
Var<T> project_head(Var<T> feats, ParamScope<T>& scope, const std::string& head_id);

/// Dense (l*r, l*r) interpolation matrix taking prediction features onto
/// target anchors. Both coordinate tensors are (l, r, 4) with absolute
/// frame indices; time enters the 4D distance as the offset inside its own
/// segment divided by M - 1, times `time_weight`.
template <typename T>
Tensor<T> alignment_matrix(const Tensor<T>& pred_coords, std::size_t pred_first_frame,
                           const Tensor<T>& target_coords, std::size_t target_first_frame,
                           std::size_t M, double time_weight, std::size_t k = 3);

/// (B, n, n) weights applied to (B, n, c) predictions.
template <typename T>
Var<T> align_predictions(Var<T> Q, const Tensor<T>& alignment);

/// Row-wise log(sum(exp(x))) over the last axis, shift-stabilised.
template <typename T>
Var<T> logsumexp(Var<T> x);

/// z, q_hat: (B, n, p); hard: (B, h, p) or invalid. Negatives for position
/// i are the other predictions of the same sample plus its hard negatives;
/// `cross_batch` adds every prediction of the other samples as well.
template <typename T>
Var<T> local_infonce(Var<T> z, Var<T> q_hat, std::optional<Var<T>> hard, T tau,
                     bool cross_batch = false);

/// Channel-wise max over (B, K, c) super-point features.
template <typename T>
Var<T> global_pool_sequence(Var<T> feats);

/// h, g: (B, p); h_b is contrasted against every g of the batch.
template <typename T>
Var<T> global_infonce(Var<T> h, Var<T> g, T tau);

/// PE(m)_j = cos(m / 10000^(2 floor(j/2) / c) + phi_j), phi_j = pi/2 on odd j.
template <typename T>
Tensor<T> frame_positional_encoding(std::size_t frames, std::size_t c);

/// side x side lattice over [-1, 1]^2, row-major, (N', 2).
template <typename T>
Tensor<T> folding_grid(std::size_t n_prime);

/// Q (B, l*r, c) -> (B, M, N', 6).
template <typename T>
Var<T> reconstruct_segment(Var<T> Q, ParamScope<T>& scope, std::size_t M, std::size_t n_prime);

/// Per-frame FPS of an (M, N, 3) segment down to N' points, coloured when
/// requested, flattened to (M * N', 6) or (M * N', 3).
template <typename T>
Tensor<T> reconstruction_target(const Tensor<T>& segment, std::size_t n_prime, bool colorize);

/// Mean chamfer between (B, M, N', 6) reconstructions and (B, M * N', D)
/// targets; with D = 3 only the coordinate channels are compared.
template <typename T>
Var<T> reconstruction_loss(Var<T> recon, const Tensor<T>& target);

template <typename T>
Var<T> total_loss(std::optional<Var<T>> local, std::optional<Var<T>> global,
                  std::optional<Var<T>> recon, T lambda);

void add_head_params(ParamSet<float>& params, std::size_t c, std::size_t p, std::mt19937_64& rng);
void add_decoder_params(ParamSet<float>& params, std::size_t c, std::size_t hidden,
                        std::mt19937_64& rng);

}  // namespace cpr::model
