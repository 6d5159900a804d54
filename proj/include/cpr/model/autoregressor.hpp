#pragma once

#include <random>
#include <vector>

#include "cpr/core/params.hpp"
#include "cpr/model/config.hpp"
#include "cpr/model/encoder.hpp"

namespace cpr::model {

template <typename T>
struct TokenSequence {
  Var<T> tokens;                      // (B, m + 1, c), row 0 is the class token
  Tensor<T> positions;                // (B, m + 1, 4), time normalised to [0, 1]
  std::vector<int> segment_of_token;  // m + 1 entries, -1 for the class token
};

template <typename T>
struct SplitOutputs {
  Var<T> Q;            // (B, l * r, c): tokens of the last prefix segment
  Var<T> class_embed;  // (B, c)
  Var<T> hard_pool;    // (B, h, c): tokens of the earlier prefix segments; invalid when none
};

/// Linear 4 -> c map applied to the last axis of `coords`.
template <typename T>
Var<T> positional_embed(Var<T> coords, ParamScope<T>& scope);

/// Divides the time column (index 3) by frames - 1 (left at 0 when frames == 1).
template <typename T>
Tensor<T> normalize_positions(Tensor<T> coords, std::size_t frames);

/// `prefix_feats` is (B, P, l, r, c) and `prefix_coords` (B, P, l, r, 4)
/// with normalised time; `target_stats` is (B, 4): target point mean and
/// normalised first frame. Tokens are flattened in (segment, frame, anchor)
/// order.
template <typename T>
TokenSequence<T> build_token_sequence(Var<T> prefix_feats, const Tensor<T>& prefix_coords,
                                      const Tensor<T>& target_stats, ParamScope<T>& scope);

/// Single-sample form over encoder outputs; `frames` normalises time.
template <typename T>
TokenSequence<T> build_token_sequence(const std::vector<SegmentEmbedding<T>>& prefix,
                                      const Tensor<T>& target_stats, std::size_t frames,
                                      ParamScope<T>& scope);

/// Pre-norm blocks with full attention over (B, n, c) tokens. When
/// `attention` is given it receives each layer's (B * heads, n, n) weights.
template <typename T>
Var<T> transformer_forward(Var<T> tokens, ParamScope<T>& scope, const TransformerConfig& cfg,
                           std::vector<Tensor<T>>* attention = nullptr);

/// `prefix_segments` is P, the number of encoded prefix segments.
template <typename T>
SplitOutputs<T> split_outputs(Var<T> outputs, std::size_t prefix_segments,
                              std::size_t tokens_per_segment);

void add_autoregressor_params(ParamSet<float>& params, const TransformerConfig& cfg,
                              std::mt19937_64& rng);

}  // namespace cpr::model
