#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "cpr/core/params.hpp"
#include "cpr/model/autoregressor.hpp"
#include "cpr/model/config.hpp"
#include "cpr/model/encoder.hpp"
#include "cpr/model/objectives.hpp"

namespace cpr::model {

/// Everything about one training sequence that does not depend on params.
template <typename T>
struct PreparedSample {
  std::vector<SegmentGeometry<T>> segments;  // all S, in order
  Tensor<T> target_stats;                    // (4): target mean xyz, normalised first frame
  Tensor<T> alignment;                       // (l*r, l*r): last prefix segment -> target anchors
  Tensor<T> recon_target;                    // (M * N', 6) or (M * N', 3)
};

template <typename T>
struct PreparedBatch {
  std::vector<PreparedSample<T>> samples;
  std::size_t size() const { return samples.size(); }
};

/// Splits each (T, N, 3) sequence into S segments of M frames and
/// precomputes geometry, alignment and reconstruction targets.
template <typename T>
PreparedSample<T> prepare_sample(const Tensor<T>& sequence, const ModelConfig& cfg);

template <typename T>
PreparedBatch<T> prepare_batch(const std::vector<Tensor<T>>& sequences, const ModelConfig& cfg);

template <typename T>
struct LossTerms {
  std::optional<Var<T>> local;
  std::optional<Var<T>> global;
  std::optional<Var<T>> recon;
  Var<T> total;
};

/// Builds the full pretraining graph for a batch; disabled terms are absent.
template <typename T>
LossTerms<T> compute_losses(const PreparedBatch<T>& batch, ParamScope<T>& scope,
                            const ModelConfig& cfg);

/// Encoder-only pass: (B, S * l * r, c) super-point features.
template <typename T>
Var<T> encode_batch(const PreparedBatch<T>& batch, ParamScope<T>& scope, const ModelConfig& cfg);

/// Frozen-encoder sequence features (B, c): max over all S segments.
template <typename T>
Tensor<T> sequence_features(const PreparedBatch<T>& batch, const ParamSet<T>& params,
                            const ModelConfig& cfg);

/// Every parameter of the model, drawn from `seed` in a fixed order.
ParamSet<float> init_params(const ModelConfig& cfg, std::uint64_t seed);

}  // namespace cpr::model
