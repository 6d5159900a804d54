#pragma once

#include <random>
#include <vector>

#include "cpr/core/params.hpp"
#include "cpr/model/config.hpp"

namespace cpr::model {

using core::ParamScope;
using core::ParamSet;
using core::Tensor;
using core::Var;

/// Parameter-independent part of encoding one segment: anchors, matched
/// tubes and neighbour displacements. Computed once per sample and reused
/// across every forward pass that sees the same input.
template <typename T>
struct SegmentGeometry {
  std::size_t segment_index = 0;
  std::size_t first_frame = 0;  // absolute frame index of the segment's frame 0
  std::size_t frames = 0;       // M
  Tensor<T> displacements;      // (l * r * K * k, 3), ordered (frame, anchor, tap, neighbour)
  Tensor<T> anchor_coords;      // (l, r, 4): x, y, z, absolute frame index
};

template <typename T>
struct SegmentEmbedding {
  Var<T> feats;             // (l, r, c)
  Tensor<T> anchor_coords;  // (l, r, 4)
  std::size_t segment_index = 0;
};

/// Index of the point farthest from the frame centroid (lowest index on
/// ties). Used as the FPS start so anchors do not depend on point order.
template <typename T>
std::size_t centroid_farthest_start(const Tensor<T>& frames, std::size_t frame);

/// `segment` is (M, N, 3). Each output frame j sits on input frame
/// j * stride; its tubes reach temporal_kernel / 2 frames either side with
/// edge frames replicated. Neighbourhoods are gathered around the matched
/// anchor in each tap frame, displacements are taken from the tube's
/// centre anchor.
template <typename T>
SegmentGeometry<T> segment_geometry(const Tensor<T>& segment, std::size_t segment_index,
                                    std::size_t first_frame, const EncoderConfig& cfg);

/// Runs the spatial map and temporal convolution on a batch of segments,
/// returning (G, l, r, c) in input order.
template <typename T>
Var<T> encode_geometry(const std::vector<const SegmentGeometry<T>*>& segments,
                       ParamScope<T>& scope, const EncoderConfig& cfg);

template <typename T>
SegmentEmbedding<T> encode_segment(const Tensor<T>& segment, std::size_t segment_index,
                                   std::size_t first_frame, ParamScope<T>& scope,
                                   const EncoderConfig& cfg);

/// Encodes each (M, N, 3) segment independently; segment i starts at frame
/// i * M. Requires at least 3 segments when hard negatives are enabled.
template <typename T>
std::vector<SegmentEmbedding<T>> encode_prefix(const std::vector<Tensor<T>>& segments,
                                               ParamScope<T>& scope, const EncoderConfig& cfg,
                                               bool hard_negatives = true);

void add_encoder_params(ParamSet<float>& params, const EncoderConfig& cfg, std::mt19937_64& rng);

}  // namespace cpr::model
