#pragma once

#include <vector>

#include "cpr/core/params.hpp"
#include "cpr/data/sequence.hpp"
#include "cpr/harness/run_config.hpp"

namespace cpr::harness {

/// Frozen-encoder features (one row of width c per sequence) of the centre
/// crop of each sequence, max-pooled over all S segments.
std::vector<std::vector<double>> extract_features(const core::ParamSet<float>& params,
                                                  const RunConfig& cfg,
                                                  const std::vector<data::PointCloudSequence>& seqs);

struct ProbeResult {
  double train_accuracy = 0;
  double val_accuracy = 0;
  std::size_t classes = 0;
};

/// Softmax linear classifier on standardized features (train statistics),
/// SGD with momentum, linear warmup then cosine decay per step.
/// Labels must be present on every sequence.
ProbeResult fit_linear_probe(const std::vector<std::vector<double>>& train_x,
                             const std::vector<int>& train_y,
                             const std::vector<std::vector<double>>& val_x,
                             const std::vector<int>& val_y, const ProbeConfig& cfg,
                             std::uint64_t seed);

/// extract_features on both splits, then fit_linear_probe.
ProbeResult linear_probe(const core::ParamSet<float>& params, const RunConfig& cfg,
                         const std::vector<data::PointCloudSequence>& train,
                         const std::vector<data::PointCloudSequence>& val);

}  // namespace cpr::harness
