#pragma once

#include <iosfwd>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "cpr/core/params.hpp"
#include "cpr/data/sequence.hpp"
#include "cpr/harness/run_config.hpp"

namespace cpr::harness {

struct Dataset {
  std::vector<data::PointCloudSequence> train;
  std::vector<data::PointCloudSequence> val;
};

/// Reads every .pcsq under `dir` through the manifest and splits it with
/// cfg.split_seed. Sequences must have cfg N points and at least the
/// (T - 1) * frame_stride + 1 frames a crop spans.
Dataset load_dataset(const std::string& dir, const RunConfig& cfg, std::ostream* log = nullptr);

/// (T, N, 3) frames start, start + stride, ..., renormalized to the unit ball.
core::Tensor<float> crop(const data::PointCloudSequence& seq, std::size_t start, std::size_t T,
                         std::size_t stride);
std::size_t max_crop_start(const data::PointCloudSequence& seq, const RunConfig& cfg);

/// Cosine annealing from lr at step 0 to lr_min at the last step.
double cosine_lr(double lr, double lr_min, std::size_t step, std::size_t total_steps);

class Adam {
 public:
  Adam(double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
      : beta1_(beta1), beta2_(beta2), eps_(eps) {}
  /// Updates every trainable entry of `params` that has a gradient.
  void step(core::ParamSet<float>& params, const core::ParamSet<float>& grads, double lr);

 private:
  double beta1_, beta2_, eps_;
  std::size_t t_ = 0;
  std::map<std::string, std::vector<double>> m_, v_;
};

struct MetricsRow {
  std::size_t step = 0;  // 1-based
  std::optional<double> local, global, recon;
  double total = 0;
  double lr = 0;
  double wall_ms = 0;
};

inline constexpr const char* kMetricsHeader = "step,L_l,L_g,d_recon,L_total,lr";

/// One CSV line without the newline; disabled terms are empty fields.
std::string metrics_line(const MetricsRow& row);

struct PretrainResult {
  core::ParamSet<float> params;
  std::vector<MetricsRow> rows;
  std::size_t steps_per_epoch = 0;
};

/// Adam on the enabled losses over shuffled, drop-last batches of random
/// crops. With a non-empty out_dir it writes metrics.csv, timing.csv,
/// config.json, epoch_<e>.ckpt after each epoch and final.ckpt.
/// A non-finite loss throws NumericError naming the step and the terms.
PretrainResult pretrain(const RunConfig& cfg, const std::vector<data::PointCloudSequence>& train,
                        const std::string& out_dir = "", std::ostream* log = nullptr);

}  // namespace cpr::harness
