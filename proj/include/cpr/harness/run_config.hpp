#pragma once

#include <cstdint>
#include <string>

#include "cpr/model/config.hpp"

namespace cpr::harness {

struct ProbeConfig {
  std::size_t epochs = 100;
  std::size_t warmup_epochs = 10;
  std::size_t batch = 32;
  double lr = 0.1;
  double momentum = 0.9;
  double weight_decay = 1e-4;
};

/// One pretraining run. The JSON form mirrors these field names; N' is
/// spelled "N_prime".
struct RunConfig {
  model::ModelConfig model;
  std::size_t frame_stride = 2;
  std::size_t batch = 8;
  double lr = 8e-4;
  double lr_min = 1e-6;
  std::size_t epochs = 8;
  std::uint64_t seed = 0;
  std::uint64_t split_seed = 0;
  ProbeConfig probe;

  /// Model invariants plus the harness's own (batch, stride, lr).
  void validate() const;
};

/// Strict: unknown keys and wrongly typed values are ConfigErrors. Missing
/// keys keep their defaults. The result is validated.
RunConfig parse_run_config(const std::string& json_text);
RunConfig load_run_config(const std::string& path);

/// Every field, in a fixed key order; parse_run_config(to_json(c)) == c.
std::string to_json(const RunConfig& cfg);

/// Desk-scale defaults for the synthetic benchmark.
RunConfig default_run_config();

}  // namespace cpr::harness
