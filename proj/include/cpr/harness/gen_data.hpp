#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cpr/data/synthetic.hpp"

namespace cpr::harness {

struct GenDataOptions {
  int classes = 8;
  std::size_t per_class = 32;
  std::size_t frames = 64;
  std::size_t points = 256;
  double noise = 0.01;
  double speed_min = 0.75;
  double speed_max = 1.25;
  std::uint64_t seed = 0;
};

/// Spec of sequence k of class c: shape and speed are drawn from a stream
/// seeded by (seed, c, k), independently of the class.
data::SyntheticSpec dataset_spec(const GenDataOptions& opts, int class_id, std::size_t k);

/// Writes <motion>_<k>.pcsq for every class and index into `dir` and
/// returns the paths.
std::vector<std::string> generate_dataset(const std::string& dir, const GenDataOptions& opts);

}  // namespace cpr::harness
