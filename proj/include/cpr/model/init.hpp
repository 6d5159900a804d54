#pragma once

#include <cmath>
#include <random>
#include <string>

#include "cpr/core/params.hpp"

namespace cpr::model {

using core::ParamSet;
using core::Shape;
using core::Tensor;

/// U(-1/sqrt(fan_in), 1/sqrt(fan_in)), the usual dense-layer default.
inline Tensor<float> uniform_init(Shape shape, std::size_t fan_in, std::mt19937_64& rng) {
  Tensor<float> t(std::move(shape));
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  std::uniform_real_distribution<double> dist(-bound, bound);
  for (auto& v : t.values()) v = static_cast<float>(dist(rng));
  return t;
}

inline Tensor<float> normal_init(Shape shape, double stddev, std::mt19937_64& rng) {
  Tensor<float> t(std::move(shape));
  std::normal_distribution<double> dist(0.0, stddev);
  for (auto& v : t.values()) v = static_cast<float>(dist(rng));
  return t;
}

/// Adds `prefix.w` (in, out) and `prefix.b` (out). The bias uses the same
/// uniform default unless `zero_bias` is set.
inline void add_dense(ParamSet<float>& params, const std::string& w, const std::string& b,
                      std::size_t in, std::size_t out, std::mt19937_64& rng,
                      bool zero_bias = false) {
  params.add(w, uniform_init({in, out}, in, rng));
  params.add(b, zero_bias ? Tensor<float>({out}) : uniform_init({out}, in, rng));
}

}  // namespace cpr::model
