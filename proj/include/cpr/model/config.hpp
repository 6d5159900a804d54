#pragma once

#include <cstddef>

namespace cpr::model {

struct EncoderConfig {
  std::size_t n_points = 256;
  std::size_t r_anchors = 32;
  double radius = 0.4;
  std::size_t k_neighbors = 9;
  std::size_t temporal_kernel = 3;
  std::size_t temporal_stride = 2;
  std::size_t c_out = 128;
  std::size_t l_out = 2;
  std::size_t spatial_hidden = 64;
};

struct TransformerConfig {
  std::size_t layers = 3;
  std::size_t heads = 4;
  std::size_t c = 128;
  std::size_t ffn_mult = 4;
};

struct Toggles {
  bool local_on = true;
  bool global_on = true;
  bool recon_on = true;
  bool hard_negatives_on = true;
  bool colorize_on = true;
  bool cross_batch_local = false;
};

/// Everything that determines parameter shapes and the loss graph.
struct ModelConfig {
  std::size_t T = 24;
  std::size_t N = 256;
  std::size_t S = 6;
  EncoderConfig encoder;
  TransformerConfig transformer;
  double tau = 0.1;
  double lambda = 1.0;
  std::size_t N_prime = 256;
  std::size_t projection_dim = 64;
  std::size_t decoder_hidden = 128;
  double time_weight = 1.0;
  Toggles toggles;

  std::size_t M() const { return S == 0 ? 0 : T / S; }
  std::size_t c() const { return encoder.c_out; }
  std::size_t tokens_per_segment() const { return encoder.l_out * encoder.r_anchors; }

  /// Throws ConfigError naming the first violated invariant.
  void validate() const;
};

/// Small desk-independent instance used by the gradient-check suite.
ModelConfig micro_config();

}  // namespace cpr::model
