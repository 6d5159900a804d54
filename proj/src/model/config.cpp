#include "cpr/model/config.hpp"

#include <cmath>
#include <string>

#include "cpr/core/error.hpp"

namespace cpr::model {

namespace {

void require(bool ok, const std::string& what) {
  if (!ok) throw ConfigError(what);
}

}  // namespace

void ModelConfig::validate() const {
  require(S >= 1, "S must be at least 1");
  require(T >= 1, "T must be at least 1");
  require(T % S == 0, "T = " + std::to_string(T) + " is not divisible by S = " + std::to_string(S));
  require(S >= 2, "S must be at least 2 (one prefix segment and the target)");
  if (toggles.hard_negatives_on) {
    require(S >= 3, "hard negatives need S >= 3, got S = " + std::to_string(S));
  }
  require(toggles.local_on || toggles.global_on || toggles.recon_on,
          "at least one of local_on, global_on, recon_on must be set");
  require(N >= 1, "N must be at least 1");
  require(encoder.n_points == N, "encoder.n_points = " + std::to_string(encoder.n_points) +
                                     " does not match N = " + std::to_string(N));
  require(encoder.r_anchors >= 1 && encoder.r_anchors <= N,
          "encoder.r_anchors must lie in [1, N]");
  require(encoder.radius > 0, "encoder.radius must be positive");
  require(encoder.k_neighbors >= 1, "encoder.k_neighbors must be at least 1");
  require(encoder.temporal_kernel % 2 == 1, "encoder.temporal_kernel must be odd");
  require(encoder.temporal_stride >= 1, "encoder.temporal_stride must be at least 1");
  const std::size_t l = (M() + encoder.temporal_stride - 1) / encoder.temporal_stride;
  require(encoder.l_out == l, "encoder.l_out = " + std::to_string(encoder.l_out) +
                                  " but ceil(M / temporal_stride) = " + std::to_string(l));
  require(encoder.c_out >= 1 && encoder.spatial_hidden >= 1, "encoder widths must be positive");
  require(transformer.c == encoder.c_out, "transformer.c must equal encoder.c_out");
  require(transformer.heads >= 1 && transformer.c % transformer.heads == 0,
          "transformer.c must be divisible by transformer.heads");
  require(transformer.ffn_mult >= 1, "transformer.ffn_mult must be at least 1");
  require(tau > 0, "tau must be positive");
  require(lambda >= 0, "lambda must be non-negative");
  require(time_weight >= 0, "time_weight must be non-negative");
  require(N_prime >= 1 && N_prime <= N, "N_prime must lie in [1, N]");
  const auto side = static_cast<std::size_t>(std::llround(std::sqrt(static_cast<double>(N_prime))));
  require(side * side == N_prime, "N_prime = " + std::to_string(N_prime) + " is not a perfect square");
  require(projection_dim >= 1 && decoder_hidden >= 1, "head widths must be positive");
}

ModelConfig micro_config() {
  ModelConfig cfg;
  cfg.T = 12;
  cfg.S = 3;
  cfg.N = 32;
  cfg.encoder.n_points = 32;
  cfg.encoder.r_anchors = 8;
  cfg.encoder.c_out = 16;
  cfg.encoder.spatial_hidden = 16;
  cfg.encoder.l_out = 2;
  cfg.transformer.c = 16;
  cfg.transformer.layers = 2;
  cfg.N_prime = 16;
  cfg.projection_dim = 8;
  cfg.decoder_hidden = 16;
  return cfg;
}

}  // namespace cpr::model
