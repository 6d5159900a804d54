#pragma once

#include <cstdint>
#include <string>

#include "cpr/core/params.hpp"

namespace cpr::data {

/// "CPR1" container. Layout, little endian: magic, u32 version, string
/// config_json, u32 tensor count, then per tensor in lexicographic name
/// order: string name, u8 trainable, u32 rank, u32 dims[rank], f32 data;
/// then string rng_state and u64 step. Strings are u32 length + bytes.
struct Checkpoint {
  std::uint32_t version = 1;
  std::string config_json;
  core::ParamSet<float> params;
  std::string rng_state;
  std::uint64_t step = 0;
};

inline constexpr std::uint32_t kCheckpointVersion = 1;

std::vector<char> encode_checkpoint(const Checkpoint& ckpt);
Checkpoint decode_checkpoint(const std::vector<char>& bytes, const std::string& path = "<memory>");

void save_checkpoint(const Checkpoint& ckpt, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

/// Throws CheckpointMismatchError listing missing and extra names, or else
/// naming the first tensor (in name order) whose shape differs.
void verify_params(const core::ParamSet<float>& expected, const core::ParamSet<float>& actual);

}  // namespace cpr::data
