#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "cpr/core/tensor.hpp"

namespace cpr::data {

struct PointCloudSequence {
  core::Tensor<float> frames;  // (T, N, 3)
  std::optional<std::int32_t> label;
  std::string source_id;
  bool normalized = false;

  std::size_t length() const { return frames.rank() == 3 ? frames.dim(0) : 0; }
  std::size_t points() const { return frames.rank() == 3 ? frames.dim(1) : 0; }
};

/// .pcsq layout, little endian: "PCSQ", u32 version (1), u32 T, u32 N,
/// u8 has_label, i32 label, then T*N*3 f32. The header is 21 bytes.
inline constexpr std::uint32_t kPcsqVersion = 1;
inline constexpr std::size_t kPcsqHeaderBytes = 21;

void save_sequence(const PointCloudSequence& seq, const std::string& path);

/// source_id is the file stem. The format has no normalization flag, so
/// `normalized` comes back false.
PointCloudSequence load_sequence(const std::string& path);

/// Header only: (T, N, label) without reading the payload into tensors.
struct SequenceHeader {
  std::uint32_t T = 0;
  std::uint32_t N = 0;
  std::optional<std::int32_t> label;
};
SequenceHeader read_sequence_header(const std::string& path);

}  // namespace cpr::data
