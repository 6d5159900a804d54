#pragma once

#include <cstdint>
#include <string>

#include "cpr/data/sequence.hpp"

namespace cpr::data {

enum class Motion : int {
  TranslateLine = 0,
  TranslateCircle,
  RotateZ,
  RotateX,
  ScaleOscillate,
  ShearOscillate,
  SplitMerge,
  JitterWalk,
};
inline constexpr int kMotionCount = 8;

enum class ShapeKind : int { SphereSurface = 0, CubeSurface, TorusSurface, TwoBlob };
inline constexpr int kShapeCount = 4;

std::string motion_name(Motion m);
std::string shape_name(ShapeKind s);

struct SyntheticSpec {
  int class_id = 0;  // motion family, 0..7
  ShapeKind shape = ShapeKind::SphereSurface;
  double speed = 1.0;   // multiplies the family's per-frame rate; 0 freezes the motion
  double noise = 0.01;  // per-coordinate Gaussian sigma, fresh each frame
  std::uint64_t seed = 0;
};

/// Frames before normalization, (T, N, 3). Points are sampled on the shape
/// once, given a seeded anisotropic scale and orientation, then moved by
/// the class motion per frame.
core::Tensor<double> generate_raw(const SyntheticSpec& spec, std::size_t T, std::size_t N);

/// generate_raw followed by normalize_sequence; labelled with class_id.
PointCloudSequence generate_synthetic(const SyntheticSpec& spec, std::size_t T, std::size_t N);

/// Per-frame rate of each motion family at speed 1: units per frame for
/// translations, radians per frame for rotations and oscillations.
double motion_rate(Motion m);

}  // namespace cpr::data
