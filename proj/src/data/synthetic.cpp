#include "cpr/data/synthetic.hpp"

#include <array>
#include <cmath>
#include <random>

#include "cpr/core/error.hpp"
#include "cpr/geom/pcgeom.hpp"

namespace cpr::data {

namespace {

using Vec3 = std::array<double, 3>;

Vec3 sample_shape(ShapeKind shape, std::mt19937_64& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  switch (shape) {
    case ShapeKind::SphereSurface: {
      Vec3 v{g(rng), g(rng), g(rng)};
      const double n = std::sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2]);
      return {v[0] / n, v[1] / n, v[2] / n};
    }
    case ShapeKind::CubeSurface: {
      Vec3 v{u(rng), u(rng), u(rng)};
      const auto face = std::uniform_int_distribution<int>(0, 5)(rng);
      v[face / 2] = face % 2 == 0 ? -1.0 : 1.0;
      return {0.8 * v[0], 0.8 * v[1], 0.8 * v[2]};
    }
    case ShapeKind::TorusSurface: {
      const double a = std::acos(-1.0) * (u(rng) + 1.0);
      const double b = std::acos(-1.0) * (u(rng) + 1.0);
      const double R = 0.7, r = 0.3;
      return {(R + r * std::cos(b)) * std::cos(a), (R + r * std::cos(b)) * std::sin(a), r * std::sin(b)};
    }
    case ShapeKind::TwoBlob: {
      const double side = std::uniform_int_distribution<int>(0, 1)(rng) ? 0.5 : -0.5;
      return {side + 0.2 * g(rng), 0.2 * g(rng), 0.2 * g(rng)};
    }
  }
  throw ConfigError("generate_synthetic: unknown shape " + std::to_string(static_cast<int>(shape)));
}

Vec3 rotate(const Vec3& p, int axis, double angle) {
  const double c = std::cos(angle), s = std::sin(angle);
  const int i = (axis + 1) % 3, j = (axis + 2) % 3;
  Vec3 out = p;
  out[i] = c * p[i] - s * p[j];
  out[j] = s * p[i] + c * p[j];
  return out;
}

}  // namespace

std::string motion_name(Motion m) {
  static const char* names[] = {"translate-line",  "translate-circle", "rotate-z",    "rotate-x",
                                "scale-oscillate", "shear-oscillate",  "split-merge", "jitter-walk"};
  const int i = static_cast<int>(m);
  if (i < 0 || i >= kMotionCount) throw ConfigError("unknown motion class " + std::to_string(i));
  return names[i];
}

std::string shape_name(ShapeKind s) {
  static const char* names[] = {"sphere-surface", "cube-surface", "torus-surface", "two-blob"};
  const int i = static_cast<int>(s);
  if (i < 0 || i >= kShapeCount) throw ConfigError("unknown shape " + std::to_string(i));
  return names[i];
}

double motion_rate(Motion m) {
  switch (m) {
    case Motion::TranslateLine: return 0.02;
    case Motion::TranslateCircle: return 0.1;
    case Motion::RotateZ: return 0.06;
    case Motion::RotateX: return 0.06;
    case Motion::ScaleOscillate: return 0.2;
    case Motion::ShearOscillate: return 0.2;
    case Motion::SplitMerge: return 0.1;
    case Motion::JitterWalk: return 0.03;
  }
  throw ConfigError("unknown motion class " + std::to_string(static_cast<int>(m)));
}

core::Tensor<double> generate_raw(const SyntheticSpec& spec, std::size_t T, std::size_t N) {
  if (spec.class_id < 0 || spec.class_id >= kMotionCount) {
    throw ConfigError("generate_synthetic: unknown class " + std::to_string(spec.class_id));
  }
  const int shape = static_cast<int>(spec.shape);
  if (shape < 0 || shape >= kShapeCount) {
    throw ConfigError("generate_synthetic: unknown shape " + std::to_string(shape));
  }
  if (T == 0 || N == 0) throw ConfigError("generate_synthetic: T and N must be positive");
  if (!(spec.noise >= 0)) throw ConfigError("generate_synthetic: noise must be non-negative");

  const auto motion = static_cast<Motion>(spec.class_id);
  std::mt19937_64 rng(spec.seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::normal_distribution<double> g(0.0, 1.0);

  // Anisotropic scale and orientation break the symmetry of spheres and tori,
  // so rotations stay visible.
  const Vec3 stretch{0.7 + 0.6 * u(rng), 0.7 + 0.6 * u(rng), 0.7 + 0.6 * u(rng)};
  const double tilt_x = std::acos(-1.0) * u(rng);
  const double tilt_z = 2 * std::acos(-1.0) * u(rng);
  std::vector<Vec3> base(N);
  for (auto& p : base) {
    p = sample_shape(spec.shape, rng);
    for (int k = 0; k < 3; ++k) p[k] *= stretch[k];
    p = rotate(rotate(p, 0, tilt_x), 2, tilt_z);
  }

  const double rate = motion_rate(motion) * spec.speed;
  core::Tensor<double> out({T, N, 3});
  Vec3 walk{0, 0, 0};
  for (std::size_t f = 0; f < T; ++f) {
    const double t = static_cast<double>(f);
    if (motion == Motion::JitterWalk && f > 0) {
      for (auto& w : walk) w += rate * g(rng);
    }
    for (std::size_t i = 0; i < N; ++i) {
      Vec3 p = base[i];
      switch (motion) {
        case Motion::TranslateLine:
          p[0] += rate * t;
          break;
        case Motion::TranslateCircle: {
          const double radius = 0.6;
          p[0] += radius * (std::cos(rate * t) - 1.0);
          p[1] += radius * std::sin(rate * t);
          break;
        }
        case Motion::RotateZ:
          p = rotate(p, 2, rate * t);
          break;
        case Motion::RotateX:
          p = rotate(p, 0, rate * t);
          break;
        case Motion::ScaleOscillate: {
          const double s = 1.0 + 0.35 * std::sin(rate * t);
          for (auto& v : p) v *= s;
          break;
        }
        case Motion::ShearOscillate:
          p[0] += 0.5 * std::sin(rate * t) * p[1];
          break;
        case Motion::SplitMerge:
          p[0] += (base[i][0] >= 0 ? 0.5 : -0.5) * std::abs(std::sin(rate * t));
          break;
        case Motion::JitterWalk:
          for (int k = 0; k < 3; ++k) p[k] += walk[k];
          break;
      }
      for (int k = 0; k < 3; ++k) {
        out[(f * N + i) * 3 + k] = p[k] + (spec.noise > 0 ? spec.noise * g(rng) : 0.0);
      }
    }
  }
  return out;
}

PointCloudSequence generate_synthetic(const SyntheticSpec& spec, std::size_t T, std::size_t N) {
  const auto norm = geom::normalize_sequence(generate_raw(spec, T, N));
  PointCloudSequence seq;
  seq.frames = norm.frames.cast<float>();
  seq.label = spec.class_id;
  seq.source_id = motion_name(static_cast<Motion>(spec.class_id)) + "-" + shape_name(spec.shape) +
                  "-" + std::to_string(spec.seed);
  seq.normalized = true;
  return seq;
}

}  // namespace cpr::data
