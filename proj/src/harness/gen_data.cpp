#include "cpr/harness/gen_data.hpp"

#include <cstdio>
#include <filesystem>
#include <random>

#include "cpr/core/error.hpp"

namespace cpr::harness {

data::SyntheticSpec dataset_spec(const GenDataOptions& opts, int class_id, std::size_t k) {
  std::seed_seq seq{static_cast<std::uint32_t>(opts.seed), static_cast<std::uint32_t>(opts.seed >> 32),
                    static_cast<std::uint32_t>(class_id), static_cast<std::uint32_t>(k)};
  std::mt19937_64 rng(seq);
  data::SyntheticSpec spec;
  spec.class_id = class_id;
  spec.shape = static_cast<data::ShapeKind>(
      std::uniform_int_distribution<int>(0, data::kShapeCount - 1)(rng));
  spec.speed = std::uniform_real_distribution<double>(opts.speed_min, opts.speed_max)(rng);
  spec.noise = opts.noise;
  spec.seed = rng();
  return spec;
}

std::vector<std::string> generate_dataset(const std::string& dir, const GenDataOptions& opts) {
  if (opts.classes < 1 || opts.classes > data::kMotionCount) {
    throw ConfigError("gen-data: classes must lie in [1, " + std::to_string(data::kMotionCount) + "]");
  }
  if (opts.per_class == 0) throw ConfigError("gen-data: per-class must be positive");
  if (opts.speed_min > opts.speed_max) throw ConfigError("gen-data: speed range is empty");
  std::filesystem::create_directories(dir);
  std::vector<std::string> paths;
  for (int c = 0; c < opts.classes; ++c) {
    for (std::size_t k = 0; k < opts.per_class; ++k) {
      auto seq = data::generate_synthetic(dataset_spec(opts, c, k), opts.frames, opts.points);
      char name[96];
      std::snprintf(name, sizeof name, "%s_%03zu.pcsq",
                    data::motion_name(static_cast<data::Motion>(c)).c_str(), k);
      const auto path = (std::filesystem::path(dir) / name).string();
      data::save_sequence(seq, path);
      paths.push_back(path);
    }
  }
  return paths;
}

}  // namespace cpr::harness
