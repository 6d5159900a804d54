#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace cpr::data {

enum class Split { Train, Val };

struct ManifestEntry {
  std::string path;
  std::string source_id;
  std::optional<std::int32_t> label;
  std::uint32_t T = 0;
  std::uint32_t N = 0;
  Split split = Split::Train;
};

struct Manifest {
  std::vector<ManifestEntry> entries;  // sorted by path
  std::size_t skipped = 0;             // unreadable files left out

  std::vector<const ManifestEntry*> of(Split s) const;
};

/// Every *.pcsq in `dir` (not recursive). Files whose header fails to parse
/// are counted in `skipped`. The val split is the round(n * val_fraction)
/// entries with the smallest seeded hash of source_id.
Manifest build_manifest(const std::string& dir, std::uint64_t seed = 0, double val_fraction = 0.2);

/// Same, over an explicit file list; duplicate paths are a ManifestError.
Manifest build_manifest(const std::vector<std::string>& paths, std::uint64_t seed = 0,
                        double val_fraction = 0.2);

std::string manifest_to_json(const Manifest& m);

/// FNV-1a of the seed bytes followed by the id, then a splitmix64 finalizer.
std::uint64_t split_hash(const std::string& source_id, std::uint64_t seed);

}  // namespace cpr::data
