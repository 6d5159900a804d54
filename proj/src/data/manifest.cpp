#include "cpr/data/manifest.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <set>

#include "cpr/data/errors.hpp"
#include "cpr/data/sequence.hpp"
#include "json.hpp"

namespace cpr::data {

namespace fs = std::filesystem;

std::vector<const ManifestEntry*> Manifest::of(Split s) const {
  std::vector<const ManifestEntry*> out;
  for (const auto& e : entries) {
    if (e.split == s) out.push_back(&e);
  }
  return out;
}

std::uint64_t split_hash(const std::string& source_id, std::uint64_t seed) {
  std::uint64_t h = 14695981039346656037ull;
  auto mix = [&h](unsigned char c) {
    h ^= c;
    h *= 1099511628211ull;
  };
  for (int i = 0; i < 8; ++i) mix(static_cast<unsigned char>(seed >> (8 * i)));
  for (char c : source_id) mix(static_cast<unsigned char>(c));
  // splitmix64 finalizer: raw FNV-1a orders ids with a common prefix together.
  h ^= h >> 30;
  h *= 0xbf58476d1ce4e5b9ull;
  h ^= h >> 27;
  h *= 0x94d049bb133111ebull;
  h ^= h >> 31;
  return h;
}

Manifest build_manifest(const std::vector<std::string>& paths, std::uint64_t seed,
                        double val_fraction) {
  if (!(val_fraction >= 0 && val_fraction <= 1)) {
    throw ConfigError("build_manifest: val_fraction must lie in [0, 1]");
  }
  std::set<std::string> seen;
  for (const auto& p : paths) {
    if (!seen.insert(p).second) throw ManifestError("build_manifest: duplicate path " + p);
  }
  Manifest m;
  for (const auto& p : seen) {
    try {
      const auto h = read_sequence_header(p);
      ManifestEntry e;
      e.path = p;
      e.source_id = fs::path(p).stem().string();
      e.label = h.label;
      e.T = h.T;
      e.N = h.N;
      m.entries.push_back(std::move(e));
    } catch (const DataError&) {
      ++m.skipped;
    }
  }
  std::vector<std::size_t> order(m.entries.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::vector<std::uint64_t> keys;
  for (const auto& e : m.entries) keys.push_back(split_hash(e.source_id, seed));
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return keys[a] != keys[b] ? keys[a] < keys[b] : a < b;
  });
  const auto n_val = static_cast<std::size_t>(std::llround(val_fraction * double(order.size())));
  for (std::size_t i = 0; i < n_val; ++i) m.entries[order[i]].split = Split::Val;
  return m;
}

Manifest build_manifest(const std::string& dir, std::uint64_t seed, double val_fraction) {
  std::error_code ec;
  if (!fs::is_directory(dir, ec)) throw ManifestError("build_manifest: not a directory: " + dir);
  std::vector<std::string> paths;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".pcsq") {
      paths.push_back(entry.path().string());
    }
  }
  return build_manifest(paths, seed, val_fraction);
}

std::string manifest_to_json(const Manifest& m) {
  nlohmann::ordered_json list = nlohmann::ordered_json::array();
  for (const auto& e : m.entries) {
    nlohmann::ordered_json j;
    j["path"] = e.path;
    j["label"] = e.label ? nlohmann::ordered_json(*e.label) : nlohmann::ordered_json(nullptr);
    j["T"] = e.T;
    j["N"] = e.N;
    j["split"] = e.split == Split::Train ? "train" : "val";
    list.push_back(std::move(j));
  }
  return list.dump(2);
}

}  // namespace cpr::data
