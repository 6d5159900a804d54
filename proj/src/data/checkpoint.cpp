#include "cpr/data/checkpoint.hpp"

#include "binary.hpp"

namespace cpr::data {

namespace {

constexpr char kMagic[4] = {'C', 'P', 'R', '1'};
// Upper bound on tensor rank, so a corrupt header cannot request huge allocations.
constexpr std::uint32_t kMaxRank = 8;

}  // namespace

std::vector<char> encode_checkpoint(const Checkpoint& ckpt) {
  detail::Writer out;
  out.put_bytes(kMagic, 4);
  out.put<std::uint32_t>(ckpt.version);
  out.put_string(ckpt.config_json);
  out.put<std::uint32_t>(static_cast<std::uint32_t>(ckpt.params.size()));
  for (const auto& [name, entry] : ckpt.params.entries()) {
    out.put_string(name);
    out.put<std::uint8_t>(entry.trainable ? 1 : 0);
    out.put<std::uint32_t>(static_cast<std::uint32_t>(entry.value.rank()));
    for (auto d : entry.value.shape()) out.put<std::uint32_t>(static_cast<std::uint32_t>(d));
    out.put_bytes(entry.value.data(), entry.value.size() * sizeof(float));
  }
  out.put_string(ckpt.rng_state);
  out.put<std::uint64_t>(ckpt.step);
  return out.bytes();
}

Checkpoint decode_checkpoint(const std::vector<char>& bytes, const std::string& path) {
  detail::Reader in(path, bytes);
  char magic[4];
  in.get_bytes(magic, 4, "magic");
  if (std::memcmp(magic, kMagic, 4) != 0) {
    throw BadMagicError(path, 0, "bad magic " + detail::show_bytes(magic, 4) + ", expected \"CPR1\"");
  }
  Checkpoint ckpt;
  ckpt.version = in.get<std::uint32_t>("version");
  if (ckpt.version != kCheckpointVersion) {
    throw VersionError(path, 4, "unsupported version " + std::to_string(ckpt.version) +
                                    ", expected " + std::to_string(kCheckpointVersion));
  }
  ckpt.config_json = in.get_string("config_json");
  const auto count = in.get<std::uint32_t>("tensor count");
  for (std::uint32_t t = 0; t < count; ++t) {
    const std::size_t at = in.pos();
    const std::string name = in.get_string("tensor name");
    const auto trainable = in.get<std::uint8_t>("trainable flag");
    if (trainable > 1) {
      throw CorruptHeaderError(path, in.pos() - 1, "tensor '" + name + "': bad trainable flag");
    }
    const auto rank = in.get<std::uint32_t>("tensor rank");
    if (rank > kMaxRank) {
      throw CorruptHeaderError(path, in.pos() - 4,
                               "tensor '" + name + "': rank " + std::to_string(rank));
    }
    core::Shape shape;
    std::size_t numel = 1;
    for (std::uint32_t r = 0; r < rank; ++r) {
      shape.push_back(in.get<std::uint32_t>("tensor dims"));
      numel *= shape.back();
    }
    in.need(numel * sizeof(float), "tensor data");
    core::Tensor<float> value(shape);
    in.get_bytes(value.data(), numel * sizeof(float), "tensor data");
    if (ckpt.params.contains(name)) {
      throw CorruptHeaderError(path, at, "duplicate tensor '" + name + "'");
    }
    ckpt.params.add(name, std::move(value), trainable == 1);
  }
  ckpt.rng_state = in.get_string("rng_state");
  ckpt.step = in.get<std::uint64_t>("step");
  if (in.pos() != in.size()) {
    throw CorruptHeaderError(path, in.pos(), std::to_string(in.size() - in.pos()) +
                                                 " trailing bytes after the step counter");
  }
  return ckpt;
}

void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
  detail::write_file(path, encode_checkpoint(ckpt));
}

Checkpoint load_checkpoint(const std::string& path) {
  return decode_checkpoint(detail::read_file(path), path);
}

void verify_params(const core::ParamSet<float>& expected, const core::ParamSet<float>& actual) {
  std::string missing, extra;
  for (const auto& name : expected.names()) {
    if (!actual.contains(name)) missing += (missing.empty() ? "" : ", ") + name;
  }
  for (const auto& name : actual.names()) {
    if (!expected.contains(name)) extra += (extra.empty() ? "" : ", ") + name;
  }
  if (!missing.empty() || !extra.empty()) {
    throw CheckpointMismatchError("checkpoint parameters differ from the config: missing [" +
                                  missing + "], extra [" + extra + "]");
  }
  for (const auto& name : expected.names()) {
    if (expected.at(name).shape() != actual.at(name).shape()) {
      throw CheckpointMismatchError("shape mismatch for '" + name + "': config implies " +
                                    core::shape_str(expected.at(name).shape()) +
                                    ", checkpoint has " + core::shape_str(actual.at(name).shape()));
    }
  }
}

}  // namespace cpr::data
