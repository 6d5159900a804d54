#include "cpr/data/sequence.hpp"

#include <filesystem>

#include "binary.hpp"

namespace cpr::data {

using detail::Reader;

namespace {

constexpr char kMagic[4] = {'P', 'C', 'S', 'Q'};

SequenceHeader parse_header(Reader& in) {
  char magic[4];
  in.get_bytes(magic, 4, "magic");
  if (std::memcmp(magic, kMagic, 4) != 0) {
    throw BadMagicError(in.path(), 0,
                        "bad magic " + detail::show_bytes(magic, 4) + ", expected \"PCSQ\"");
  }
  const auto version = in.get<std::uint32_t>("version");
  if (version != kPcsqVersion) {
    throw VersionError(in.path(), 4, "unsupported version " + std::to_string(version) +
                                         ", expected " + std::to_string(kPcsqVersion));
  }
  SequenceHeader h;
  h.T = in.get<std::uint32_t>("T");
  h.N = in.get<std::uint32_t>("N");
  const auto has_label = in.get<std::uint8_t>("has_label");
  const auto label = in.get<std::int32_t>("label");
  if (has_label > 1) {
    throw CorruptHeaderError(in.path(), 16,
                             "has_label must be 0 or 1, got " + std::to_string(has_label));
  }
  if (h.T == 0 || h.N == 0) {
    throw CorruptHeaderError(in.path(), h.T == 0 ? 8 : 12, "empty sequence (T = " +
                                                               std::to_string(h.T) + ", N = " +
                                                               std::to_string(h.N) + ")");
  }
  if (has_label) h.label = label;
  return h;
}

}  // namespace

void save_sequence(const PointCloudSequence& seq, const std::string& path) {
  if (seq.frames.rank() != 3 || seq.frames.dim(2) != 3) {
    throw ShapeError("save_sequence: frames must be (T, N, 3), got " +
                     core::shape_str(seq.frames.shape()));
  }
  detail::Writer out;
  out.put_bytes(kMagic, 4);
  out.put<std::uint32_t>(kPcsqVersion);
  out.put<std::uint32_t>(static_cast<std::uint32_t>(seq.length()));
  out.put<std::uint32_t>(static_cast<std::uint32_t>(seq.points()));
  out.put<std::uint8_t>(seq.label ? 1 : 0);
  out.put<std::int32_t>(seq.label.value_or(0));
  out.put_bytes(seq.frames.data(), seq.frames.size() * sizeof(float));
  detail::write_file(path, out.bytes());
}

SequenceHeader read_sequence_header(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot open " + path);
  std::vector<char> head(kPcsqHeaderBytes);
  f.read(head.data(), static_cast<std::streamsize>(head.size()));
  head.resize(static_cast<std::size_t>(f.gcount()));
  Reader in(path, std::move(head));
  return parse_header(in);
}

PointCloudSequence load_sequence(const std::string& path) {
  Reader in(path, detail::read_file(path));
  const auto h = parse_header(in);
  const std::size_t count = std::size_t(h.T) * h.N * 3;
  const std::size_t expected = kPcsqHeaderBytes + count * sizeof(float);
  if (in.size() < expected) {
    throw TruncatedError(path, in.size(),
                         "truncated payload: expected " + std::to_string(expected) +
                             " bytes, file has " + std::to_string(in.size()));
  }
  if (in.size() > expected) {
    throw CorruptHeaderError(path, expected,
                             "trailing bytes: header implies " + std::to_string(expected) +
                                 " bytes, file has " + std::to_string(in.size()));
  }
  PointCloudSequence seq;
  seq.frames = core::Tensor<float>({h.T, h.N, 3});
  in.get_bytes(seq.frames.data(), count * sizeof(float), "payload");
  seq.label = h.label;
  seq.source_id = std::filesystem::path(path).stem().string();
  return seq;
}

}  // namespace cpr::data
