#pragma once

#include <cstdint>
#include <string>

#include "cpr/core/error.hpp"

namespace cpr::data {

/// A file error located at a byte offset.
class FileError : public DataError {
 public:
  FileError(const std::string& path, std::uint64_t offset, const std::string& what)
      : DataError(path + " @" + std::to_string(offset) + ": " + what), offset_(offset) {}
  std::uint64_t offset() const { return offset_; }

 private:
  std::uint64_t offset_;
};

/// Leading magic bytes do not match the format.
class BadMagicError : public FileError {
 public:
  using FileError::FileError;
};

/// The file ends before the header or payload does.
class TruncatedError : public FileError {
 public:
  using FileError::FileError;
};

/// Known magic, unsupported format version.
class VersionError : public FileError {
 public:
  using FileError::FileError;
};

/// Header fields that cannot describe a valid payload.
class CorruptHeaderError : public FileError {
 public:
  using FileError::FileError;
};

/// Checkpoint tensors disagree with the parameters a config implies.
class CheckpointMismatchError : public DataError {
 public:
  using DataError::DataError;
};

/// Manifest construction errors (duplicate paths, unreadable directory).
class ManifestError : public DataError {
 public:
  using DataError::DataError;
};

}  // namespace cpr::data
