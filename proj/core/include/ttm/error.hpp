#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace ttm {

enum class Errc {
  UnknownMember,
  InvalidArgument,
  OutOfRange,
  EmptyToken,
  DimensionMismatch,
  WeightsMissing,
  OddDim,
  ShapeMismatch,
  NonFiniteWeights,
  EmptyDataset,
  ChecksumMismatch,
  VersionMismatch,
  Io,
  NoOpenElection,
  ConfigInvalid,
  CorruptLog,
  MalformedEnvelope,
  NotJoined,
  RoomFull,
};

std::string_view to_string(Errc code) noexcept;

/// Every failure raised by the library carries one of the codes above so
/// callers (CLI exit codes, wire rejects) can branch without string matching.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  [[nodiscard]] Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace ttm
