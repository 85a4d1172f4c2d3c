#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace h2r {

enum class ErrorCode {
  SingularMatrix,
  InvalidRotation,
  CollinearAnchors,
  AnchorsNotPerpendicular,
  ScaleMismatch,
  NonMonotonicTimestamp,
  MissingKeypoint,
  BadConfig,
  NotCalibrated,
  SchedulerStopped,
  UnknownTicket,
  ReplayExhausted,
  CorruptEpisode,
  InvariantViolation,
  IoFailure,
  SchemaVersionUnsupported,
  MalformedLine,
  DimensionMismatch,
  EmptyInput,
  DuplicateId,
  BadN,
  EpisodeMissing,
  ProtocolViolation,
  BadMessage,
};

std::string_view to_string(ErrorCode code);

// Every failure surfaced by the library carries a code that is stable across
// the CLI and wire protocol. `index` is the record index or 1-based line number
// for positional errors.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, std::string detail, std::optional<std::int64_t> index = std::nullopt);

  ErrorCode code() const noexcept { return code_; }
  const std::string& detail() const noexcept { return detail_; }
  std::optional<std::int64_t> index() const noexcept { return index_; }

 private:
  ErrorCode code_;
  std::string detail_;
  std::optional<std::int64_t> index_;
};

}  // namespace h2r
