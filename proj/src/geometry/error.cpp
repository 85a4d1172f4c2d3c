#include "h2r/error.hpp"

namespace h2r {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::SingularMatrix: return "SingularMatrix";
    case ErrorCode::InvalidRotation: return "InvalidRotation";
    case ErrorCode::CollinearAnchors: return "CollinearAnchors";
    case ErrorCode::AnchorsNotPerpendicular: return "AnchorsNotPerpendicular";
    case ErrorCode::ScaleMismatch: return "ScaleMismatch";
    case ErrorCode::NonMonotonicTimestamp: return "NonMonotonicTimestamp";
    case ErrorCode::MissingKeypoint: return "MissingKeypoint";
    case ErrorCode::BadConfig: return "BadConfig";
    case ErrorCode::NotCalibrated: return "NotCalibrated";
    case ErrorCode::SchedulerStopped: return "SchedulerStopped";
    case ErrorCode::UnknownTicket: return "UnknownTicket";
    case ErrorCode::ReplayExhausted: return "ReplayExhausted";
    case ErrorCode::CorruptEpisode: return "CorruptEpisode";
    case ErrorCode::InvariantViolation: return "InvariantViolation";
    case ErrorCode::IoFailure: return "IoFailure";
    case ErrorCode::SchemaVersionUnsupported: return "SchemaVersionUnsupported";
    case ErrorCode::MalformedLine: return "MalformedLine";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::EmptyInput: return "EmptyInput";
    case ErrorCode::DuplicateId: return "DuplicateId";
    case ErrorCode::BadN: return "BadN";
    case ErrorCode::EpisodeMissing: return "EpisodeMissing";
    case ErrorCode::ProtocolViolation: return "ProtocolViolation";
    case ErrorCode::BadMessage: return "BadMessage";
  }
  return "Unknown";
}

namespace {
std::string compose(ErrorCode code, const std::string& detail, std::optional<std::int64_t> index) {
  std::string what(to_string(code));
  if (index) what += "(" + std::to_string(*index) + ")";
  if (!detail.empty()) what += ": " + detail;
  return what;
}
}  // namespace

Error::Error(ErrorCode code, std::string detail, std::optional<std::int64_t> index)
    : std::runtime_error(compose(code, detail, index)),
      code_(code),
      detail_(std::move(detail)),
      index_(index) {}

}  // namespace h2r
