#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace orthomatch {

enum class ErrorCode {
  DegenerateHomography,
  DegenerateConfiguration,
  InsufficientPoints,
  PointAtInfinity,
  InvalidArgument,
  EmptyROI,
  PatchOutOfBounds,
  FormatError,
  InvariantError,
  DimensionMismatch,
  InsufficientMatches,
  NoModelFound,
  DegenerateSample,
  DegeneratePoints,
  ConfigOutOfRange,
  ConfigError,
  EmptyInputDir,
  IOError,
  ManifestError,
};

constexpr std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::DegenerateHomography: return "DegenerateHomography";
    case ErrorCode::DegenerateConfiguration: return "DegenerateConfiguration";
    case ErrorCode::InsufficientPoints: return "InsufficientPoints";
    case ErrorCode::PointAtInfinity: return "PointAtInfinity";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::EmptyROI: return "EmptyROI";
    case ErrorCode::PatchOutOfBounds: return "PatchOutOfBounds";
    case ErrorCode::FormatError: return "FormatError";
    case ErrorCode::InvariantError: return "InvariantError";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::InsufficientMatches: return "InsufficientMatches";
    case ErrorCode::NoModelFound: return "NoModelFound";
    case ErrorCode::DegenerateSample: return "DegenerateSample";
    case ErrorCode::DegeneratePoints: return "DegeneratePoints";
    case ErrorCode::ConfigOutOfRange: return "ConfigOutOfRange";
    case ErrorCode::ConfigError: return "ConfigError";
    case ErrorCode::EmptyInputDir: return "EmptyInputDir";
    case ErrorCode::IOError: return "IOError";
    case ErrorCode::ManifestError: return "ManifestError";
  }
  return "Unknown";
}

/// Single exception type for the library; `code()` identifies the failure.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) { throw Error(code, what); }

}  // namespace orthomatch
