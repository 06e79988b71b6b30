#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace timedit {

// Every failure the library can report, used both for typed catch sites and
// for mapping to process exit codes in the CLI.
enum class ErrorCode {
  // tensor container
  MalformedHeader,
  OverlappingOffsets,
  ShapeSizeMismatch,
  UnsupportedDtype,
  NotFound,
  NotAMatrix,
  NonFiniteValue,
  // linear algebra
  NotPositiveDefinite,
  NotSymmetric,
  DimensionMismatch,
  InvalidLambda,
  // edit engine
  DestinationTooShort,
  MixedDimensions,
  EmptyModel,
  LambdaMismatch,
  // simulator / metrics
  ZeroVector,
  Empty,
  MissingKind,
  SeedCountMismatch,
  // calibration
  OutOfRange,
  InvalidBracket,
  OracleFailure,
  // optimizer
  Diverged,
  // io / requests
  IoError,
  BadRequest,
};

std::string_view error_code_name(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(error_code_name(code)) + ": " + message),
        code_(code) {}

  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& message) {
  throw Error(code, message);
}

}  // namespace timedit
