#include "timedit/errors.hpp"

namespace timedit {

std::string_view error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::MalformedHeader: return "MalformedHeader";
    case ErrorCode::OverlappingOffsets: return "OverlappingOffsets";
    case ErrorCode::ShapeSizeMismatch: return "ShapeSizeMismatch";
    case ErrorCode::UnsupportedDtype: return "UnsupportedDtype";
    case ErrorCode::NotFound: return "NotFound";
    case ErrorCode::NotAMatrix: return "NotAMatrix";
    case ErrorCode::NonFiniteValue: return "NonFiniteValue";
    case ErrorCode::NotPositiveDefinite: return "NotPositiveDefinite";
    case ErrorCode::NotSymmetric: return "NotSymmetric";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::InvalidLambda: return "InvalidLambda";
    case ErrorCode::DestinationTooShort: return "DestinationTooShort";
    case ErrorCode::MixedDimensions: return "MixedDimensions";
    case ErrorCode::EmptyModel: return "EmptyModel";
    case ErrorCode::LambdaMismatch: return "LambdaMismatch";
    case ErrorCode::ZeroVector: return "ZeroVector";
    case ErrorCode::Empty: return "Empty";
    case ErrorCode::MissingKind: return "MissingKind";
    case ErrorCode::SeedCountMismatch: return "SeedCountMismatch";
    case ErrorCode::OutOfRange: return "OutOfRange";
    case ErrorCode::InvalidBracket: return "InvalidBracket";
    case ErrorCode::OracleFailure: return "OracleFailure";
    case ErrorCode::Diverged: return "Diverged";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::BadRequest: return "BadRequest";
  }
  return "UnknownError";
}

}  // namespace timedit
