#include <sbt/error.hpp>

namespace sbt {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::Io: return "Io";
    case ErrorCode::MissingColumn: return "MissingColumn";
    case ErrorCode::BadDate: return "BadDate";
    case ErrorCode::TransportError: return "TransportError";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::EmptyName: return "EmptyName";
    case ErrorCode::EmptyGroup: return "EmptyGroup";
    case ErrorCode::UnevenRaters: return "UnevenRaters";
    case ErrorCode::TooFewRaters: return "TooFewRaters";
    case ErrorCode::EmptyCorpus: return "EmptyCorpus";
    case ErrorCode::NoTokens: return "NoTokens";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::SingleClass: return "SingleClass";
    case ErrorCode::NonNegativeRequired: return "NonNegativeRequired";
    case ErrorCode::NonConvergence: return "NonConvergence";
    case ErrorCode::TooManyClusters: return "TooManyClusters";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::TooManyFolds: return "TooManyFolds";
    case ErrorCode::ClassTooSmall: return "ClassTooSmall";
    case ErrorCode::BadMagic: return "BadMagic";
    case ErrorCode::VersionUnsupported: return "VersionUnsupported";
    case ErrorCode::Truncated: return "Truncated";
    case ErrorCode::MissingPrice: return "MissingPrice";
    case ErrorCode::InsufficientData: return "InsufficientData";
    case ErrorCode::EmptyReport: return "EmptyReport";
  }
  return "Unknown";
}

}  // namespace sbt
