#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace sbt {

enum class ErrorCode {
  InvalidArgument,
  Io,
  MissingColumn,
  BadDate,
  TransportError,
  ParseError,
  EmptyName,
  EmptyGroup,
  UnevenRaters,
  TooFewRaters,
  EmptyCorpus,
  NoTokens,
  DimensionMismatch,
  SingleClass,
  NonNegativeRequired,
  NonConvergence,
  TooManyClusters,
  LengthMismatch,
  TooManyFolds,
  ClassTooSmall,
  BadMagic,
  VersionUnsupported,
  Truncated,
  MissingPrice,
  InsufficientData,
  EmptyReport,
};

std::string_view to_string(ErrorCode code);

// All library failures are reported through this type; `code()` lets callers
// (and the CLI exit-code mapping) dispatch without parsing messages.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code), message_(message) {}

  ErrorCode code() const noexcept { return code_; }
  // The message without the error-code prefix.
  const std::string& message() const noexcept { return message_; }

 private:
  ErrorCode code_;
  std::string message_;
};

}  // namespace sbt
