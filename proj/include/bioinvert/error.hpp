#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace bioinvert {

enum class ErrorCode {
  InvalidArgument,
  NotFound,
  Conflict,
  SchemaError,
  ConflictingEnvironment,
  EmptyDocument,
  ClassifierUnavailable,
  InsufficientCorpus,
  MaxRoundsExceeded,
  AuthError,
  RateLimited,
  SchemaRejected,
  TransportError,
  KbEmpty,
  MissingDimension,
  NotAVerb,
  MissingVerdict,
  BadRatio,
  LengthMismatch,
  NoDiscrimination,
  NoAlternatives,
  MissingManualScore,
  KOutOfRange,
  StageOrderViolation,
  IoError,
  VersionMismatch,
  BindError,
  Cancelled,
};

std::string_view to_string(ErrorCode code);

// Every failure carries a stable machine-readable code and, where it makes
// sense, a JSON-pointer-like path to the offending element.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, std::string message, std::string path = {})
      : std::runtime_error(std::move(message)), code_(code), path_(std::move(path)) {}

  ErrorCode code() const noexcept { return code_; }
  const std::string& path() const noexcept { return path_; }

 private:
  ErrorCode code_;
  std::string path_;
};

}  // namespace bioinvert
