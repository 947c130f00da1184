#pragma once

#include <stdexcept>
#include <string>

namespace omm {

// Every failure the library reports carries one of these codes. The CLI maps
// the code's category onto its exit status.
enum class ErrorCode {
  // configuration
  InvalidConfig,
  // data
  MissingColumn,
  NaNInRetainedColumn,
  NonUniformTimestamps,
  UnknownChannel,
  AllSentinel,
  SchemaMismatch,
  TooShort,
  EmptySample,
  ConstantChannel,
  ConstantActual,
  TooFewExperiments,
  DimensionMismatch,
  VersionMismatch,
  CorruptFile,
  IoError,
  UnsupportedWord,
  MalformedNumber,
  ZeroFeedMove,
  InsufficientPulseLengthDiversity,
  GridMismatch,
  // numeric
  InsufficientPairs,
  EmptySurvivorSet,
};

enum class ErrorCategory { Config, Data, Numeric };

constexpr ErrorCategory category_of(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidConfig:
      return ErrorCategory::Config;
    case ErrorCode::InsufficientPairs:
    case ErrorCode::EmptySurvivorSet:
      return ErrorCategory::Numeric;
    default:
      return ErrorCategory::Data;
  }
}

const char* to_string(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code), detail_(what) {}

  ErrorCode code() const noexcept { return code_; }
  ErrorCategory category() const noexcept { return category_of(code_); }
  const std::string& detail() const noexcept { return detail_; }

  // Same code, message prefixed with where it happened.
  Error in_context(const std::string& where) const { return Error(code_, where + ": " + detail_); }

 private:
  ErrorCode code_;
  std::string detail_;
};

}  // namespace omm
