#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace fusionbiopsy {

enum class ErrorCode {
  // manifest / config
  MissingField,
  UnresolvablePath,
  DuplicateRecord,
  InvalidEnum,
  InvalidConfig,
  // data
  ParseError,
  InvalidImage,
  NotSquare,
  ShapeMismatch,
  OutOfRangeProbability,
  DuplicateKey,
  MissingChannel,
  MissingExternalImage,
  UndefinedMax,
  EmptyTrainingSet,
  SingleClassTrainingSet,
  EmptyValidation,
  UntrainedScorer,
  TooFewPatients,
  LengthMismatch,
  Empty,
  // anything else
  Internal,
};

enum class ErrorCategory { Config, Data, Internal };

std::string_view to_string(ErrorCode code);
ErrorCategory category_of(ErrorCode code);

/// Process exit code for a failure category: 2 config, 3 data, 4 internal.
int exit_code_for(ErrorCategory category);

/// The single exception type thrown by the library. `code()` is stable and
/// machine-readable; `what()` carries the human detail.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }
  ErrorCategory category() const noexcept { return category_of(code_); }

 private:
  ErrorCode code_;
};

}  // namespace fusionbiopsy
