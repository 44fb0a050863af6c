#include "fusionbiopsy/error.hpp"

namespace fusionbiopsy {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::MissingField: return "MissingField";
    case ErrorCode::UnresolvablePath: return "UnresolvablePath";
    case ErrorCode::DuplicateRecord: return "DuplicateRecord";
    case ErrorCode::InvalidEnum: return "InvalidEnum";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::InvalidImage: return "InvalidImage";
    case ErrorCode::NotSquare: return "NotSquare";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::OutOfRangeProbability: return "OutOfRangeProbability";
    case ErrorCode::DuplicateKey: return "DuplicateKey";
    case ErrorCode::MissingChannel: return "MissingChannel";
    case ErrorCode::MissingExternalImage: return "MissingExternalImage";
    case ErrorCode::UndefinedMax: return "UndefinedMax";
    case ErrorCode::EmptyTrainingSet: return "EmptyTrainingSet";
    case ErrorCode::SingleClassTrainingSet: return "SingleClassTrainingSet";
    case ErrorCode::EmptyValidation: return "EmptyValidation";
    case ErrorCode::UntrainedScorer: return "UntrainedScorer";
    case ErrorCode::TooFewPatients: return "TooFewPatients";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::Empty: return "Empty";
    case ErrorCode::Internal: return "Internal";
  }
  return "Internal";
}

ErrorCategory category_of(ErrorCode code) {
  switch (code) {
    case ErrorCode::MissingField:
    case ErrorCode::UnresolvablePath:
    case ErrorCode::DuplicateRecord:
    case ErrorCode::InvalidEnum:
    case ErrorCode::InvalidConfig:
      return ErrorCategory::Config;
    case ErrorCode::Internal:
      return ErrorCategory::Internal;
    default:
      return ErrorCategory::Data;
  }
}

int exit_code_for(ErrorCategory category) {
  switch (category) {
    case ErrorCategory::Config: return 2;
    case ErrorCategory::Data: return 3;
    case ErrorCategory::Internal: return 4;
  }
  return 4;
}

}  // namespace fusionbiopsy
