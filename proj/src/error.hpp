#pragma once

#include <stdexcept>
#include <string>

namespace pnest {

enum class ErrorCode {
  MissingColumn,
  NonNumericCovariate,
  InvariantViolation,
  EmptySubset,
  OneClassResponse,
  SeparationDetected,
  SingularInformation,
  RankDeficient,
  DimensionMismatch,
  NoTargetRows,
  NoTrialRows,
  OnePartOnly,
  PositivityViolation,
  StackInconsistent,
  SingularBread,
  TooManyFailedReplicates,
  TooManyFailedRuns,
  IoError,
};

inline const char* code_name(ErrorCode c) {
  switch (c) {
    case ErrorCode::MissingColumn: return "MissingColumn";
    case ErrorCode::NonNumericCovariate: return "NonNumericCovariate";
    case ErrorCode::InvariantViolation: return "InvariantViolation";
    case ErrorCode::EmptySubset: return "EmptySubset";
    case ErrorCode::OneClassResponse: return "OneClassResponse";
    case ErrorCode::SeparationDetected: return "SeparationDetected";
    case ErrorCode::SingularInformation: return "SingularInformation";
    case ErrorCode::RankDeficient: return "RankDeficient";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::NoTargetRows: return "NoTargetRows";
    case ErrorCode::NoTrialRows: return "NoTrialRows";
    case ErrorCode::OnePartOnly: return "OnePartOnly";
    case ErrorCode::PositivityViolation: return "PositivityViolation";
    case ErrorCode::StackInconsistent: return "StackInconsistent";
    case ErrorCode::SingularBread: return "SingularBread";
    case ErrorCode::TooManyFailedReplicates: return "TooManyFailedReplicates";
    case ErrorCode::TooManyFailedRuns: return "TooManyFailedRuns";
    case ErrorCode::IoError: return "IoError";
  }
  return "UnknownError";
}

// Errors raised while reading or validating input, as opposed to errors
// raised while fitting or resampling. The CLI maps the two classes to
// different exit codes.
inline bool is_validation_error(ErrorCode c) {
  switch (c) {
    case ErrorCode::MissingColumn:
    case ErrorCode::NonNumericCovariate:
    case ErrorCode::InvariantViolation:
    case ErrorCode::EmptySubset:
    case ErrorCode::DimensionMismatch:
    case ErrorCode::IoError:
      return true;
    default:
      return false;
  }
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(code_name(code)) + ": " + message),
        code_(code),
        message_(message) {}
  ErrorCode code() const { return code_; }
  // message without the leading code name, for re-annotation
  const std::string& detail() const { return message_; }

 private:
  ErrorCode code_;
  std::string message_;
};

}  // namespace pnest
