#pragma once

#include <stdexcept>
#include <string>

namespace covcraft {

// Failure categories shared across the library. One enum so call sites and
// tests can match on the condition instead of parsing messages.
enum class ErrorCode {
  // ingestion / panel validation
  kIoError,
  kParseError,
  kMissingCell,
  kNonMonotonicDates,
  kTooFewAssets,
  kTooFewSamples,
  kWindowOutOfBounds,
  // numerical kernels
  kNotSymmetric,
  kNoConvergence,
  kNotPsd,
  // estimator / parameter validation
  kInvalidParams,
  kEmptyInput,
  kNotDemeaned,
  kDimensionMismatch,
  kRhoOutOfRange,
  kZeroVariance,
  kNegativeVariance,
  kInfeasibleReturn,
  kWindowTooSmall,
  kPanelTooShort,
  kInvalidSpec,
};

inline const char* error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::kIoError: return "IoError";
    case ErrorCode::kParseError: return "ParseError";
    case ErrorCode::kMissingCell: return "MissingCell";
    case ErrorCode::kNonMonotonicDates: return "NonMonotonicDates";
    case ErrorCode::kTooFewAssets: return "TooFewAssets";
    case ErrorCode::kTooFewSamples: return "TooFewSamples";
    case ErrorCode::kWindowOutOfBounds: return "WindowOutOfBounds";
    case ErrorCode::kNotSymmetric: return "NotSymmetric";
    case ErrorCode::kNoConvergence: return "NoConvergence";
    case ErrorCode::kNotPsd: return "NotPsd";
    case ErrorCode::kInvalidParams: return "InvalidParams";
    case ErrorCode::kEmptyInput: return "EmptyInput";
    case ErrorCode::kNotDemeaned: return "NotDemeaned";
    case ErrorCode::kDimensionMismatch: return "DimensionMismatch";
    case ErrorCode::kRhoOutOfRange: return "RhoOutOfRange";
    case ErrorCode::kZeroVariance: return "ZeroVariance";
    case ErrorCode::kNegativeVariance: return "NegativeVariance";
    case ErrorCode::kInfeasibleReturn: return "InfeasibleReturn";
    case ErrorCode::kWindowTooSmall: return "WindowTooSmall";
    case ErrorCode::kPanelTooShort: return "PanelTooShort";
    case ErrorCode::kInvalidSpec: return "InvalidSpec";
  }
  return "Unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(error_code_name(code)) + ": " + message),
        code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& message) {
  throw Error(code, message);
}

}  // namespace covcraft
