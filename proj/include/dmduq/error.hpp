#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace dmduq {

// Stable error identifiers. The string form (error_code_name) is part of the
// CLI contract and must not change once released.
enum class ErrorCode {
  kInvalidArgument,
  kDimensionMismatch,
  kNotSymmetric,
  kNotPositiveDefinite,
  kConvergenceFailure,
  kCountOutOfRange,
  kTooFewSnapshots,
  kNonUniformSampling,
  kEmptyWindow,
  kZeroVariance,
  kParseError,
  kHeaderMismatch,
  kIoError,
  kSingularV,
  kSingularGram,
  kQuadratureNotConverged,
  kNegativeVarianceInput,
  kTooManyFailedTrials,
  kTooFewSamples,
  kDegenerateData,
  kShapeMismatch,
  kZeroNormCosine,
  kConstantInput,
  kUnstableStep,
  kConfigError,
  kSchemaVersion,
};

std::string_view error_code_name(ErrorCode code);

// Process exit status used by the CLI for a given error code. Always nonzero.
int error_exit_status(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }
  std::string_view code_name() const { return error_code_name(code_); }

 private:
  ErrorCode code_;
};

}  // namespace dmduq
