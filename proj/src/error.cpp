#include "dmduq/error.hpp"

namespace dmduq {

std::string_view error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument: return "InvalidArgument";
    case ErrorCode::kDimensionMismatch: return "DimensionMismatch";
    case ErrorCode::kNotSymmetric: return "NotSymmetric";
    case ErrorCode::kNotPositiveDefinite: return "NotPositiveDefinite";
    case ErrorCode::kConvergenceFailure: return "ConvergenceFailure";
    case ErrorCode::kCountOutOfRange: return "CountOutOfRange";
    case ErrorCode::kTooFewSnapshots: return "TooFewSnapshots";
    case ErrorCode::kNonUniformSampling: return "NonUniformSampling";
    case ErrorCode::kEmptyWindow: return "EmptyWindow";
    case ErrorCode::kZeroVariance: return "ZeroVariance";
    case ErrorCode::kParseError: return "ParseError";
    case ErrorCode::kHeaderMismatch: return "HeaderMismatch";
    case ErrorCode::kIoError: return "IoError";
    case ErrorCode::kSingularV: return "SingularV";
    case ErrorCode::kSingularGram: return "SingularGram";
    case ErrorCode::kQuadratureNotConverged: return "QuadratureNotConverged";
    case ErrorCode::kNegativeVarianceInput: return "NegativeVarianceInput";
    case ErrorCode::kTooManyFailedTrials: return "TooManyFailedTrials";
    case ErrorCode::kTooFewSamples: return "TooFewSamples";
    case ErrorCode::kDegenerateData: return "DegenerateData";
    case ErrorCode::kShapeMismatch: return "ShapeMismatch";
    case ErrorCode::kZeroNormCosine: return "ZeroNormCosine";
    case ErrorCode::kConstantInput: return "ConstantInput";
    case ErrorCode::kUnstableStep: return "UnstableStep";
    case ErrorCode::kConfigError: return "ConfigError";
    case ErrorCode::kSchemaVersion: return "SchemaVersion";
  }
  return "Unknown";
}

int error_exit_status(ErrorCode code) {
  // 1 is reserved for unexpected failures, 2 for usage errors.
  return 10 + static_cast<int>(code);
}

}  // namespace dmduq
