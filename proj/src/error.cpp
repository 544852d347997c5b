#include "uc2/error.hpp"

namespace uc2 {

std::string_view error_code_name(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::kInvalidConfig: return "invalid_config";
    case ErrorCode::kValidation: return "validation";
    case ErrorCode::kShape: return "shape";
    case ErrorCode::kOutOfVocabulary: return "out_of_vocabulary";
    case ErrorCode::kEmptyCodebook: return "empty_codebook";
    case ErrorCode::kUndefinedEntropy: return "undefined_entropy";
    case ErrorCode::kDegenerateSimilarity: return "degenerate_similarity";
    case ErrorCode::kEmptySequence: return "empty_sequence";
    case ErrorCode::kIo: return "io";
    case ErrorCode::kBadMagic: return "bad_magic";
    case ErrorCode::kBadVersion: return "bad_version";
    case ErrorCode::kTruncated: return "truncated";
    case ErrorCode::kNonFinitePayload: return "non_finite_payload";
    case ErrorCode::kDivergence: return "divergence";
  }
  return "unknown";
}

int exit_status_for(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::kIo:
    case ErrorCode::kBadMagic:
    case ErrorCode::kBadVersion:
    case ErrorCode::kTruncated:
    case ErrorCode::kNonFinitePayload:
      return 2;
    case ErrorCode::kDivergence:
    case ErrorCode::kUndefinedEntropy:
    case ErrorCode::kDegenerateSimilarity:
      return 3;
    default:
      return 1;
  }
}

}  // namespace uc2
