#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace uc2 {

enum class ErrorCode {
  kInvalidConfig,
  kValidation,
  kShape,
  kOutOfVocabulary,
  kEmptyCodebook,
  kUndefinedEntropy,
  kDegenerateSimilarity,
  kEmptySequence,
  kIo,
  kBadMagic,
  kBadVersion,
  kTruncated,
  kNonFinitePayload,
  kDivergence,
};

std::string_view error_code_name(ErrorCode code) noexcept;

// Process exit status for the CLI: 1 usage/config, 2 I/O or format, 3 numeric.
int exit_status_for(ErrorCode code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& message) {
  throw Error(code, message);
}

}  // namespace uc2
