#ifndef SYMSFM_ERRORS_H_
#define SYMSFM_ERRORS_H_

#include <stdexcept>
#include <string>
#include <string_view>

namespace symsfm {

enum class ErrorCode {
  // Numerical degeneracies.
  kDegenerateShape,
  kRankDeficient,
  kAxisDegenerate,
  kSlopeCoincidence,
  kNegativeSquare,
  kYZSingular,
  kSymmetryAxisUnobservable,
  kTooFewImages,
  kDegenerateScale,
  kIllConditioned,
  kSingularAmbiguity,
  kSingularNormalMatrix,
  // Input and contract violations.
  kLengthMismatch,
  kNoVisiblePoints,
  kOccludedKeypoints,
  kConfigInvalid,
  kParseError,
  kSchemaVersionUnsupported,
  kMirrorViolation,
  kIoError,
};

std::string_view ErrorCodeName(ErrorCode code);

// True for errors that stem from degenerate geometry rather than bad input.
bool IsNumericalError(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(ErrorCodeName(code)) + ": " + message),
        code_(code) {}

  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace symsfm

#endif  // SYMSFM_ERRORS_H_
