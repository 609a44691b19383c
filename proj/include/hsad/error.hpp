#pragma once

#include <stdexcept>
#include <string>

namespace hsad {

enum class ErrorCode {
  kInvalidArgument,
  kInvariantViolation,
  kIo,
  kBadMagic,
  kUnsupportedVersion,
  kTruncated,
  kShapeMismatch,
  kParse,
  kMissingCapture,
  kMissingData,
  kSingleClass,
};

inline const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument: return "invalid argument";
    case ErrorCode::kInvariantViolation: return "invariant violation";
    case ErrorCode::kIo: return "i/o error";
    case ErrorCode::kBadMagic: return "bad magic";
    case ErrorCode::kUnsupportedVersion: return "unsupported version";
    case ErrorCode::kTruncated: return "truncated payload";
    case ErrorCode::kShapeMismatch: return "shape mismatch";
    case ErrorCode::kParse: return "parse error";
    case ErrorCode::kMissingCapture: return "observation point not captured";
    case ErrorCode::kMissingData: return "missing data";
    case ErrorCode::kSingleClass: return "single class";
  }
  return "unknown";
}

// All library failures are reported through this one exception type; the code
// lets callers (and tests) distinguish failure kinds without string matching.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) {
  throw Error(code, what);
}

inline void require(bool cond, ErrorCode code, const std::string& what) {
  if (!cond) fail(code, what);
}

}  // namespace hsad
