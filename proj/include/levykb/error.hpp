#pragma once

#include <stdexcept>
#include <string>

namespace levykb {

// Numeric values are part of the C ABI (see levykb.h); append only.
enum class ErrorCode : int {
  Ok = 0,
  InvalidParameters = 1,
  FiniteActivity = 2,
  QuadratureFailure = 3,
  MonotonicityViolation = 4,
  ConditionAViolated = 5,
  FloorViolated = 6,
  BracketFailure = 7,
  TruncationUnreachable = 8,
  TruncationInsufficient = 9,
  MaxOnBoundary = 10,
  NoFiniteConstants = 11,
  PreconditionFailed = 12,
  DeltaTooCoarse = 13,
  GridCoverageInsufficient = 14,
  IoError = 15,
  Internal = 16,
};

const char* to_string(ErrorCode code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what),
        code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace levykb
