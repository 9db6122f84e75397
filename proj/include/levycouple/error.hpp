#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace levycouple {

enum class ErrorCode {
  InvalidArgument,
  ParseError,
  DimensionMismatch,
  IncompatibleGrids,
  SnapError,
  BudgetExceeded,
  ZeroDisplacement,
  DensityRotationUnsupported,
  EmptyTruncation,
  ZeroMass,
  DegenerateOverlap,
  CriterionFailed,
  InsufficientData,
};

constexpr std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::IncompatibleGrids: return "IncompatibleGrids";
    case ErrorCode::SnapError: return "SnapError";
    case ErrorCode::BudgetExceeded: return "BudgetExceeded";
    case ErrorCode::ZeroDisplacement: return "ZeroDisplacement";
    case ErrorCode::DensityRotationUnsupported: return "DensityRotationUnsupported";
    case ErrorCode::EmptyTruncation: return "EmptyTruncation";
    case ErrorCode::ZeroMass: return "ZeroMass";
    case ErrorCode::DegenerateOverlap: return "DegenerateOverlap";
    case ErrorCode::CriterionFailed: return "CriterionFailed";
    case ErrorCode::InsufficientData: return "InsufficientData";
  }
  return "Unknown";
}

/// Every failure raised by the library carries one of the codes above; the
/// CLI maps codes onto process exit statuses.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

/// Raised when a convolution result would exceed the atom/cell budget.
/// `achieved` is the largest power (or index) that was completed.
class BudgetError : public Error {
 public:
  BudgetError(std::size_t achieved, const std::string& what)
      : Error(ErrorCode::BudgetExceeded, what), achieved_(achieved) {}

  std::size_t achieved() const noexcept { return achieved_; }

 private:
  std::size_t achieved_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) { throw Error(code, what); }

inline void require(bool cond, ErrorCode code, const std::string& what) {
  if (!cond) fail(code, what);
}

}  // namespace levycouple
