#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>

namespace optlab {

enum class ErrorCode {
  EmptyVector,
  NonFinite,
  LengthMismatch,
  InvalidHyperParams,
  MissingClipGamma,
  NonFiniteIterate,
  NonPositiveCurvature,
  SpecViolation,
  ZeroDisplacement,
  NoCoordinateMoved,
  DegenerateDesign,
  InvalidBeta2,
  DivisionByZero,
  InvalidRegime,
  RadiusExceeded,
  WrongMethod,
  NoSecondDerivative,
  ParseError,
  MissingField,
  ConflictingFields,
  BadAxis,
  Io,
};

constexpr std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::EmptyVector: return "EmptyVector";
    case ErrorCode::NonFinite: return "NonFinite";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::InvalidHyperParams: return "InvalidHyperParams";
    case ErrorCode::MissingClipGamma: return "MissingClipGamma";
    case ErrorCode::NonFiniteIterate: return "NonFiniteIterate";
    case ErrorCode::NonPositiveCurvature: return "NonPositiveCurvature";
    case ErrorCode::SpecViolation: return "SpecViolation";
    case ErrorCode::ZeroDisplacement: return "ZeroDisplacement";
    case ErrorCode::NoCoordinateMoved: return "NoCoordinateMoved";
    case ErrorCode::DegenerateDesign: return "DegenerateDesign";
    case ErrorCode::InvalidBeta2: return "InvalidBeta2";
    case ErrorCode::DivisionByZero: return "DivisionByZero";
    case ErrorCode::InvalidRegime: return "InvalidRegime";
    case ErrorCode::RadiusExceeded: return "RadiusExceeded";
    case ErrorCode::WrongMethod: return "WrongMethod";
    case ErrorCode::NoSecondDerivative: return "NoSecondDerivative";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::MissingField: return "MissingField";
    case ErrorCode::ConflictingFields: return "ConflictingFields";
    case ErrorCode::BadAxis: return "BadAxis";
    case ErrorCode::Io: return "Io";
  }
  return "Unknown";
}

/// Every failure raised by the library. `code()` identifies the condition;
/// `what()` carries a human-readable message prefixed with the code name.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

/// Raised when an optimizer produces a non-finite iterate; `step()` is the
/// 1-based index of the offending step.
class NonFiniteIterateError : public Error {
 public:
  explicit NonFiniteIterateError(std::size_t step)
      : Error(ErrorCode::NonFiniteIterate, "non-finite iterate at step " + std::to_string(step)),
        step_(step) {}

  std::size_t step() const noexcept { return step_; }

 private:
  std::size_t step_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& message) {
  throw Error(code, message);
}

}  // namespace optlab
