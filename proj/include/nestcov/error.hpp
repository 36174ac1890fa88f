#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace nestcov {

/// Failure categories. The CLI prints the category name as the first token
/// of its single-line error report, so names are part of the interface.
enum class ErrorKind {
  InvalidArgument,
  NonPositiveVariance,
  GridTooSmall,
  NotPositiveDefinite,
  SampleTooSmall,
  ZeroVariance,
  NoBracket,
  NotConverged,
  InfeasibleParams,
  InfeasibleInit,
  SingularHessian,
  SingularInformation,
  DegenerateSample,
  FoldTooSmall,
  ShapeMismatch,
  EmptyInput,
  EmptyTable,
  ParseError,
  ValidationError,
  IoError,
};

std::string_view to_string(ErrorKind kind) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& message) {
  throw Error(kind, message);
}

}  // namespace nestcov
