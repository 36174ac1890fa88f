#include "nestcov/error.hpp"

namespace nestcov {

std::string_view to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::InvalidArgument: return "InvalidArgument";
    case ErrorKind::NonPositiveVariance: return "NonPositiveVariance";
    case ErrorKind::GridTooSmall: return "GridTooSmall";
    case ErrorKind::NotPositiveDefinite: return "NotPositiveDefinite";
    case ErrorKind::SampleTooSmall: return "SampleTooSmall";
    case ErrorKind::ZeroVariance: return "ZeroVariance";
    case ErrorKind::NoBracket: return "NoBracket";
    case ErrorKind::NotConverged: return "NotConverged";
    case ErrorKind::InfeasibleParams: return "InfeasibleParams";
    case ErrorKind::InfeasibleInit: return "InfeasibleInit";
    case ErrorKind::SingularHessian: return "SingularHessian";
    case ErrorKind::SingularInformation: return "SingularInformation";
    case ErrorKind::DegenerateSample: return "DegenerateSample";
    case ErrorKind::FoldTooSmall: return "FoldTooSmall";
    case ErrorKind::ShapeMismatch: return "ShapeMismatch";
    case ErrorKind::EmptyInput: return "EmptyInput";
    case ErrorKind::EmptyTable: return "EmptyTable";
    case ErrorKind::ParseError: return "ParseError";
    case ErrorKind::ValidationError: return "ValidationError";
    case ErrorKind::IoError: return "IoError";
  }
  return "Unknown";
}

}  // namespace nestcov
