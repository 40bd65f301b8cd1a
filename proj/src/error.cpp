#include "mmicap/error.hpp"

namespace mmicap {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::NotSymmetric: return "NotSymmetric";
    case ErrorCode::NotPositiveDefinite: return "NotPositiveDefinite";
    case ErrorCode::NonPositiveEigenvalue: return "NonPositiveEigenvalue";
    case ErrorCode::IndexOutOfRange: return "IndexOutOfRange";
    case ErrorCode::NegativeBudget: return "NegativeBudget";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::TargetUnreachable: return "TargetUnreachable";
    case ErrorCode::InfeasibleFactorization: return "InfeasibleFactorization";
    case ErrorCode::DeltaOutOfRange: return "DeltaOutOfRange";
    case ErrorCode::NumericalUnderflow: return "NumericalUnderflow";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::ParseError: return "ParseError";
  }
  return "Unknown";
}

}  // namespace mmicap
