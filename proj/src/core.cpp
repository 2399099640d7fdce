#include "copaug/core.hpp"

#include "copaug/distributions.hpp"

namespace copaug {

const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::MissingColumn: return "MissingColumn";
    case ErrorCode::EmptyFile: return "EmptyFile";
    case ErrorCode::MalformedRow: return "MalformedRow";
    case ErrorCode::AllRowsDropped: return "AllRowsDropped";
    case ErrorCode::AllMissingColumn: return "AllMissingColumn";
    case ErrorCode::TooFewRows: return "TooFewRows";
    case ErrorCode::DegreeTooLarge: return "DegreeTooLarge";
    case ErrorCode::NonFiniteInput: return "NonFiniteInput";
    case ErrorCode::NotFitted: return "NotFitted";
    case ErrorCode::SchemaMismatch: return "SchemaMismatch";
    case ErrorCode::EmptyInput: return "EmptyInput";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::SingularSystem: return "SingularSystem";
    case ErrorCode::BadK: return "BadK";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::EmptySample: return "EmptySample";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
  }
  return "Unknown";
}

std::uint64_t Rng::below(std::uint64_t bound) {
  if (bound == 0) throw Error(ErrorCode::InvalidArgument, "Rng::below(0)");
  // Rejection sampling on the top of the range keeps the draw unbiased.
  const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % bound);
  std::uint64_t x = engine_();
  while (x >= limit) x = engine_();
  return x % bound;
}

double Rng::normal() { return normal_quantile(uniform()); }

}  // namespace copaug
