#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace copaug {

using Eigen::Index;
using VectorXd = Eigen::VectorXd;
using MatrixXd = Eigen::MatrixXd;
using ArrayXXb = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>;
using IndexList = std::vector<Index>;

enum class ErrorCode {
  MissingColumn,
  EmptyFile,
  MalformedRow,
  AllRowsDropped,
  AllMissingColumn,
  TooFewRows,
  DegreeTooLarge,
  NonFiniteInput,
  NotFitted,
  SchemaMismatch,
  EmptyInput,
  DimensionMismatch,
  SingularSystem,
  BadK,
  LengthMismatch,
  EmptySample,
  IoError,
  InvalidConfig,
  InvalidArgument,
};

const char* to_string(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code), detail_(what) {}

  ErrorCode code() const noexcept { return code_; }
  const std::string& detail() const noexcept { return detail_; }

  /// Same error with `context` prefixed to the detail.
  Error annotated(const std::string& context) const { return Error(code_, context + ": " + detail_); }

 private:
  ErrorCode code_;
  std::string detail_;
};

/// Deterministic generator. Every conversion from raw 64-bit draws is done
/// here rather than through <random> distributions, so that a seed yields the
/// same stream on every standard library.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }

  /// Uniform on the open interval (0, 1).
  double uniform() { return (static_cast<double>(engine_() >> 11) + 0.5) * 0x1.0p-53; }

  /// Uniform integer in [0, bound).
  std::uint64_t below(std::uint64_t bound);

  double normal();

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::swap(v[i - 1], v[below(i)]);
    }
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace copaug
