#pragma once

#include "copaug/core.hpp"
#include "copaug/data_model.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace copaug {

/// Empirical marginal with plotting positions rank/(n+1) and linear
/// interpolation between order statistics.
class EmpiricalMarginal {
 public:
  EmpiricalMarginal() = default;
  explicit EmpiricalMarginal(std::vector<double> values);

  Index size() const { return static_cast<Index>(sorted_.size()); }
  const std::vector<double>& sorted_values() const { return sorted_; }
  bool is_constant() const { return !sorted_.empty() && sorted_.front() == sorted_.back(); }
  double min() const { return sorted_.front(); }
  double max() const { return sorted_.back(); }

  /// Tied values share their average rank, so cdf is a function of x.
  double cdf(double x) const;

  /// Inverse of cdf on [1/(n+1), n/(n+1)]; clamps to min/max outside.
  double inverse_cdf(double u) const;

 private:
  std::vector<double> sorted_;
};

struct CopulaModel {
  static constexpr const char* kFormatTag = "copula-v1";

  std::vector<std::string> column_names;
  std::string target_name;
  std::vector<EmpiricalMarginal> marginals;
  MatrixXd corr;
  VectorXd clip_min;
  VectorXd clip_max;
  std::uint64_t seed = 0;

  bool fitted() const { return !marginals.empty(); }
  Index dims() const { return static_cast<Index>(marginals.size()); }
};

inline constexpr Index kMinCopulaRows = 10;

/// Projects a symmetric matrix onto the PSD cone with unit diagonal by
/// clipping eigenvalues at `floor`. Returns the input unchanged when it is
/// already PSD.
MatrixXd repair_correlation(const MatrixXd& raw, double floor = 1e-10);

/// Rank-based normal scores of one column.
VectorXd normal_scores(const Eigen::Ref<const VectorXd>& column);

CopulaModel fit_copula(const Table& train, std::uint64_t seed);

/// Latent correlated standard-normal draws (n x dims), before the marginal
/// transform.
MatrixXd sample_normal_scores(const CopulaModel& m, Index n, Rng& rng);

Table sample_synthetic(const CopulaModel& m, Index n, Rng& rng);

/// Uses a generator seeded from the model's stored seed.
Table sample_synthetic(const CopulaModel& m, Index n);

struct KsValidation {
  std::vector<std::string> columns;
  std::vector<double> d_statistic;
  std::vector<double> p_value;
  std::vector<bool> passed;
  double alpha = 0.05;
  bool all_passed = true;
};

KsValidation validate_synthetic(const Table& real, const Table& synth, double alpha);

/// Appends `n` synthetic rows (flagged in the provenance mask) to `train`.
Table augment(const Table& train, const CopulaModel& m, Index n, Rng& rng);

/// Concatenates two tables with identical schemas.
Table concat_rows(const Table& first, const Table& second);

std::string to_json_string(const CopulaModel& m);
CopulaModel copula_from_json_string(const std::string& text);
void save_copula(const CopulaModel& m, const std::filesystem::path& path);
CopulaModel load_copula(const std::filesystem::path& path);

}  // namespace copaug
