#pragma once

#include "copaug/core.hpp"
#include "copaug/learners.hpp"

#include <functional>
#include <optional>
#include <utility>
#include <vector>

namespace copaug {

struct HyperGrid {
  std::vector<int> n_estimators{100, 200, 300};
  std::vector<double> learning_rate{0.01, 0.05, 0.1};
  std::vector<int> max_depth{3, 5, 7};

  std::size_t size() const { return n_estimators.size() * learning_rate.size() * max_depth.size(); }
  void validate() const;
};

struct GbmConfig {
  int n_estimators = 100;
  double learning_rate = 0.1;
  int max_depth = 3;

  friend bool operator==(const GbmConfig&, const GbmConfig&) = default;
};

/// Cartesian product in declaration order: n_estimators outermost, then
/// learning_rate, then max_depth.
std::vector<GbmConfig> enumerate(const HyperGrid& grid);

struct MetricSet {
  double mse = 0.0;
  double rmse = 0.0;
  double mae = 0.0;
  /// Empty when undefined (constant truth with nonzero error).
  std::optional<double> r2;
  std::vector<double> percent_errors;
  double pe_mean = 0.0;
  double pe_median = 0.0;
  double pe_std = 0.0;
};

inline constexpr double kDefaultPercentEpsilon = 1e-6;

MetricSet evaluate(const Eigen::Ref<const VectorXd>& y_true, const Eigen::Ref<const VectorXd>& y_pred,
                   double epsilon = kDefaultPercentEpsilon);

/// R^2 with the degenerate-SST convention: 1 when SSE = 0, else empty.
std::optional<double> r2_score(const Eigen::Ref<const VectorXd>& y_true,
                               const Eigen::Ref<const VectorXd>& y_pred);

struct Fold {
  IndexList train;
  IndexList valid;
};

/// Shuffled partition of 0..n-1 into k folds whose sizes differ by at most
/// one; the first n % k folds get the extra element.
std::vector<Fold> kfold_indices(Index n, int k, std::uint64_t seed);

struct CvResult {
  GbmConfig config;
  std::vector<double> fold_losses;  // validation MSE per fold
  std::vector<double> fold_r2;      // -inf stands in for undefined
  double mean_r2 = 0.0;
  double mean_mse = 0.0;
};

struct GridSearchResult {
  GbmConfig best;
  std::vector<CvResult> results;  // enumeration order
  std::size_t models_evaluated = 0;
};

struct ParallelOptions {
  unsigned workers = 1;
};

/// Exhaustive search scored by mean validation R^2. Ties prefer smaller
/// n_estimators, then smaller max_depth, then smaller learning_rate.
///
/// Configs that share (learning_rate, max_depth) are served by one boosting
/// run per fold and read off at each n_estimators stage; a shorter ensemble is
/// exactly a prefix of a longer one.
GridSearchResult grid_search(const MatrixXd& x, const VectorXd& y, const HyperGrid& grid, int k,
                             std::uint64_t seed, ParallelOptions parallel = {});

/// Per-fold validation MSE for one configuration.
CvResult cross_validate_model(const MatrixXd& x, const VectorXd& y, const GbmConfig& config, int k,
                              std::uint64_t seed, ParallelOptions parallel = {});

/// Validation-fold predictions (entry f aligns with folds[f].valid).
std::vector<VectorXd> cross_validate_predict(const MatrixXd& x, const VectorXd& y,
                                             const GbmConfig& config, const std::vector<Fold>& folds,
                                             ParallelOptions parallel = {});

/// Same, over caller-supplied folds.
CvResult cross_validate_model(const MatrixXd& x, const VectorXd& y, const GbmConfig& config,
                              const std::vector<Fold>& folds, ParallelOptions parallel = {});

/// Runs `count` independent tasks on up to `workers` threads.
void parallel_for(std::size_t count, unsigned workers, const std::function<void(std::size_t)>& task);

}  // namespace copaug
