#pragma once

#include "copaug/core.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace copaug {

/// Flattened tree node. Internal nodes send x to `left` when
/// x[feature] <= threshold, else to `right`.
struct TreeNode {
  Index feature = -1;
  double threshold = 0.0;
  Index left = -1;
  Index right = -1;
  double value = 0.0;
  Index samples = 0;

  bool is_leaf() const { return feature < 0; }
};

struct TreeParams {
  int max_depth = 3;
  Index min_samples_split = 2;
  Index min_samples_leaf = 1;
};

/// Regression tree stored in pre-order; node 0 is the root.
class RegressionTree {
 public:
  RegressionTree() = default;
  RegressionTree(std::vector<TreeNode> nodes, Index n_features);

  static RegressionTree leaf(double value, Index n_features);

  const std::vector<TreeNode>& nodes() const { return nodes_; }
  Index n_features() const { return n_features_; }
  Index leaf_count() const;
  int depth() const;

  /// Index of the leaf reached by row `i` of `x`.
  template <typename Derived>
  Index leaf_index(const Eigen::MatrixBase<Derived>& x, Index i) const {
    Index k = 0;
    while (!nodes_[static_cast<std::size_t>(k)].is_leaf()) {
      const TreeNode& nd = nodes_[static_cast<std::size_t>(k)];
      k = x(i, nd.feature) <= nd.threshold ? nd.left : nd.right;
    }
    return k;
  }

  VectorXd predict(const MatrixXd& x) const;

 private:
  std::vector<TreeNode> nodes_;
  Index n_features_ = 0;
};

/// A fitted tree together with its in-sample predictions (leaf value of the
/// leaf each training row was routed to during growth).
struct TreeFit {
  RegressionTree tree;
  VectorXd fitted;
};

/// Greedy exact CART on squared error. Candidate thresholds are midpoints of
/// consecutive distinct feature values; equal gains resolve to the lowest
/// feature index, then the lowest threshold.
TreeFit fit_tree(const MatrixXd& x, const VectorXd& residuals, const TreeParams& params = {});

struct GbmParams {
  int n_estimators = 100;
  double learning_rate = 0.1;
  int max_depth = 3;
  Index min_samples_split = 2;
  Index min_samples_leaf = 1;
  std::uint64_t seed = 0;
};

class GbmModel {
 public:
  static constexpr const char* kFormatTag = "gbm-v1";

  GbmModel() = default;
  GbmModel(double init_value, double learning_rate, int max_depth, Index n_features,
           std::vector<RegressionTree> trees, std::vector<double> train_mse = {});

  double init_value() const { return init_value_; }
  double learning_rate() const { return learning_rate_; }
  int max_depth() const { return max_depth_; }
  Index n_features() const { return n_features_; }
  int n_estimators() const { return static_cast<int>(trees_.size()); }
  const std::vector<RegressionTree>& trees() const { return trees_; }

  /// Training MSE after each stage; entry 0 is the constant model.
  const std::vector<double>& train_mse() const { return train_mse_; }

  VectorXd predict(const MatrixXd& x) const;

  /// Column s holds the prediction of the first `stages[s]` trees.
  /// `stages` must be non-decreasing and at most n_estimators().
  MatrixXd predict_staged(const MatrixXd& x, const std::vector<int>& stages) const;

 private:
  double init_value_ = 0.0;
  double learning_rate_ = 0.1;
  int max_depth_ = 3;
  Index n_features_ = 0;
  std::vector<RegressionTree> trees_;
  std::vector<double> train_mse_;
};

/// Least-squares gradient boosting; the initial prediction is mean(y) and
/// each stage fits a tree to the current residuals.
GbmModel fit_gbm(const MatrixXd& x, const VectorXd& y, const GbmParams& params);

struct RidgeModel {
  VectorXd weights;
  double intercept = 0.0;
  double alpha = 1.0;

  VectorXd predict(const MatrixXd& x) const;
};

inline constexpr double kDefaultRidgeAlpha = 1.0;

/// Closed-form ridge on column-centered data; the intercept is unpenalized.
RidgeModel fit_ridge(const MatrixXd& x, const VectorXd& y, double alpha = kDefaultRidgeAlpha);

std::string to_json_string(const GbmModel& m);
GbmModel gbm_from_json_string(const std::string& text);
void save_gbm(const GbmModel& m, const std::filesystem::path& path);
GbmModel load_gbm(const std::filesystem::path& path);

}  // namespace copaug
