#include "copaug/learners.hpp"

#include "copaug/data_model.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <limits>
#include <numeric>
#include <sstream>

namespace copaug {

using ojson = nlohmann::ordered_json;

// ---- RegressionTree ---------------------------------------------------------

RegressionTree::RegressionTree(std::vector<TreeNode> nodes, Index n_features)
    : nodes_(std::move(nodes)), n_features_(n_features) {
  if (nodes_.empty()) throw Error(ErrorCode::EmptyInput, "tree needs at least one node");
  for (const auto& nd : nodes_) {
    if (nd.is_leaf()) continue;
    const auto size = static_cast<Index>(nodes_.size());
    if (nd.feature >= n_features_ || nd.left <= 0 || nd.right <= 0 || nd.left >= size ||
        nd.right >= size) {
      throw Error(ErrorCode::InvalidArgument, "tree node references are out of range");
    }
  }
}

RegressionTree RegressionTree::leaf(double value, Index n_features) {
  TreeNode nd;
  nd.value = value;
  return RegressionTree({nd}, n_features);
}

Index RegressionTree::leaf_count() const {
  return std::count_if(nodes_.begin(), nodes_.end(), [](const TreeNode& n) { return n.is_leaf(); });
}

int RegressionTree::depth() const {
  std::function<int(Index)> walk = [&](Index k) -> int {
    const auto& nd = nodes_[static_cast<std::size_t>(k)];
    if (nd.is_leaf()) return 0;
    return 1 + std::max(walk(nd.left), walk(nd.right));
  };
  return walk(0);
}

VectorXd RegressionTree::predict(const MatrixXd& x) const {
  if (x.cols() != n_features_) {
    throw Error(ErrorCode::DimensionMismatch, "tree expects " + std::to_string(n_features_) +
                                                  " features, got " + std::to_string(x.cols()));
  }
  VectorXd out(x.rows());
  for (Index i = 0; i < x.rows(); ++i) {
    out(i) = nodes_[static_cast<std::size_t>(leaf_index(x, i))].value;
  }
  return out;
}

// ---- Tree growth --------------------------------------------------------------

namespace {

double split_threshold(double lo, double hi) {
  double mid = lo + 0.5 * (hi - lo);
  // Adjacent doubles can round the midpoint up to `hi`, which would route
  // `hi` to the left child.
  if (mid >= hi) mid = lo;
  return mid;
}

/// Presorted feature orders for one design matrix, reused across boosting
/// stages.
class TreeGrower {
 public:
  explicit TreeGrower(const MatrixXd& x) : x_(x), n_(x.rows()), f_(x.cols()) {
    order_.resize(static_cast<std::size_t>(f_));
    sorted_.resize(static_cast<std::size_t>(f_));
    for (Index f = 0; f < f_; ++f) {
      auto& ord = order_[static_cast<std::size_t>(f)];
      ord.resize(static_cast<std::size_t>(n_));
      std::iota(ord.begin(), ord.end(), 0);
      std::stable_sort(ord.begin(), ord.end(),
                       [&](std::int32_t a, std::int32_t b) { return x(a, f) < x(b, f); });
      auto& vals = sorted_[static_cast<std::size_t>(f)];
      vals.resize(ord.size());
      for (std::size_t k = 0; k < ord.size(); ++k) vals[k] = x(ord[k], f);
    }
  }

  TreeFit grow(const VectorXd& r, const TreeParams& p) const;

 private:
  struct Node {
    double sum = 0.0;
    Index count = 0;
    double rmin = std::numeric_limits<double>::infinity();
    double rmax = -std::numeric_limits<double>::infinity();
    int depth = 0;
    Index feature = -1;
    double threshold = 0.0;
    std::int32_t left = -1;
    std::int32_t right = -1;

    void add(double v) {
      sum += v;
      ++count;
      rmin = std::min(rmin, v);
      rmax = std::max(rmax, v);
    }
    double leaf_value() const {
      return rmin == rmax ? rmin : sum / static_cast<double>(count);
    }
  };

  const MatrixXd& x_;
  Index n_;
  Index f_;
  std::vector<std::vector<std::int32_t>> order_;
  std::vector<std::vector<double>> sorted_;
};

TreeFit TreeGrower::grow(const VectorXd& r, const TreeParams& p) const {
  const Index min_leaf = std::max<Index>(p.min_samples_leaf, 1);
  const Index min_split = std::max<Index>(p.min_samples_split, 2);

  std::vector<Node> nodes(1);
  for (Index i = 0; i < n_; ++i) nodes[0].add(r(i));
  std::vector<std::int32_t> node_of(static_cast<std::size_t>(n_), 0);
  std::vector<std::int32_t> row_slot(static_cast<std::size_t>(n_));
  std::vector<std::int32_t> frontier{0};

  struct Scan {
    double left_sum;
    Index left_count;
    double last;
  };
  struct Best {
    double score;
    Index feature;
    double threshold;
  };

  while (!frontier.empty()) {
    std::vector<std::int32_t> cand;
    for (auto id : frontier) {
      const Node& nd = nodes[static_cast<std::size_t>(id)];
      if (nd.depth < p.max_depth && nd.count >= min_split && nd.count >= 2 * min_leaf &&
          nd.rmax > nd.rmin) {
        cand.push_back(id);
      }
    }
    if (cand.empty()) break;

    std::vector<std::int32_t> slot_of(nodes.size(), -1);
    for (std::size_t s = 0; s < cand.size(); ++s) slot_of[static_cast<std::size_t>(cand[s])] = static_cast<std::int32_t>(s);
    for (Index i = 0; i < n_; ++i) {
      row_slot[static_cast<std::size_t>(i)] = slot_of[static_cast<std::size_t>(node_of[static_cast<std::size_t>(i)])];
    }

    std::vector<Best> best(cand.size(), Best{-std::numeric_limits<double>::infinity(), -1, 0.0});
    std::vector<Scan> scan(cand.size());
    std::vector<double> total(cand.size());
    std::vector<Index> count(cand.size());
    for (std::size_t s = 0; s < cand.size(); ++s) {
      total[s] = nodes[static_cast<std::size_t>(cand[s])].sum;
      count[s] = nodes[static_cast<std::size_t>(cand[s])].count;
    }

    for (Index f = 0; f < f_; ++f) {
      std::fill(scan.begin(), scan.end(), Scan{0.0, 0, 0.0});
      const auto& ord = order_[static_cast<std::size_t>(f)];
      const auto& vals = sorted_[static_cast<std::size_t>(f)];
      for (std::size_t k = 0; k < ord.size(); ++k) {
        const auto row = static_cast<std::size_t>(ord[k]);
        const std::int32_t s = row_slot[row];
        if (s < 0) continue;
        Scan& sc = scan[static_cast<std::size_t>(s)];
        const double v = vals[k];
        if (sc.left_count >= min_leaf && v > sc.last) {
          const Index nr = count[static_cast<std::size_t>(s)] - sc.left_count;
          if (nr >= min_leaf) {
            const double rs = total[static_cast<std::size_t>(s)] - sc.left_sum;
            const double score = sc.left_sum * sc.left_sum / static_cast<double>(sc.left_count) +
                                 rs * rs / static_cast<double>(nr);
            Best& b = best[static_cast<std::size_t>(s)];
            if (score > b.score) {
              b.score = score;
              b.feature = f;
              b.threshold = split_threshold(sc.last, v);
            }
          }
        }
        sc.left_sum += r(static_cast<Index>(row));
        ++sc.left_count;
        sc.last = v;
      }
    }

    std::vector<std::int32_t> next;
    for (std::size_t s = 0; s < cand.size(); ++s) {
      const auto id = static_cast<std::size_t>(cand[s]);
      const double base = total[s] * total[s] / static_cast<double>(count[s]);
      if (best[s].feature < 0 || !(best[s].score > base)) continue;
      const int depth = nodes[id].depth + 1;
      nodes[id].feature = best[s].feature;
      nodes[id].threshold = best[s].threshold;
      nodes[id].left = static_cast<std::int32_t>(nodes.size());
      nodes[id].right = static_cast<std::int32_t>(nodes.size() + 1);
      Node child;
      child.depth = depth;
      nodes.push_back(child);
      nodes.push_back(child);
      next.push_back(nodes[id].left);
      next.push_back(nodes[id].right);
    }
    if (next.empty()) break;

    for (Index i = 0; i < n_; ++i) {
      auto& id = node_of[static_cast<std::size_t>(i)];
      const Node& parent = nodes[static_cast<std::size_t>(id)];
      if (parent.left < 0) continue;
      id = x_(i, parent.feature) <= parent.threshold ? parent.left : parent.right;
      nodes[static_cast<std::size_t>(id)].add(r(i));
    }
    frontier = std::move(next);
  }

  // Emit in pre-order.
  std::vector<TreeNode> out;
  out.reserve(nodes.size());
  std::function<Index(std::int32_t)> emit = [&](std::int32_t id) -> Index {
    const Node& nd = nodes[static_cast<std::size_t>(id)];
    const auto at = static_cast<Index>(out.size());
    out.emplace_back();
    out.back().samples = nd.count;
    if (nd.left < 0) {
      out.back().value = nd.leaf_value();
      return at;
    }
    out[static_cast<std::size_t>(at)].feature = nd.feature;
    out[static_cast<std::size_t>(at)].threshold = nd.threshold;
    out[static_cast<std::size_t>(at)].value = nd.sum / static_cast<double>(nd.count);
    const Index l = emit(nd.left);
    const Index rr = emit(nd.right);
    out[static_cast<std::size_t>(at)].left = l;
    out[static_cast<std::size_t>(at)].right = rr;
    return at;
  };
  emit(0);

  TreeFit fit{RegressionTree(std::move(out), f_), VectorXd(n_)};
  for (Index i = 0; i < n_; ++i) {
    fit.fitted(i) = nodes[static_cast<std::size_t>(node_of[static_cast<std::size_t>(i)])].leaf_value();
  }
  return fit;
}

void check_training_inputs(const MatrixXd& x, const VectorXd& y) {
  if (x.rows() == 0 || x.cols() == 0) throw Error(ErrorCode::EmptyInput, "empty feature matrix");
  if (x.rows() != y.size()) {
    throw Error(ErrorCode::DimensionMismatch, "feature rows (" + std::to_string(x.rows()) +
                                                  ") != target length (" +
                                                  std::to_string(y.size()) + ")");
  }
  if (!x.allFinite() || !y.allFinite()) throw Error(ErrorCode::NonFiniteInput, "non-finite training data");
}

}  // namespace

TreeFit fit_tree(const MatrixXd& x, const VectorXd& residuals, const TreeParams& params) {
  check_training_inputs(x, residuals);
  if (params.max_depth < 0) throw Error(ErrorCode::InvalidArgument, "max_depth must be >= 0");
  return TreeGrower(x).grow(residuals, params);
}

// ---- Gradient boosting --------------------------------------------------------

GbmModel::GbmModel(double init_value, double learning_rate, int max_depth, Index n_features,
                   std::vector<RegressionTree> trees, std::vector<double> train_mse)
    : init_value_(init_value),
      learning_rate_(learning_rate),
      max_depth_(max_depth),
      n_features_(n_features),
      trees_(std::move(trees)),
      train_mse_(std::move(train_mse)) {}

VectorXd GbmModel::predict(const MatrixXd& x) const {
  return predict_staged(x, {n_estimators()}).col(0);
}

MatrixXd GbmModel::predict_staged(const MatrixXd& x, const std::vector<int>& stages) const {
  if (x.cols() != n_features_) {
    throw Error(ErrorCode::DimensionMismatch, "model expects " + std::to_string(n_features_) +
                                                  " features, got " + std::to_string(x.cols()));
  }
  MatrixXd out(x.rows(), static_cast<Index>(stages.size()));
  VectorXd f = VectorXd::Constant(x.rows(), init_value_);
  int done = 0;
  for (std::size_t s = 0; s < stages.size(); ++s) {
    if (stages[s] < done || stages[s] > n_estimators()) {
      throw Error(ErrorCode::InvalidArgument, "stages must be non-decreasing and within the ensemble");
    }
    for (; done < stages[s]; ++done) {
      const RegressionTree& tree = trees_[static_cast<std::size_t>(done)];
      for (Index i = 0; i < x.rows(); ++i) {
        f(i) += learning_rate_ * tree.nodes()[static_cast<std::size_t>(tree.leaf_index(x, i))].value;
      }
    }
    out.col(static_cast<Index>(s)) = f;
  }
  return out;
}

GbmModel fit_gbm(const MatrixXd& x, const VectorXd& y, const GbmParams& params) {
  check_training_inputs(x, y);
  if (params.n_estimators < 0 || !(params.learning_rate > 0.0) || params.max_depth < 0) {
    throw Error(ErrorCode::InvalidArgument, "invalid boosting hyperparameters");
  }
  const double init = stable_mean(y);
  VectorXd f = VectorXd::Constant(y.size(), init);
  std::vector<double> mse{(y - f).squaredNorm() / static_cast<double>(y.size())};
  std::vector<RegressionTree> trees;
  trees.reserve(static_cast<std::size_t>(params.n_estimators));

  const TreeParams tp{params.max_depth, params.min_samples_split, params.min_samples_leaf};
  const TreeGrower grower(x);
  for (int k = 0; k < params.n_estimators; ++k) {
    const VectorXd residual = y - f;
    TreeFit fit = grower.grow(residual, tp);
    for (Index i = 0; i < f.size(); ++i) f(i) += params.learning_rate * fit.fitted(i);
    trees.push_back(std::move(fit.tree));
    mse.push_back((y - f).squaredNorm() / static_cast<double>(y.size()));
  }
  return GbmModel(init, params.learning_rate, params.max_depth, x.cols(), std::move(trees),
                  std::move(mse));
}

// ---- Ridge --------------------------------------------------------------------

VectorXd RidgeModel::predict(const MatrixXd& x) const {
  if (x.cols() != weights.size()) {
    throw Error(ErrorCode::DimensionMismatch, "ridge model expects " +
                                                  std::to_string(weights.size()) + " features");
  }
  return (x * weights).array() + intercept;
}

RidgeModel fit_ridge(const MatrixXd& x, const VectorXd& y, double alpha) {
  check_training_inputs(x, y);
  if (!(alpha >= 0.0)) throw Error(ErrorCode::InvalidArgument, "ridge alpha must be >= 0");
  const Eigen::RowVectorXd x_mean = x.colwise().mean();
  const double y_mean = y.mean();
  const MatrixXd xc = x.rowwise() - x_mean;
  const VectorXd yc = y.array() - y_mean;

  MatrixXd gram = xc.transpose() * xc;
  gram.diagonal().array() += alpha;
  const VectorXd rhs = xc.transpose() * yc;

  RidgeModel m;
  m.alpha = alpha;
  if (alpha > 0.0) {
    Eigen::LLT<MatrixXd> llt(gram);
    if (llt.info() != Eigen::Success) throw Error(ErrorCode::SingularSystem, "ridge system is not positive definite");
    m.weights = llt.solve(rhs);
  } else {
    Eigen::ColPivHouseholderQR<MatrixXd> qr(gram);
    if (qr.rank() < gram.cols()) throw Error(ErrorCode::SingularSystem, "X^T X is singular and alpha = 0");
    m.weights = qr.solve(rhs);
  }
  m.intercept = y_mean - x_mean.dot(m.weights);
  return m;
}

// ---- Persistence ----------------------------------------------------------------

std::string to_json_string(const GbmModel& m) {
  ojson j;
  j["format"] = GbmModel::kFormatTag;
  j["init_value"] = m.init_value();
  j["learning_rate"] = m.learning_rate();
  j["n_estimators"] = m.n_estimators();
  j["max_depth"] = m.max_depth();
  j["n_features"] = m.n_features();
  ojson trees = ojson::array();
  for (const auto& t : m.trees()) {
    ojson nodes = ojson::array();
    for (const auto& nd : t.nodes()) {
      if (nd.is_leaf()) {
        nodes.push_back({{"value", nd.value}});
      } else {
        nodes.push_back({{"feature", nd.feature}, {"threshold", nd.threshold}});
      }
    }
    trees.push_back(std::move(nodes));
  }
  j["trees"] = std::move(trees);
  return j.dump(2) + "\n";
}

GbmModel gbm_from_json_string(const std::string& text) {
  ojson j;
  try {
    j = ojson::parse(text);
  } catch (const std::exception& e) {
    throw Error(ErrorCode::InvalidConfig, std::string("gbm model is not valid JSON: ") + e.what());
  }
  if (!j.is_object() || j.value("format", "") != GbmModel::kFormatTag) {
    throw Error(ErrorCode::InvalidConfig, "missing or unsupported format tag, expected gbm-v1");
  }
  try {
    const Index n_features = j.at("n_features").get<Index>();
    std::vector<RegressionTree> trees;
    for (const auto& jt : j.at("trees")) {
      std::vector<TreeNode> nodes;
      std::size_t pos = 0;
      // Pre-order: an internal node is followed by its left subtree, then its right.
      std::function<Index()> read = [&]() -> Index {
        if (pos >= jt.size()) throw Error(ErrorCode::InvalidConfig, "truncated tree");
        const auto& jn = jt.at(pos++);
        const auto at = static_cast<Index>(nodes.size());
        nodes.emplace_back();
        if (jn.contains("value")) {
          nodes.back().value = jn.at("value").get<double>();
          return at;
        }
        nodes[static_cast<std::size_t>(at)].feature = jn.at("feature").get<Index>();
        nodes[static_cast<std::size_t>(at)].threshold = jn.at("threshold").get<double>();
        const Index l = read();
        const Index r = read();
        nodes[static_cast<std::size_t>(at)].left = l;
        nodes[static_cast<std::size_t>(at)].right = r;
        return at;
      };
      read();
      if (pos != jt.size()) throw Error(ErrorCode::InvalidConfig, "trailing nodes in tree");
      trees.emplace_back(std::move(nodes), n_features);
    }
    if (static_cast<int>(trees.size()) != j.at("n_estimators").get<int>()) {
      throw Error(ErrorCode::InvalidConfig, "tree count does not match n_estimators");
    }
    return GbmModel(j.at("init_value").get<double>(), j.at("learning_rate").get<double>(),
                    j.at("max_depth").get<int>(), n_features, std::move(trees));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::InvalidConfig, std::string("malformed gbm model: ") + e.what());
  }
}

void save_gbm(const GbmModel& m, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  out << to_json_string(m);
}

GbmModel load_gbm(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return gbm_from_json_string(ss.str());
}

}  // namespace copaug
