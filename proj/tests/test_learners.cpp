#include "copaug/learners.hpp"

#include "test_support.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>

using namespace copaug;
using copaug::testing::vec;

namespace {

// Reference CART: exhaustive search that recomputes each candidate's SSE
// from scratch.
struct OracleTree {
  struct Node {
    Index feature = -1;
    double threshold = 0.0;
    int left = -1;
    int right = -1;
    double value = 0.0;
  };
  std::vector<Node> nodes;

  double predict(const MatrixXd& x, Index i) const {
    int k = 0;
    while (nodes[static_cast<std::size_t>(k)].feature >= 0) {
      const Node& n = nodes[static_cast<std::size_t>(k)];
      k = x(i, n.feature) <= n.threshold ? n.left : n.right;
    }
    return nodes[static_cast<std::size_t>(k)].value;
  }
};

double sse_of(const VectorXd& r, const std::vector<Index>& rows) {
  double mean = 0.0;
  for (Index i : rows) mean += r(i);
  mean /= static_cast<double>(rows.size());
  double s = 0.0;
  for (Index i : rows) s += (r(i) - mean) * (r(i) - mean);
  return s;
}

int oracle_grow(OracleTree& t, const MatrixXd& x, const VectorXd& r, const std::vector<Index>& rows, int depth,
                int max_depth) {
  const int id = static_cast<int>(t.nodes.size());
  t.nodes.emplace_back();
  double mean = 0.0;
  for (Index i : rows) mean += r(i);
  t.nodes.back().value = mean / static_cast<double>(rows.size());
  if (depth >= max_depth || rows.size() < 2) return id;

  double best = sse_of(r, rows);
  Index best_f = -1;
  double best_thr = 0.0;
  for (Index f = 0; f < x.cols(); ++f) {
    std::set<double> distinct;
    for (Index i : rows) distinct.insert(x(i, f));
    std::vector<double> v(distinct.begin(), distinct.end());
    for (std::size_t k = 0; k + 1 < v.size(); ++k) {
      const double thr = 0.5 * (v[k] + v[k + 1]);
      std::vector<Index> l;
      std::vector<Index> rr;
      for (Index i : rows) (x(i, f) <= thr ? l : rr).push_back(i);
      const double s = sse_of(r, l) + sse_of(r, rr);
      if (s < best - 1e-12) {
        best = s;
        best_f = f;
        best_thr = thr;
      }
    }
  }
  if (best_f < 0) return id;
  std::vector<Index> l;
  std::vector<Index> rr;
  for (Index i : rows) (x(i, best_f) <= best_thr ? l : rr).push_back(i);
  t.nodes[static_cast<std::size_t>(id)].feature = best_f;
  t.nodes[static_cast<std::size_t>(id)].threshold = best_thr;
  const int li = oracle_grow(t, x, r, l, depth + 1, max_depth);
  const int ri = oracle_grow(t, x, r, rr, depth + 1, max_depth);
  t.nodes[static_cast<std::size_t>(id)].left = li;
  t.nodes[static_cast<std::size_t>(id)].right = ri;
  return id;
}

VectorXd oracle_boost(const MatrixXd& x, const VectorXd& y, int n_est, double lr, int depth) {
  const Index n = x.rows();
  VectorXd pred = VectorXd::Constant(n, y.mean());
  std::vector<Index> all(static_cast<std::size_t>(n));
  std::iota(all.begin(), all.end(), Index{0});
  for (int k = 0; k < n_est; ++k) {
    const VectorXd r = y - pred;
    OracleTree t;
    oracle_grow(t, x, r, all, 0, depth);
    for (Index i = 0; i < n; ++i) pred(i) += lr * t.predict(x, i);
  }
  return pred;
}

MatrixXd random_matrix(Index n, Index f, Rng& rng) {
  MatrixXd x(n, f);
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < f; ++j) x(i, j) = rng.uniform() * 10.0 - 5.0;
  }
  return x;
}

}  // namespace

TEST_CASE("constant residuals give one leaf") {
  MatrixXd x(6, 2);
  x.setRandom();
  const TreeFit fit = fit_tree(x, VectorXd::Constant(6, 1.25), {5, 2, 1});
  CHECK(fit.tree.nodes().size() == 1);
  CHECK(fit.tree.nodes()[0].value == 1.25);
}

TEST_CASE("depth-1 split on a step") {
  MatrixXd x(4, 1);
  x << 1, 2, 3, 4;
  const TreeFit fit = fit_tree(x, vec({0, 0, 1, 1}), {1, 2, 1});
  const auto& nodes = fit.tree.nodes();
  REQUIRE(nodes.size() == 3);
  CHECK(nodes[0].feature == 0);
  CHECK(nodes[0].threshold == 2.5);
  CHECK(nodes[1].value == 0.0);
  CHECK(nodes[2].value == 1.0);
  CHECK((fit.tree.predict(x) - vec({0, 0, 1, 1})).squaredNorm() == 0.0);

  // The three candidate thresholds, scored directly.
  double best = std::numeric_limits<double>::infinity();
  double best_thr = 0.0;
  for (double thr : {1.5, 2.5, 3.5}) {
    double sl = 0, nl = 0, sr = 0, nr = 0;
    for (Index i = 0; i < 4; ++i) (x(i, 0) <= thr ? (sl += i >= 2, nl += 1) : (sr += i >= 2, nr += 1));
    double sse = 0;
    for (Index i = 0; i < 4; ++i) {
      const double m = x(i, 0) <= thr ? sl / nl : sr / nr;
      sse += (static_cast<double>(i >= 2) - m) * (static_cast<double>(i >= 2) - m);
    }
    if (sse < best) {
      best = sse;
      best_thr = thr;
    }
  }
  CHECK(best_thr == nodes[0].threshold);
  CHECK(best == 0.0);
}

TEST_CASE("min_samples_leaf equal to n forbids splitting") {
  MatrixXd x(5, 1);
  x << 1, 2, 3, 4, 5;
  const TreeFit fit = fit_tree(x, vec({1, 2, 3, 4, 10}), {4, 2, 5});
  CHECK(fit.tree.nodes().size() == 1);
  CHECK(fit.tree.nodes()[0].value == doctest::Approx(4.0));
}

TEST_CASE("equal gains resolve to the lowest feature then lowest threshold") {
  MatrixXd x(4, 2);
  x << 1, 1, 2, 2, 3, 3, 4, 4;
  const TreeFit fit = fit_tree(x, vec({0, 0, 1, 1}), {1, 2, 1});
  CHECK(fit.tree.nodes()[0].feature == 0);

  MatrixXd x1(4, 1);
  x1 << 1, 2, 3, 4;
  const TreeFit sym = fit_tree(x1, vec({0, 1, 1, 0}), {1, 2, 1});
  CHECK(sym.tree.nodes()[0].threshold == 1.5);
}

TEST_CASE("trees match the exhaustive oracle on random problems") {
  Rng rng(17);
  for (int trial = 0; trial < 40; ++trial) {
    const Index n = 8 + static_cast<Index>(rng.below(40));
    const Index f = 1 + static_cast<Index>(rng.below(3));
    const int depth = 1 + static_cast<int>(rng.below(4));
    const MatrixXd x = random_matrix(n, f, rng);
    VectorXd r(n);
    for (Index i = 0; i < n; ++i) r(i) = rng.normal();
    const TreeFit fit = fit_tree(x, r, {depth, 2, 1});
    OracleTree o;
    std::vector<Index> all(static_cast<std::size_t>(n));
    std::iota(all.begin(), all.end(), Index{0});
    oracle_grow(o, x, r, all, 0, depth);
    CHECK(fit.tree.depth() <= depth);
    const VectorXd got = fit.tree.predict(x);
    for (Index i = 0; i < n; ++i) {
      CHECK(got(i) == doctest::Approx(o.predict(x, i)).epsilon(1e-10));
      CHECK(fit.fitted(i) == got(i));
    }
  }
}

TEST_CASE("leaf values are the mean of the rows they receive") {
  Rng rng(3);
  const MatrixXd x = random_matrix(200, 3, rng);
  VectorXd r(200);
  for (Index i = 0; i < 200; ++i) r(i) = std::sin(x(i, 0)) + 0.1 * rng.normal();
  const TreeFit fit = fit_tree(x, r, {4, 2, 3});
  std::vector<double> sum(fit.tree.nodes().size(), 0.0);
  std::vector<int> cnt(fit.tree.nodes().size(), 0);
  for (Index i = 0; i < 200; ++i) {
    const auto k = static_cast<std::size_t>(fit.tree.leaf_index(x, i));
    sum[k] += r(i);
    ++cnt[k];
  }
  for (std::size_t k = 0; k < sum.size(); ++k) {
    if (!fit.tree.nodes()[k].is_leaf()) continue;
    REQUIRE(cnt[k] >= 3);
    CHECK(fit.tree.nodes()[k].value == doctest::Approx(sum[k] / cnt[k]).epsilon(1e-12));
  }
}

TEST_CASE("boosting on constant targets") {
  MatrixXd x(30, 2);
  x.setRandom();
  GbmParams p;
  p.n_estimators = 20;
  const GbmModel m = fit_gbm(x, VectorXd::Constant(30, 0.3), p);
  CHECK(m.n_estimators() == 20);
  for (const auto& t : m.trees()) {
    CHECK(t.nodes().size() == 1);
    CHECK(t.nodes()[0].value == 0.0);
  }
  const VectorXd pred = m.predict(x);
  for (Index i = 0; i < 30; ++i) CHECK(pred(i) == 0.3);
}

TEST_CASE("zero trees predict the training mean") {
  Rng rng(8);
  const MatrixXd x = random_matrix(25, 2, rng);
  VectorXd y(25);
  for (Index i = 0; i < 25; ++i) y(i) = rng.normal() * 5.0 + 2.0;
  GbmParams p;
  p.n_estimators = 0;
  const GbmModel m = fit_gbm(x, y, p);
  const double mean = std::accumulate(y.begin(), y.end(), 0.0) / 25.0;
  CHECK(m.init_value() == doctest::Approx(mean).epsilon(1e-15));
  const VectorXd pred = m.predict(random_matrix(7, 2, rng));
  for (Index i = 0; i < 7; ++i) CHECK(pred(i) == m.init_value());
}

TEST_CASE("staged training MSE never increases") {
  Rng rng(1234);
  for (int trial = 0; trial < 100; ++trial) {
    const Index n = 10 + static_cast<Index>(rng.below(60));
    const MatrixXd x = random_matrix(n, 1 + static_cast<Index>(rng.below(3)), rng);
    VectorXd y(n);
    for (Index i = 0; i < n; ++i) y(i) = x(i, 0) * x(i, 0) + rng.normal();
    GbmParams p;
    p.n_estimators = 30;
    p.learning_rate = 0.05 + 0.95 * rng.uniform();
    p.max_depth = 1 + static_cast<int>(rng.below(4));
    const GbmModel m = fit_gbm(x, y, p);
    REQUIRE(m.train_mse().size() == 31);
    for (std::size_t s = 1; s < m.train_mse().size(); ++s) {
      CHECK(m.train_mse()[s] <= m.train_mse()[s - 1] * (1.0 + 1e-12) + 1e-15);
    }
  }
}

TEST_CASE("boosting fits a smooth curve") {
  const Index n = 500;
  MatrixXd x(n, 1);
  VectorXd y(n);
  for (Index i = 0; i < n; ++i) {
    x(i, 0) = -2.0 + 4.0 * static_cast<double>(i) / static_cast<double>(n - 1);
    y(i) = std::sin(3.0 * x(i, 0)) + 0.5 * x(i, 0);
  }
  GbmParams p;
  p.n_estimators = 300;
  p.learning_rate = 0.1;
  p.max_depth = 3;
  p.seed = 42;
  const GbmModel m = fit_gbm(x, y, p);
  const VectorXd pred = m.predict(x);
  const double sst = (y.array() - y.mean()).square().sum();
  CHECK(1.0 - (pred - y).squaredNorm() / sst >= 0.99);
}

TEST_CASE("boosting matches a hand-rolled oracle on 20 points") {
  Rng rng(20);
  const MatrixXd x = random_matrix(20, 2, rng);
  VectorXd y(20);
  for (Index i = 0; i < 20; ++i) y(i) = std::sin(x(i, 0)) + 0.3 * x(i, 1) + 0.1 * rng.normal();
  GbmParams p;
  p.n_estimators = 25;
  p.learning_rate = 0.2;
  p.max_depth = 2;
  const GbmModel m = fit_gbm(x, y, p);
  const VectorXd want = oracle_boost(x, y, 25, 0.2, 2);
  const VectorXd got = m.predict(x);
  CHECK((got - want).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("staged predictions are prefixes") {
  Rng rng(4);
  const MatrixXd x = random_matrix(60, 2, rng);
  VectorXd y = x.col(0).array().square() + x.col(1).array();
  GbmParams p;
  p.n_estimators = 40;
  const GbmModel full = fit_gbm(x, y, p);
  p.n_estimators = 15;
  const GbmModel part = fit_gbm(x, y, p);
  const MatrixXd staged = full.predict_staged(x, {0, 15, 40});
  CHECK(staged.col(0) == VectorXd::Constant(60, full.init_value()));
  CHECK((staged.col(1) - part.predict(x)).cwiseAbs().maxCoeff() == 0.0);
  CHECK((staged.col(2) - full.predict(x)).cwiseAbs().maxCoeff() == 0.0);
  CHECK_THROWS_AS(full.predict_staged(x, {41}), Error);
}

TEST_CASE("fixed-value predictors") {
  MatrixXd x(3, 2);
  x.setRandom();
  RidgeModel r;
  r.weights = VectorXd::Zero(2);
  r.intercept = 7.0;
  CHECK(r.predict(x) == VectorXd::Constant(3, 7.0));
  const RegressionTree leaf = RegressionTree::leaf(3.5, 2);
  CHECK(leaf.predict(x) == VectorXd::Constant(3, 3.5));
  CHECK_THROWS_AS(leaf.predict(MatrixXd::Zero(3, 4)), Error);
}

TEST_CASE("ridge regression") {
  MatrixXd x(3, 1);
  x << 1, 2, 3;
  SUBCASE("one-dimensional normal equation") {
    const RidgeModel m = fit_ridge(x, vec({1, 2, 3}), 1.0);
    CHECK(m.weights(0) == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
    CHECK(m.intercept == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
  }
  SUBCASE("alpha zero interpolates a line") {
    MatrixXd xl(5, 1);
    xl << -1, 0, 2, 3, 7;
    const VectorXd y = 2.0 * xl.col(0).array() + 1.0;
    const RidgeModel m = fit_ridge(xl, y, 0.0);
    CHECK(std::fabs(m.weights(0) - 2.0) < 1e-9);
    CHECK(std::fabs(m.intercept - 1.0) < 1e-9);
  }
  SUBCASE("large alpha shrinks to the mean") {
    const RidgeModel m = fit_ridge(x, vec({1, 2, 6}), 1e12);
    CHECK(std::fabs(m.weights(0)) < 1e-9);
    CHECK(m.intercept == doctest::Approx(3.0).epsilon(1e-9));
  }
  SUBCASE("alpha zero with collinear columns") {
    MatrixXd xc(4, 2);
    xc << 1, 2, 2, 4, 3, 6, 4, 8;
    try {
      fit_ridge(xc, vec({1, 2, 3, 4}), 0.0);
      FAIL("expected SingularSystem");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::SingularSystem);
    }
  }
  SUBCASE("agrees with an augmented least-squares solve") {
    Rng rng(6);
    const MatrixXd xr = random_matrix(40, 3, rng);
    VectorXd y(40);
    for (Index i = 0; i < 40; ++i) y(i) = xr.row(i).sum() + rng.normal();
    const double alpha = 2.5;
    // Stack sqrt(alpha) I under centered X: ridge as ordinary least squares.
    const MatrixXd xc = xr.rowwise() - xr.colwise().mean();
    MatrixXd a(43, 3);
    a << xc, std::sqrt(alpha) * MatrixXd::Identity(3, 3);
    VectorXd b(43);
    b << (y.array() - y.mean()).matrix(), VectorXd::Zero(3);
    const VectorXd w = a.householderQr().solve(b);
    const RidgeModel m = fit_ridge(xr, y, alpha);
    CHECK((m.weights - w).cwiseAbs().maxCoeff() < 1e-10);
    CHECK(m.intercept == doctest::Approx(y.mean() - xr.colwise().mean().dot(w)).epsilon(1e-10));
  }
}

TEST_CASE("gbm JSON round trip") {
  Rng rng(9);
  const MatrixXd x = random_matrix(80, 3, rng);
  const VectorXd y = x.col(0).array().sin() + x.col(2).array();
  GbmParams p;
  p.n_estimators = 12;
  p.max_depth = 4;
  const GbmModel m = fit_gbm(x, y, p);
  const std::string text = to_json_string(m);
  const GbmModel back = gbm_from_json_string(text);
  CHECK(to_json_string(back) == text);
  CHECK(back.predict(x) == m.predict(x));
  CHECK_THROWS_AS(gbm_from_json_string("[]"), Error);
}

TEST_CASE("input validation") {
  MatrixXd x(3, 1);
  x << 1, 2, std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(fit_gbm(x, vec({1, 2, 3}), GbmParams{}), Error);
  CHECK_THROWS_AS(fit_gbm(MatrixXd::Zero(3, 1), vec({1, 2}), GbmParams{}), Error);
}
