#include "copaug/model_select.hpp"

#include "copaug/data_model.hpp"
#include "copaug/stats_tests.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <limits>
#include <map>
#include <mutex>
#include <numeric>
#include <thread>
#include <tuple>

namespace copaug {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

MatrixXd take_rows(const MatrixXd& x, const IndexList& rows) {
  MatrixXd out(static_cast<Index>(rows.size()), x.cols());
  for (std::size_t r = 0; r < rows.size(); ++r) out.row(static_cast<Index>(r)) = x.row(rows[r]);
  return out;
}

VectorXd take(const VectorXd& y, const IndexList& rows) {
  VectorXd out(static_cast<Index>(rows.size()));
  for (std::size_t r = 0; r < rows.size(); ++r) out(static_cast<Index>(r)) = y(rows[r]);
  return out;
}

double mean_of(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

}  // namespace

void HyperGrid::validate() const {
  if (n_estimators.empty() || learning_rate.empty() || max_depth.empty()) {
    throw Error(ErrorCode::InvalidConfig, "hyperparameter grid has an empty axis");
  }
  for (int n : n_estimators) {
    if (n < 0) throw Error(ErrorCode::InvalidConfig, "n_estimators must be >= 0");
  }
  for (double lr : learning_rate) {
    if (!(lr > 0.0)) throw Error(ErrorCode::InvalidConfig, "learning_rate must be > 0");
  }
  for (int d : max_depth) {
    if (d < 0) throw Error(ErrorCode::InvalidConfig, "max_depth must be >= 0");
  }
}

std::vector<GbmConfig> enumerate(const HyperGrid& grid) {
  std::vector<GbmConfig> out;
  out.reserve(grid.size());
  for (int n : grid.n_estimators) {
    for (double lr : grid.learning_rate) {
      for (int d : grid.max_depth) out.push_back({n, lr, d});
    }
  }
  return out;
}

std::optional<double> r2_score(const Eigen::Ref<const VectorXd>& y_true,
                               const Eigen::Ref<const VectorXd>& y_pred) {
  const double mean = stable_mean(y_true);
  const double sst = (y_true.array() - mean).square().sum();
  const double sse = (y_pred - y_true).squaredNorm();
  if (sst == 0.0) {
    if (sse == 0.0) return 1.0;
    return std::nullopt;
  }
  return 1.0 - sse / sst;
}

MetricSet evaluate(const Eigen::Ref<const VectorXd>& y_true, const Eigen::Ref<const VectorXd>& y_pred,
                   double epsilon) {
  if (y_true.size() != y_pred.size()) {
    throw Error(ErrorCode::LengthMismatch, "truth has " + std::to_string(y_true.size()) +
                                               " values, predictions " +
                                               std::to_string(y_pred.size()));
  }
  if (y_true.size() == 0) throw Error(ErrorCode::EmptySample, "cannot evaluate zero predictions");
  const auto n = static_cast<double>(y_true.size());
  const VectorXd err = y_pred - y_true;

  MetricSet m;
  m.mse = err.squaredNorm() / n;
  m.rmse = std::sqrt(m.mse);
  m.mae = err.cwiseAbs().sum() / n;
  m.r2 = r2_score(y_true, y_pred);
  m.percent_errors.resize(static_cast<std::size_t>(y_true.size()));
  for (Index i = 0; i < y_true.size(); ++i) {
    m.percent_errors[static_cast<std::size_t>(i)] =
        100.0 * std::fabs(err(i)) / std::max(std::fabs(y_true(i)), epsilon);
  }
  const auto stats = percent_error_stats(m.percent_errors);
  m.pe_mean = stats.mean;
  m.pe_median = stats.median;
  m.pe_std = stats.std;
  return m;
}

std::vector<Fold> kfold_indices(Index n, int k, std::uint64_t seed) {
  if (k < 2 || static_cast<Index>(k) > n) {
    throw Error(ErrorCode::BadK, "k = " + std::to_string(k) + " is invalid for n = " + std::to_string(n));
  }
  IndexList perm(static_cast<std::size_t>(n));
  std::iota(perm.begin(), perm.end(), Index{0});
  Rng rng(seed);
  rng.shuffle(perm);

  std::vector<int> fold_of(static_cast<std::size_t>(n));
  const Index base = n / k;
  const Index extra = n % k;
  Index pos = 0;
  for (int f = 0; f < k; ++f) {
    const Index size = base + (f < extra ? 1 : 0);
    for (Index i = 0; i < size; ++i) fold_of[static_cast<std::size_t>(perm[static_cast<std::size_t>(pos++)])] = f;
  }

  std::vector<Fold> folds(static_cast<std::size_t>(k));
  for (Index i = 0; i < n; ++i) {
    for (int f = 0; f < k; ++f) {
      auto& fold = folds[static_cast<std::size_t>(f)];
      (fold_of[static_cast<std::size_t>(i)] == f ? fold.valid : fold.train).push_back(i);
    }
  }
  return folds;
}

void parallel_for(std::size_t count, unsigned workers, const std::function<void(std::size_t)>& task) {
  if (workers <= 1 || count <= 1) {
    for (std::size_t i = 0; i < count; ++i) task(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  {
    std::vector<std::jthread> pool;
    const auto n_threads = std::min<std::size_t>(workers, count);
    for (std::size_t t = 0; t < n_threads; ++t) {
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < count; i = next++) {
          try {
            task(i);
          } catch (...) {
            std::lock_guard lock(failure_mutex);
            if (!failure) failure = std::current_exception();
          }
        }
      });
    }
  }
  if (failure) std::rethrow_exception(failure);
}

GridSearchResult grid_search(const MatrixXd& x, const VectorXd& y, const HyperGrid& grid, int k,
                             std::uint64_t seed, ParallelOptions parallel) {
  grid.validate();
  if (x.rows() != y.size()) throw Error(ErrorCode::DimensionMismatch, "feature rows != target length");
  const auto folds = kfold_indices(x.rows(), k, seed);

  std::vector<int> stages = grid.n_estimators;
  std::sort(stages.begin(), stages.end());
  stages.erase(std::unique(stages.begin(), stages.end()), stages.end());
  const int longest = stages.back();

  struct Group {
    double learning_rate;
    int max_depth;
  };
  std::vector<Group> groups;
  for (double lr : grid.learning_rate) {
    for (int d : grid.max_depth) groups.push_back({lr, d});
  }

  // [group][fold][stage] -> (mse, r2)
  const std::size_t n_folds = folds.size();
  std::vector<double> mse(groups.size() * n_folds * stages.size());
  std::vector<double> r2(mse.size());
  const auto at = [&](std::size_t g, std::size_t f, std::size_t s) {
    return (g * n_folds + f) * stages.size() + s;
  };

  parallel_for(groups.size() * n_folds, parallel.workers, [&](std::size_t task) {
    const std::size_t g = task / n_folds;
    const std::size_t f = task % n_folds;
    const MatrixXd xt = take_rows(x, folds[f].train);
    const VectorXd yt = take(y, folds[f].train);
    const MatrixXd xv = take_rows(x, folds[f].valid);
    const VectorXd yv = take(y, folds[f].valid);
    GbmParams p;
    p.n_estimators = longest;
    p.learning_rate = groups[g].learning_rate;
    p.max_depth = groups[g].max_depth;
    p.seed = seed;
    const GbmModel model = fit_gbm(xt, yt, p);
    const MatrixXd pred = model.predict_staged(xv, stages);
    for (std::size_t s = 0; s < stages.size(); ++s) {
      const auto col = pred.col(static_cast<Index>(s));
      mse[at(g, f, s)] = (col - yv).squaredNorm() / static_cast<double>(yv.size());
      r2[at(g, f, s)] = r2_score(yv, col).value_or(kNegInf);
    }
  });

  GridSearchResult out;
  for (const GbmConfig& cfg : enumerate(grid)) {
    const auto s = static_cast<std::size_t>(
        std::lower_bound(stages.begin(), stages.end(), cfg.n_estimators) - stages.begin());
    std::size_t g = 0;
    while (!(groups[g].learning_rate == cfg.learning_rate && groups[g].max_depth == cfg.max_depth)) ++g;
    CvResult cv;
    cv.config = cfg;
    for (std::size_t f = 0; f < n_folds; ++f) {
      cv.fold_losses.push_back(mse[at(g, f, s)]);
      cv.fold_r2.push_back(r2[at(g, f, s)]);
    }
    cv.mean_r2 = mean_of(cv.fold_r2);
    cv.mean_mse = mean_of(cv.fold_losses);
    out.results.push_back(std::move(cv));
  }
  out.models_evaluated = out.results.size() * n_folds;

  const auto key = [](const CvResult& r) {
    return std::make_tuple(-r.mean_r2, r.config.n_estimators, r.config.max_depth,
                           r.config.learning_rate);
  };
  const auto best = std::min_element(out.results.begin(), out.results.end(),
                                     [&](const CvResult& a, const CvResult& b) { return key(a) < key(b); });
  out.best = best->config;
  return out;
}

std::vector<VectorXd> cross_validate_predict(const MatrixXd& x, const VectorXd& y,
                                             const GbmConfig& config, const std::vector<Fold>& folds,
                                             ParallelOptions parallel) {
  if (x.rows() != y.size()) throw Error(ErrorCode::DimensionMismatch, "feature rows != target length");
  std::vector<VectorXd> out(folds.size());
  parallel_for(folds.size(), parallel.workers, [&](std::size_t f) {
    GbmParams p;
    p.n_estimators = config.n_estimators;
    p.learning_rate = config.learning_rate;
    p.max_depth = config.max_depth;
    const GbmModel model = fit_gbm(take_rows(x, folds[f].train), take(y, folds[f].train), p);
    out[f] = model.predict(take_rows(x, folds[f].valid));
  });
  return out;
}

CvResult cross_validate_model(const MatrixXd& x, const VectorXd& y, const GbmConfig& config,
                              const std::vector<Fold>& folds, ParallelOptions parallel) {
  const auto pred = cross_validate_predict(x, y, config, folds, parallel);
  CvResult cv;
  cv.config = config;
  for (std::size_t f = 0; f < folds.size(); ++f) {
    const VectorXd yv = take(y, folds[f].valid);
    cv.fold_losses.push_back((pred[f] - yv).squaredNorm() / static_cast<double>(yv.size()));
    cv.fold_r2.push_back(r2_score(yv, pred[f]).value_or(kNegInf));
  }
  cv.mean_r2 = mean_of(cv.fold_r2);
  cv.mean_mse = mean_of(cv.fold_losses);
  return cv;
}

CvResult cross_validate_model(const MatrixXd& x, const VectorXd& y, const GbmConfig& config, int k,
                              std::uint64_t seed, ParallelOptions parallel) {
  return cross_validate_model(x, y, config, kfold_indices(x.rows(), k, seed), parallel);
}

}  // namespace copaug
