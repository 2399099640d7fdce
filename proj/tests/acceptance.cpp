// Acceptance checks. Prints one PASS/FAIL line per criterion and exits
// non-zero if any fails.

#include "copaug/copula.hpp"
#include "copaug/experiment.hpp"
#include "copaug/learners.hpp"
#include "copaug/model_select.hpp"
#include "copaug/stats_tests.hpp"
#include "copaug/distributions.hpp"

#include "oracles.hpp"

#include <sys/wait.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <iostream>
#include <numeric>
#include <set>
#include <sstream>
#include <string>
#include <thread>

using namespace copaug;

namespace {

struct Outcome {
  bool pass;
  std::string detail;
};

std::string fmt(const char* f, double a, double b = 0.0, double c = 0.0) {
  char buf[256];
  std::snprintf(buf, sizeof(buf), f, a, b, c);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string strip_timestamp(std::string s) {
  const auto at = s.find("\"timestamp\"");
  if (at == std::string::npos) return s;
  const auto open = s.find('"', s.find(':', at));
  const auto end = s.find('"', open + 1);
  return s.erase(at, end - at + 1);
}

unsigned workers() { return std::max(1u, std::thread::hardware_concurrency()); }

// Shared by the consistency and directional checks.
const ExperimentResult& default_run(double* elapsed = nullptr) {
  static double secs = 0.0;
  static const ExperimentResult r = [] {
    const auto t0 = std::chrono::steady_clock::now();
    RunOptions opts;
    opts.parallel.workers = workers();
    ExperimentResult out = run_experiment(ExperimentConfig{}, opts);
    secs = seconds_since(t0);
    std::filesystem::create_directories(COPAUG_TEST_TMP);
    write_report(out, std::filesystem::path(COPAUG_TEST_TMP) / "default_run");
    return out;
  }();
  if (elapsed != nullptr) *elapsed = secs;
  return r;
}

Outcome rmse_consistency() {
  const ExperimentResult& r = default_run();
  double worst = 0.0;
  std::size_t sets = 0;
  auto check = [&](const MetricSet& m) {
    ++sets;
    if (m.mse > 0) worst = std::max(worst, std::fabs(m.rmse * m.rmse - m.mse) / m.mse);
  };
  check(r.ridge_baseline);
  for (const auto& m : r.models) check(m.test);
  const double published = std::sqrt(0.2215);
  const bool pair_ok = std::fabs(published - 0.4706) <= 5e-4;
  return {worst <= 1e-12 && pair_ok,
          std::to_string(sets) + " metric sets, worst rel |rmse^2-mse| " + fmt("%.2e", worst) +
              ", sqrt(0.2215) = " + fmt("%.5f", published)};
}

Outcome directional() {
  double secs = 0.0;
  const ExperimentResult& r = default_run(&secs);
  const double base = r.models.at(0).eval_cv.mean_mse;
  bool lower = true;
  bool significant = false;
  std::string detail = "baseline cv_mse " + fmt("%.5f", base);
  for (const Index level : {Index{100}, Index{250}}) {
    for (std::size_t i = 1; i < r.models.size(); ++i) {
      if (r.models[i].synthetic_rows != level) continue;
      const double mse = r.models[i].eval_cv.mean_mse;
      const TtestOutcome& t = r.ttests.at(i - 1).outcome;
      lower = lower && mse < base;
      significant = significant || (mse < base && t.p_value < 0.05);
      detail += "; " + r.models[i].name + " cv_mse " + fmt("%.5f", mse) + " p " + fmt("%.3g", t.p_value);
    }
  }
  detail += "; default grid " + fmt("%.1f s", secs);
  return {lower && significant && secs <= 900.0, detail};
}

Outcome fast_grid_runtime(double fast_secs) {
  return {fast_secs <= 60.0, "run --fast on 12657 rows took " + fmt("%.1f s", fast_secs)};
}

Outcome ks_oracle() {
  Rng rng(2718);
  int mismatches = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    std::vector<double> a(1 + rng.below(50));
    std::vector<double> b(1 + rng.below(50));
    const bool discrete = trial % 2 == 0;
    for (auto& v : a) v = discrete ? static_cast<double>(rng.below(8)) : rng.normal();
    for (auto& v : b) v = discrete ? static_cast<double>(rng.below(8)) : 0.5 * rng.normal() + 0.2;
    if (ks_two_sample(a, b).d_statistic != testing::brute_force_d(a, b)) ++mismatches;
  }
  return {mismatches == 0, std::to_string(mismatches) + " mismatches in 1000 pairs"};
}

Table complete_bundled() {
  const Table raw = make_bundled_dataset(kBundledRows, 42);
  IndexList keep;
  for (Index i = 0; i < raw.n_rows(); ++i) {
    if (!raw.missing().row(i).any()) keep.push_back(i);
  }
  return raw.select_rows(keep);
}

Outcome ks_fidelity() {
  const Table real = complete_bundled();
  const CopulaModel m = fit_copula(real, 44);
  Rng rng(1000);
  const Table synth = sample_synthetic(m, 1000, rng);
  const KsValidation v = validate_synthetic(real, synth, 0.01);
  std::string detail;
  for (std::size_t j = 0; j < v.columns.size(); ++j) {
    detail += (j ? ", " : "") + v.columns[j] + " p=" + fmt("%.3f", v.p_value[j]);
  }
  return {v.all_passed, detail};
}

Outcome correlation() {
  const CopulaModel m = fit_copula(complete_bundled(), 44);
  Rng rng(20000);
  const MatrixXd z = sample_normal_scores(m, 20000, rng);
  const MatrixXd c = z.rowwise() - z.colwise().mean();
  const MatrixXd cov = c.transpose() * c / static_cast<double>(z.rows());
  const VectorXd sd = cov.diagonal().cwiseSqrt();
  const double worst = (cov.cwiseQuotient(sd * sd.transpose()) - m.corr).cwiseAbs().maxCoeff();
  return {worst <= 0.03, "max |sample - fitted| = " + fmt("%.4f", worst)};
}

Outcome t_distribution() {
  double worst = 0.0;
  for (double df : {1.0, 4.0, 9.0, 30.0}) {
    for (double t = -15.0; t <= 15.0; t += 0.25) {
      worst = std::max(worst, std::fabs(student_t_cdf(t, df) - testing::t_cdf_quadrature(t, df)));
    }
  }
  const std::vector<double> d{1.2, 0.8, 1.1, 0.9, 1.0};
  const std::vector<double> zero(5, 0.0);
  const TtestOutcome o = paired_ttest(d, zero);
  const double rel = std::fabs(o.p_value - 1.45e-4) / 1.45e-4;
  return {worst <= 1e-8 && rel <= 0.01 && std::fabs(o.t_statistic - 14.14) < 0.01,
          "max CDF error " + fmt("%.2e", worst) + ", worked example t=" + fmt("%.4f", o.t_statistic) +
              " p=" + fmt("%.4e", o.p_value)};
}

Outcome gbm_sanity() {
  Rng rng(31415);
  int bad_stage = 0;
  double worst_mean = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const Index n = 10 + static_cast<Index>(rng.below(90));
    const Index f = 1 + static_cast<Index>(rng.below(4));
    MatrixXd x(n, f);
    VectorXd y(n);
    for (Index i = 0; i < n; ++i) {
      for (Index j = 0; j < f; ++j) x(i, j) = rng.normal();
      y(i) = std::sin(2 * x(i, 0)) + (f > 1 ? x(i, 1) * x(i, 1) : 0.0) + 0.3 * rng.normal();
    }
    GbmParams p;
    p.n_estimators = 50;
    p.learning_rate = 0.01 + 0.99 * rng.uniform();
    p.max_depth = 1 + static_cast<int>(rng.below(5));
    const GbmModel m = fit_gbm(x, y, p);
    for (std::size_t s = 1; s < m.train_mse().size(); ++s) {
      if (m.train_mse()[s] > m.train_mse()[s - 1] * (1 + 1e-12) + 1e-15) ++bad_stage;
    }
    p.n_estimators = 0;
    const VectorXd pred = fit_gbm(x, y, p).predict(x);
    const double mean = std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(n);
    worst_mean = std::max(worst_mean, (pred.array() - mean).abs().maxCoeff());
  }
  MatrixXd x(4, 1);
  x << 1, 2, 3, 4;
  VectorXd y(4);
  y << 0, 0, 1, 1;
  const TreeFit t = fit_tree(x, y, {1, 2, 1});
  const double sse = (t.tree.predict(x) - y).squaredNorm();
  const bool split_ok = t.tree.nodes().size() == 3 && t.tree.nodes()[0].threshold == 2.5 && sse == 0.0;
  return {bad_stage == 0 && worst_mean <= 1e-12 && split_ok,
          std::to_string(bad_stage) + " increasing stages, zero-tree mean error " + fmt("%.1e", worst_mean) +
              ", stump threshold " + fmt("%.2f", t.tree.nodes()[0].threshold) + " SSE " + fmt("%.1f", sse)};
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string("'") + COPAUG_CLI + "' " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

Outcome determinism(double* fast_secs) {
  const std::filesystem::path dir = COPAUG_TEST_TMP;
  std::filesystem::create_directories(dir);
  const auto t0 = std::chrono::steady_clock::now();
  const int a = run_cli("run --fast --seed 42 --quiet --out '" + (dir / "det_a").string() + "'");
  *fast_secs = seconds_since(t0);
  const int b = run_cli("run --fast --seed 42 --quiet --out '" + (dir / "det_b").string() + "'");
  const std::string ra = read_file(dir / "det_a" / "report.json");
  const std::string rb = read_file(dir / "det_b" / "report.json");
  const bool same = !ra.empty() && strip_timestamp(ra) == strip_timestamp(rb);
  return {a == 0 && b == 0 && same,
          "exit codes " + std::to_string(a) + "/" + std::to_string(b) + ", report.json " +
              (same ? "identical" : "differs") + " excluding timestamp"};
}

Outcome partitions() {
  Rng rng(500);
  int failures = 0;
  for (int trial = 0; trial < 500; ++trial) {
    const Index n = 2 + static_cast<Index>(rng.below(1000));
    const int k = 2 + static_cast<int>(rng.below(static_cast<std::uint64_t>(std::min<Index>(n, 30) - 1)));
    const auto folds = kfold_indices(n, k, rng.next());
    std::vector<int> seen(static_cast<std::size_t>(n), 0);
    std::size_t lo = SIZE_MAX;
    std::size_t hi = 0;
    bool ok = folds.size() == static_cast<std::size_t>(k);
    for (const Fold& f : folds) {
      lo = std::min(lo, f.valid.size());
      hi = std::max(hi, f.valid.size());
      ok = ok && f.train.size() + f.valid.size() == static_cast<std::size_t>(n);
      std::set<Index> v(f.valid.begin(), f.valid.end());
      for (Index i : f.train) ok = ok && v.count(i) == 0;
      for (Index i : f.valid) ++seen[static_cast<std::size_t>(i)];
    }
    for (int c : seen) ok = ok && c == 1;
    ok = ok && hi - lo <= 1;

    MatrixXd m(n, 2);
    for (Index i = 0; i < n; ++i) m.row(i) << static_cast<double>(i), 0.0;
    const SplitPair s = train_test_split(Table({"x", "y"}, m, "y"), 0.1 + 0.8 * rng.uniform(), rng.next());
    std::set<Index> all(s.train_rows.begin(), s.train_rows.end());
    for (Index i : s.test_rows) ok = ok && all.insert(i).second;
    ok = ok && static_cast<Index>(all.size()) == n && !s.train_rows.empty() && !s.test_rows.empty();
    if (!ok) ++failures;
  }
  return {failures == 0, std::to_string(failures) + " failing (n, k) combinations of 500"};
}

}  // namespace

int main() {
  int failed = 0;
  auto report = [&](const std::string& name, const std::function<Outcome()>& check) {
    Outcome o;
    try {
      o = check();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    if (!o.pass) ++failed;
    std::cout << (o.pass ? "PASS " : "FAIL ") << name << " : " << o.detail << std::endl;
  };

  double fast_secs = 0.0;
  report("ks-oracle-equivalence", ks_oracle);
  report("ks-fidelity-gate", ks_fidelity);
  report("copula-correlation-preservation", correlation);
  report("t-distribution-accuracy", t_distribution);
  report("gbm-sanity", gbm_sanity);
  report("split-partition-invariants", partitions);
  report("determinism", [&] { return determinism(&fast_secs); });
  report("fast-grid-runtime", [&] { return fast_grid_runtime(fast_secs); });
  report("rmse-mse-consistency", rmse_consistency);
  report("directional-reproduction", directional);

  std::cout << (failed == 0 ? "all criteria pass" : std::to_string(failed) + " criteria fail") << std::endl;
  return failed == 0 ? 0 : 1;
}
