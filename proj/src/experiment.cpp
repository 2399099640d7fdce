#include "copaug/experiment.hpp"

#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <limits>
#include <numeric>
#include <set>
#include <sstream>

namespace copaug {

using ojson = nlohmann::ordered_json;

namespace {

constexpr const char* kReportFormat = "copaug-report-v1";

template <typename F>
auto stage(const char* name, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const Error& e) {
    throw e.annotated(std::string("stage ") + name);
  }
}

// Non-finite doubles are encoded as strings so that reports stay valid JSON
// and round-trip exactly.
ojson num(double v) {
  if (std::isfinite(v)) return v;
  if (std::isnan(v)) return "nan";
  return v > 0 ? "inf" : "-inf";
}

double get_num(const ojson& j) {
  if (j.is_number()) return j.get<double>();
  if (j.is_string()) {
    const auto s = j.get<std::string>();
    if (s == "inf") return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
    if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
  }
  throw Error(ErrorCode::InvalidConfig, "expected a number, got " + j.dump());
}

ojson num_array(const std::vector<double>& v) {
  ojson a = ojson::array();
  for (double x : v) a.push_back(num(x));
  return a;
}

std::vector<double> get_num_array(const ojson& j) {
  std::vector<double> out;
  for (const auto& x : j) out.push_back(get_num(x));
  return out;
}

std::string format6(double v) {
  if (!std::isfinite(v)) return std::isnan(v) ? "nan" : (v > 0 ? "inf" : "-inf");
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

// ---- JSON pieces ----------------------------------------------------------------

ojson to_j(const HyperGrid& g) {
  return {{"n_estimators", g.n_estimators}, {"learning_rate", g.learning_rate}, {"max_depth", g.max_depth}};
}

ojson to_j(const GbmConfig& c) {
  return {{"n_estimators", c.n_estimators}, {"learning_rate", c.learning_rate}, {"max_depth", c.max_depth}};
}

GbmConfig gbm_config_from(const ojson& j) {
  return {j.at("n_estimators").get<int>(), j.at("learning_rate").get<double>(),
          j.at("max_depth").get<int>()};
}

ojson to_j(const ExperimentConfig& c) {
  return {{"input_path", c.input_path},
          {"features", c.features},
          {"target", c.target},
          {"bundled_rows", c.bundled_rows},
          {"bundled_missing_fraction", c.bundled_missing_fraction},
          {"split_ratio", c.split_ratio},
          {"synthetic_levels", c.synthetic_levels},
          {"tuning_k", c.tuning_k},
          {"eval_k", c.eval_k},
          {"grid", to_j(c.grid)},
          {"poly_degree", c.poly_degree},
          {"ks_alpha", c.ks_alpha},
          {"pe_epsilon", c.pe_epsilon},
          {"ridge_alpha", c.ridge_alpha},
          {"master_seed", c.master_seed}};
}

ojson to_j(const MetricSet& m) {
  ojson j;
  j["mse"] = num(m.mse);
  j["rmse"] = num(m.rmse);
  j["mae"] = num(m.mae);
  j["r2"] = m.r2 ? num(*m.r2) : ojson(nullptr);
  j["pe_mean"] = num(m.pe_mean);
  j["pe_median"] = num(m.pe_median);
  j["pe_std"] = num(m.pe_std);
  j["percent_errors"] = num_array(m.percent_errors);
  return j;
}

MetricSet metric_set_from(const ojson& j) {
  MetricSet m;
  m.mse = get_num(j.at("mse"));
  m.rmse = get_num(j.at("rmse"));
  m.mae = get_num(j.at("mae"));
  if (!j.at("r2").is_null()) m.r2 = get_num(j.at("r2"));
  m.pe_mean = get_num(j.at("pe_mean"));
  m.pe_median = get_num(j.at("pe_median"));
  m.pe_std = get_num(j.at("pe_std"));
  m.percent_errors = get_num_array(j.at("percent_errors"));
  return m;
}

ojson to_j(const CvResult& c) {
  return {{"config", to_j(c.config)},
          {"fold_losses", num_array(c.fold_losses)},
          {"fold_r2", num_array(c.fold_r2)},
          {"mean_r2", num(c.mean_r2)},
          {"mean_mse", num(c.mean_mse)}};
}

CvResult cv_from(const ojson& j) {
  CvResult c;
  c.config = gbm_config_from(j.at("config"));
  c.fold_losses = get_num_array(j.at("fold_losses"));
  c.fold_r2 = get_num_array(j.at("fold_r2"));
  c.mean_r2 = get_num(j.at("mean_r2"));
  c.mean_mse = get_num(j.at("mean_mse"));
  return c;
}

ojson to_j(const KsValidation& k) {
  ojson cols = ojson::array();
  for (std::size_t i = 0; i < k.columns.size(); ++i) {
    cols.push_back({{"column", k.columns[i]},
                    {"d_statistic", num(k.d_statistic[i])},
                    {"p_value", num(k.p_value[i])},
                    {"passed", static_cast<bool>(k.passed[i])}});
  }
  return {{"alpha", k.alpha}, {"all_passed", k.all_passed}, {"columns", std::move(cols)}};
}

KsValidation ks_from(const ojson& j) {
  KsValidation k;
  k.alpha = j.at("alpha").get<double>();
  k.all_passed = j.at("all_passed").get<bool>();
  for (const auto& c : j.at("columns")) {
    k.columns.push_back(c.at("column").get<std::string>());
    k.d_statistic.push_back(get_num(c.at("d_statistic")));
    k.p_value.push_back(get_num(c.at("p_value")));
    k.passed.push_back(c.at("passed").get<bool>());
  }
  return k;
}

ojson to_j(const TtestEntry& t) {
  return {{"model", t.model},
          {"t_statistic", num(t.outcome.t_statistic)},
          {"df", t.outcome.df},
          {"mean_diff", num(t.outcome.mean_diff)},
          {"p_value", num(t.outcome.p_value)},
          {"p_value_one_sided", num(t.outcome.p_value_one_sided)},
          {"zero_variance", t.outcome.zero_variance}};
}

TtestEntry ttest_from(const ojson& j) {
  TtestEntry t;
  t.model = j.at("model").get<std::string>();
  t.outcome.t_statistic = get_num(j.at("t_statistic"));
  t.outcome.df = j.at("df").get<Index>();
  t.outcome.mean_diff = get_num(j.at("mean_diff"));
  t.outcome.p_value = get_num(j.at("p_value"));
  t.outcome.p_value_one_sided = get_num(j.at("p_value_one_sided"));
  t.outcome.zero_variance = j.at("zero_variance").get<bool>();
  return t;
}

ojson to_j(const DerivedSeeds& s) {
  return {{"data", s.data},           {"split", s.split},       {"copula", s.copula},
          {"tuning_cv", s.tuning_cv}, {"eval_cv", s.eval_cv}, {"boosting", s.boosting}};
}

DerivedSeeds seeds_from(const ojson& j) {
  return {j.at("data").get<std::uint64_t>(),      j.at("split").get<std::uint64_t>(),
          j.at("copula").get<std::uint64_t>(),    j.at("tuning_cv").get<std::uint64_t>(),
          j.at("eval_cv").get<std::uint64_t>(),   j.at("boosting").get<std::uint64_t>()};
}

ojson to_j(const ModelEntry& m) {
  ojson tuning = ojson::array();
  for (const auto& c : m.tuning) tuning.push_back(to_j(c));
  ojson j;
  j["name"] = m.name;
  j["synthetic_rows"] = m.synthetic_rows;
  j["train_rows"] = m.train_rows;
  j["best_config"] = to_j(m.best_config);
  j["test"] = to_j(m.test);
  j["eval_cv"] = to_j(m.eval_cv);
  j["eval_fold_synthetic"] = m.eval_fold_synthetic;
  j["eval_real_fold_losses"] = num_array(m.eval_real_fold_losses);
  j["ks"] = m.ks ? to_j(*m.ks) : ojson(nullptr);
  j["tuning"] = std::move(tuning);
  return j;
}

ModelEntry model_from(const ojson& j) {
  ModelEntry m;
  m.name = j.at("name").get<std::string>();
  m.synthetic_rows = j.at("synthetic_rows").get<Index>();
  m.train_rows = j.at("train_rows").get<Index>();
  m.best_config = gbm_config_from(j.at("best_config"));
  m.test = metric_set_from(j.at("test"));
  m.eval_cv = cv_from(j.at("eval_cv"));
  m.eval_fold_synthetic = j.at("eval_fold_synthetic").get<std::vector<Index>>();
  m.eval_real_fold_losses = get_num_array(j.at("eval_real_fold_losses"));
  if (!j.at("ks").is_null()) m.ks = ks_from(j.at("ks"));
  for (const auto& c : j.at("tuning")) m.tuning.push_back(cv_from(c));
  return m;
}

ExperimentConfig config_from_object(const ojson& j) {
  static const std::set<std::string> known{
      "input_path", "features",    "target",   "bundled_rows", "bundled_missing_fraction",
      "split_ratio", "synthetic_levels", "tuning_k", "eval_k", "grid",
      "poly_degree", "ks_alpha",   "pe_epsilon", "ridge_alpha", "master_seed"};
  static const std::set<std::string> grid_keys{"n_estimators", "learning_rate", "max_depth"};
  if (!j.is_object()) throw Error(ErrorCode::InvalidConfig, "config must be a JSON object");
  for (const auto& [key, _] : j.items()) {
    if (!known.contains(key)) throw Error(ErrorCode::InvalidConfig, "unknown config key '" + key + "'");
  }
  ExperimentConfig c;
  try {
    if (j.contains("input_path")) c.input_path = j["input_path"].get<std::string>();
    if (j.contains("features")) c.features = j["features"].get<std::vector<std::string>>();
    if (j.contains("target")) c.target = j["target"].get<std::string>();
    if (j.contains("bundled_rows")) c.bundled_rows = j["bundled_rows"].get<Index>();
    if (j.contains("bundled_missing_fraction")) {
      c.bundled_missing_fraction = j["bundled_missing_fraction"].get<double>();
    }
    if (j.contains("split_ratio")) c.split_ratio = j["split_ratio"].get<double>();
    if (j.contains("synthetic_levels")) c.synthetic_levels = j["synthetic_levels"].get<std::vector<Index>>();
    if (j.contains("tuning_k")) c.tuning_k = j["tuning_k"].get<int>();
    if (j.contains("eval_k")) c.eval_k = j["eval_k"].get<int>();
    if (j.contains("grid")) {
      const auto& g = j["grid"];
      if (!g.is_object()) throw Error(ErrorCode::InvalidConfig, "grid must be an object");
      for (const auto& [key, _] : g.items()) {
        if (!grid_keys.contains(key)) throw Error(ErrorCode::InvalidConfig, "unknown grid key '" + key + "'");
      }
      if (g.contains("n_estimators")) c.grid.n_estimators = g["n_estimators"].get<std::vector<int>>();
      if (g.contains("learning_rate")) c.grid.learning_rate = g["learning_rate"].get<std::vector<double>>();
      if (g.contains("max_depth")) c.grid.max_depth = g["max_depth"].get<std::vector<int>>();
    }
    if (j.contains("poly_degree")) c.poly_degree = j["poly_degree"].get<int>();
    if (j.contains("ks_alpha")) c.ks_alpha = j["ks_alpha"].get<double>();
    if (j.contains("pe_epsilon")) c.pe_epsilon = j["pe_epsilon"].get<double>();
    if (j.contains("ridge_alpha")) c.ridge_alpha = j["ridge_alpha"].get<double>();
    if (j.contains("master_seed")) c.master_seed = j["master_seed"].get<std::uint64_t>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::InvalidConfig, e.what());
  }
  c.validate();
  return c;
}

MatrixXd column_block(const Table& t) { return t.features(); }

}  // namespace

// ---- Config -------------------------------------------------------------------

void ExperimentConfig::validate() const {
  if (features.empty()) throw Error(ErrorCode::InvalidConfig, "at least one feature is required");
  if (std::find(features.begin(), features.end(), target) != features.end()) {
    throw Error(ErrorCode::InvalidConfig, "target must not also be a feature");
  }
  if (!(split_ratio > 0.0 && split_ratio < 1.0)) throw Error(ErrorCode::InvalidConfig, "split_ratio must lie in (0, 1)");
  for (std::size_t i = 0; i < synthetic_levels.size(); ++i) {
    if (synthetic_levels[i] < 0) throw Error(ErrorCode::InvalidConfig, "synthetic levels must be non-negative");
    if (i > 0 && synthetic_levels[i] <= synthetic_levels[i - 1]) {
      throw Error(ErrorCode::InvalidConfig, "synthetic levels must be strictly increasing");
    }
  }
  if (tuning_k < 2 || eval_k < 2) throw Error(ErrorCode::InvalidConfig, "fold counts must be >= 2");
  grid.validate();
  if (poly_degree < 1) throw Error(ErrorCode::InvalidConfig, "poly_degree must be >= 1");
  if (!(ks_alpha > 0.0 && ks_alpha < 1.0)) throw Error(ErrorCode::InvalidConfig, "ks_alpha must lie in (0, 1)");
  if (!(pe_epsilon > 0.0)) throw Error(ErrorCode::InvalidConfig, "pe_epsilon must be > 0");
  if (!(ridge_alpha >= 0.0)) throw Error(ErrorCode::InvalidConfig, "ridge_alpha must be >= 0");
  if (input_path == "bundled" && bundled_rows < 100) {
    throw Error(ErrorCode::InvalidConfig, "bundled_rows must be >= 100");
  }
  if (!(bundled_missing_fraction >= 0.0 && bundled_missing_fraction < 1.0)) {
    throw Error(ErrorCode::InvalidConfig, "bundled_missing_fraction must lie in [0, 1)");
  }
}

HyperGrid fast_grid() { return HyperGrid{{100}, {0.1}, {3}}; }

ExperimentConfig config_from_json(const std::string& text) {
  ojson j;
  try {
    j = ojson::parse(text);
  } catch (const std::exception& e) {
    throw Error(ErrorCode::InvalidConfig, std::string("config is not valid JSON: ") + e.what());
  }
  return config_from_object(j);
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return config_from_json(ss.str());
}

std::string to_json_string(const ExperimentConfig& cfg) { return to_j(cfg).dump(2) + "\n"; }

DerivedSeeds DerivedSeeds::from(std::uint64_t master) {
  return {master, master + 1, master + 2, master + 3, master + 4, master + 5};
}

std::uint64_t DerivedSeeds::level_sampling(Index level) const {
  return data + 1000 + static_cast<std::uint64_t>(level);
}

std::uint64_t DerivedSeeds::level_folds(Index level) const {
  return data + 500000 + static_cast<std::uint64_t>(level);
}

std::string model_name(Index synthetic_rows) {
  return synthetic_rows == 0 ? "baseline" : "synthetic_" + std::to_string(synthetic_rows);
}

// ---- Pipeline -------------------------------------------------------------------

namespace {

/// Evaluation folds for an augmented table whose first `n_real` rows are the
/// real training rows. Real rows keep the baseline fold assignment so fold i
/// of every model shares the same real validation rows; synthetic rows are
/// dealt round-robin over a seeded permutation.
std::vector<Fold> matched_folds(Index n_real, Index n_synth, int k, std::uint64_t real_seed,
                                std::uint64_t synth_seed) {
  auto folds = kfold_indices(n_real, k, real_seed);
  if (n_synth == 0) return folds;
  IndexList perm(static_cast<std::size_t>(n_synth));
  std::iota(perm.begin(), perm.end(), n_real);
  Rng rng(synth_seed);
  rng.shuffle(perm);
  for (std::size_t p = 0; p < perm.size(); ++p) {
    folds[p % static_cast<std::size_t>(k)].valid.push_back(perm[p]);
  }
  for (auto& f : folds) {
    std::sort(f.valid.begin(), f.valid.end());
    f.train.clear();
    std::size_t v = 0;
    for (Index i = 0; i < n_real + n_synth; ++i) {
      if (v < f.valid.size() && f.valid[v] == i) {
        ++v;
      } else {
        f.train.push_back(i);
      }
    }
  }
  return folds;
}

IndexList rows_where(const std::vector<bool>& flags, bool value) {
  IndexList out;
  for (std::size_t i = 0; i < flags.size(); ++i) {
    if (flags[i] == value) out.push_back(static_cast<Index>(i));
  }
  return out;
}

}  // namespace

ExperimentResult run_experiment(const ExperimentConfig& cfg, const RunOptions& options) {
  cfg.validate();
  const auto log = [&](const std::string& msg) {
    if (options.log) options.log(msg);
  };
  const DerivedSeeds seeds = DerivedSeeds::from(cfg.master_seed);

  ExperimentResult result;
  result.config = cfg;
  result.provenance.master_seed = cfg.master_seed;
  result.provenance.seeds = seeds;
  result.provenance.config_hash = hex64(fnv1a(to_j(cfg).dump()));
  result.provenance.timestamp = utc_timestamp();

  std::vector<std::string> schema = cfg.features;
  schema.push_back(cfg.target);

  const Table raw = stage("load", [&] {
    if (cfg.input_path == "bundled") {
      const Table t = make_bundled_dataset(cfg.bundled_rows, seeds.data, cfg.bundled_missing_fraction);
      std::vector<Index> cols;
      for (const auto& name : schema) cols.push_back(t.column_index(name));
      MatrixXd v(t.n_rows(), static_cast<Index>(cols.size()));
      for (std::size_t k = 0; k < cols.size(); ++k) v.col(static_cast<Index>(k)) = t.values().col(cols[k]);
      return Table(schema, std::move(v), cfg.target);
    }
    return load_csv(cfg.input_path, schema, cfg.target);
  });
  result.rows_loaded = raw.n_rows();

  const Table clean = stage("clean", [&] { return drop_missing_target(raw); });
  result.rows_clean = clean.n_rows();

  const SplitPair split = stage("split", [&] { return train_test_split(clean, cfg.split_ratio, seeds.split); });
  const Imputer imputer = stage("impute", [&] { return fit_imputer(split.train); });
  const Table train = stage("impute", [&] { return apply_imputer(imputer, split.train); });
  const Table test = stage("impute", [&] { return apply_imputer(imputer, split.test); });
  result.train_rows = train.n_rows();
  result.test_rows = test.n_rows();
  log("data: " + std::to_string(result.rows_loaded) + " rows loaded, " +
      std::to_string(result.train_rows) + " train / " + std::to_string(result.test_rows) + " test");

  result.ridge_baseline = stage("ridge", [&] {
    const Standardizer s = fit_standardizer(train);
    const Table tr = apply_standardizer(s, train);
    const Table te = apply_standardizer(s, test);
    const RidgeModel ridge = fit_ridge(tr.features(), tr.target(), cfg.ridge_alpha);
    return evaluate(te.target(), ridge.predict(te.features()), cfg.pe_epsilon);
  });

  const bool need_copula =
      std::any_of(cfg.synthetic_levels.begin(), cfg.synthetic_levels.end(), [](Index l) { return l > 0; });
  std::optional<CopulaModel> copula;
  if (need_copula) copula = stage("fit-copula", [&] { return fit_copula(train, seeds.copula); });

  // Scaling is fitted on the expanded real training rows and shared by every
  // model, so all losses are on one target scale.
  const Table train_poly = stage("expand", [&] { return polynomial_expand(train, cfg.poly_degree); });
  const Table test_poly = stage("expand", [&] { return polynomial_expand(test, cfg.poly_degree); });
  const Standardizer scaler = stage("standardize", [&] { return fit_standardizer(train_poly); });
  const Table test_std = apply_standardizer(scaler, test_poly);
  const MatrixXd x_test = column_block(test_std);
  const VectorXd y_test = test_std.target();

  std::vector<Index> levels{0};
  for (Index l : cfg.synthetic_levels) {
    if (l > 0) levels.push_back(l);
  }

  for (Index level : levels) {
    const std::string name = model_name(level);
    const std::string tag = name;
    ModelEntry entry;
    entry.name = name;
    entry.synthetic_rows = level;

    Table augmented = train;
    if (level > 0) {
      augmented = stage(("augment " + tag).c_str(), [&] {
        Rng rng(seeds.level_sampling(level));
        return augment(train, *copula, level, rng);
      });
      entry.ks = stage(("ks " + tag).c_str(), [&] {
        return validate_synthetic(train, augmented.select_rows(rows_where(augmented.synthetic(), true)),
                                  cfg.ks_alpha);
      });
    }
    entry.train_rows = augmented.n_rows();

    const Table design = stage(("standardize " + tag).c_str(), [&] {
      return apply_standardizer(scaler, polynomial_expand(augmented, cfg.poly_degree));
    });
    const MatrixXd x = column_block(design);
    const VectorXd y = design.target();

    log(tag + ": grid search over " + std::to_string(cfg.grid.size()) + " configs x " +
        std::to_string(cfg.tuning_k) + " folds on " + std::to_string(x.rows()) + " rows");
    const GridSearchResult gs = stage(("grid-search " + tag).c_str(), [&] {
      return grid_search(x, y, cfg.grid, cfg.tuning_k, seeds.tuning_cv, options.parallel);
    });
    entry.best_config = gs.best;
    entry.tuning = gs.results;

    entry.test = stage(("evaluate " + tag).c_str(), [&] {
      GbmParams p;
      p.n_estimators = gs.best.n_estimators;
      p.learning_rate = gs.best.learning_rate;
      p.max_depth = gs.best.max_depth;
      p.seed = seeds.boosting;
      const GbmModel model = fit_gbm(x, y, p);
      return evaluate(y_test, model.predict(x_test), cfg.pe_epsilon);
    });

    entry.eval_cv = stage(("eval-cv " + tag).c_str(), [&] {
      const auto folds = matched_folds(train.n_rows(), level, cfg.eval_k, seeds.eval_cv,
                                       seeds.level_folds(level));
      for (const auto& f : folds) {
        entry.eval_fold_synthetic.push_back(static_cast<Index>(
            std::count_if(f.valid.begin(), f.valid.end(), [&](Index i) { return i >= train.n_rows(); })));
      }
      const auto pred = cross_validate_predict(x, y, gs.best, folds, options.parallel);
      CvResult cv;
      cv.config = gs.best;
      for (std::size_t f = 0; f < folds.size(); ++f) {
        double sse = 0.0;
        double sse_real = 0.0;
        Index n_real = 0;
        VectorXd yv(static_cast<Index>(folds[f].valid.size()));
        for (std::size_t r = 0; r < folds[f].valid.size(); ++r) {
          const Index i = folds[f].valid[r];
          yv(static_cast<Index>(r)) = y(i);
          const double e = pred[f](static_cast<Index>(r)) - y(i);
          sse += e * e;
          if (i < train.n_rows()) {
            sse_real += e * e;
            ++n_real;
          }
        }
        cv.fold_losses.push_back(sse / static_cast<double>(yv.size()));
        cv.fold_r2.push_back(r2_score(yv, pred[f]).value_or(-std::numeric_limits<double>::infinity()));
        entry.eval_real_fold_losses.push_back(sse_real / static_cast<double>(n_real));
      }
      cv.mean_r2 = std::accumulate(cv.fold_r2.begin(), cv.fold_r2.end(), 0.0) / static_cast<double>(folds.size());
      cv.mean_mse = std::accumulate(cv.fold_losses.begin(), cv.fold_losses.end(), 0.0) /
                    static_cast<double>(folds.size());
      return cv;
    });
    log(tag + ": best (" + std::to_string(gs.best.n_estimators) + ", " + format6(gs.best.learning_rate) +
        ", " + std::to_string(gs.best.max_depth) + "), test MSE " + format6(entry.test.mse) +
        ", CV MSE " + format6(entry.eval_cv.mean_mse));
    result.models.push_back(std::move(entry));
  }

  const auto& base_losses = result.models.front().eval_cv.fold_losses;
  for (std::size_t m = 1; m < result.models.size(); ++m) {
    result.ttests.push_back({result.models[m].name,
                             stage("t-test", [&] {
                               return paired_ttest(base_losses, result.models[m].eval_cv.fold_losses);
                             })});
  }
  return result;
}

// ---- Report ---------------------------------------------------------------------

std::string report_json(const ExperimentResult& r) {
  ojson j;
  j["format"] = kReportFormat;
  j["config"] = to_j(r.config);
  j["data"] = {{"rows_loaded", r.rows_loaded},
               {"rows_clean", r.rows_clean},
               {"train_rows", r.train_rows},
               {"test_rows", r.test_rows}};
  j["ridge_baseline"] = to_j(r.ridge_baseline);
  ojson models = ojson::array();
  for (const auto& m : r.models) models.push_back(to_j(m));
  j["models"] = std::move(models);
  ojson tt = ojson::array();
  for (const auto& t : r.ttests) tt.push_back(to_j(t));
  j["ttests"] = std::move(tt);
  j["provenance"] = {{"master_seed", r.provenance.master_seed},
                     {"seeds", to_j(r.provenance.seeds)},
                     {"config_hash", r.provenance.config_hash},
                     {"timestamp", r.provenance.timestamp}};
  return j.dump(2) + "\n";
}

ExperimentResult result_from_json(const std::string& text) {
  ojson j;
  try {
    j = ojson::parse(text);
  } catch (const std::exception& e) {
    throw Error(ErrorCode::InvalidConfig, std::string("report is not valid JSON: ") + e.what());
  }
  if (!j.is_object() || j.value("format", "") != kReportFormat) {
    throw Error(ErrorCode::InvalidConfig, std::string("expected a ") + kReportFormat + " document");
  }
  try {
    ExperimentResult r;
    r.config = config_from_object(j.at("config"));
    const auto& d = j.at("data");
    r.rows_loaded = d.at("rows_loaded").get<Index>();
    r.rows_clean = d.at("rows_clean").get<Index>();
    r.train_rows = d.at("train_rows").get<Index>();
    r.test_rows = d.at("test_rows").get<Index>();
    r.ridge_baseline = metric_set_from(j.at("ridge_baseline"));
    for (const auto& m : j.at("models")) r.models.push_back(model_from(m));
    for (const auto& t : j.at("ttests")) r.ttests.push_back(ttest_from(t));
    const auto& p = j.at("provenance");
    r.provenance.master_seed = p.at("master_seed").get<std::uint64_t>();
    r.provenance.seeds = seeds_from(p.at("seeds"));
    r.provenance.config_hash = p.at("config_hash").get<std::string>();
    r.provenance.timestamp = p.at("timestamp").get<std::string>();
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::InvalidConfig, std::string("malformed report: ") + e.what());
  }
}

std::vector<std::filesystem::path> write_report(const ExperimentResult& r,
                                                const std::filesystem::path& out_dir) {
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw Error(ErrorCode::IoError, out_dir.string() + ": " + ec.message());

  std::vector<std::filesystem::path> written;
  const auto emit = [&](const std::string& file, const std::string& body) {
    const auto path = out_dir / file;
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
    out << body;
    if (!out) throw Error(ErrorCode::IoError, "write failed for " + path.string());
    written.push_back(path);
  };

  emit("report.json", report_json(r));

  std::ostringstream metrics;
  metrics << "model,mse,rmse,mae,r2,cv_mse,cv_rmse\n";
  for (const auto& m : r.models) {
    metrics << m.name << ',' << format6(m.test.mse) << ',' << format6(m.test.rmse) << ','
            << format6(m.test.mae) << ',' << (m.test.r2 ? format6(*m.test.r2) : "") << ','
            << format6(m.eval_cv.mean_mse) << ',' << format6(std::sqrt(m.eval_cv.mean_mse)) << '\n';
  }
  emit("metrics.csv", metrics.str());

  std::ostringstream pe;
  pe << "model,pe_mean,pe_median,pe_std\n";
  for (const auto& m : r.models) {
    pe << m.name << ',' << format6(m.test.pe_mean) << ',' << format6(m.test.pe_median) << ','
       << format6(m.test.pe_std) << '\n';
  }
  emit("percent_error.csv", pe.str());

  std::ostringstream tt;
  tt << "comparison,t_statistic,df,mean_diff,p_value,p_value_one_sided,significant\n";
  for (const auto& t : r.ttests) {
    tt << "baseline_vs_" << t.model << ',' << format6(t.outcome.t_statistic) << ',' << t.outcome.df
       << ',' << format6(t.outcome.mean_diff) << ',' << format6(t.outcome.p_value) << ','
       << format6(t.outcome.p_value_one_sided) << ',' << (t.outcome.p_value < 0.05 ? "yes" : "no")
       << '\n';
  }
  emit("ttests.csv", tt.str());

  std::ostringstream folds;
  folds << "model,fold,mse,real_mse,synthetic_rows\n";
  for (const auto& m : r.models) {
    for (std::size_t f = 0; f < m.eval_cv.fold_losses.size(); ++f) {
      folds << m.name << ',' << f << ',' << format6(m.eval_cv.fold_losses[f]) << ','
            << (f < m.eval_real_fold_losses.size() ? format6(m.eval_real_fold_losses[f]) : "") << ','
            << (f < m.eval_fold_synthetic.size() ? m.eval_fold_synthetic[f] : 0) << '\n';
    }
  }
  emit("cv_folds.csv", folds.str());

  std::ostringstream density;
  density << "model,percent_error\n";
  for (const auto& m : r.models) {
    for (double v : m.test.percent_errors) density << m.name << ',' << format6(v) << '\n';
  }
  emit("pe_density.csv", density.str());
  return written;
}

std::string summary_table(const ExperimentResult& r) {
  std::ostringstream out;
  out << std::left << std::setw(16) << "Model" << std::right << std::setw(10) << "MSE"
      << std::setw(10) << "RMSE" << std::setw(10) << "MAE" << std::setw(10) << "R2"
      << std::setw(10) << "CV-MSE" << std::setw(12) << "p (t-test)" << '\n';
  for (std::size_t i = 0; i < r.models.size(); ++i) {
    const auto& m = r.models[i];
    std::string p = "-";
    for (const auto& t : r.ttests) {
      if (t.model == m.name) p = format6(t.outcome.p_value);
    }
    out << std::left << std::setw(16) << m.name << std::right << std::fixed << std::setprecision(4)
        << std::setw(10) << m.test.mse << std::setw(10) << m.test.rmse << std::setw(10) << m.test.mae
        << std::setw(10) << (m.test.r2 ? *m.test.r2 : std::numeric_limits<double>::quiet_NaN())
        << std::setw(10) << m.eval_cv.mean_mse << std::setw(12) << p << '\n';
    out.unsetf(std::ios::fixed);
  }
  out << "ridge baseline (test): MSE " << format6(r.ridge_baseline.mse) << ", RMSE "
      << format6(r.ridge_baseline.rmse) << ", MAE " << format6(r.ridge_baseline.mae) << '\n';
  return out.str();
}

}  // namespace copaug
