#pragma once

#include "copaug/copula.hpp"
#include "copaug/core.hpp"
#include "copaug/data_model.hpp"
#include "copaug/model_select.hpp"
#include "copaug/stats_tests.hpp"

#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace copaug {

inline const std::vector<std::string> kBundledFeatures{"temp", "sal", "uvb"};
inline const std::string kBundledTarget{"chla"};
inline constexpr Index kBundledRows = 12657;

/// Desk-scale stand-in for a coastal high-frequency monitoring record.
///
/// Columns: temp (deg C, seasonal plus diurnal cycle), sal (PSU, tracks temp
/// inversely), uvb (mW/m^2, log-normal), chla (ug/L, logistic in temp with a
/// salinity and UV term and heteroscedastic log-normal noise). A random
/// `missing_fraction` of cells is blanked. All constants are fixed in
/// bundled_data.cpp and carry no claim about a real ecosystem.
Table make_bundled_dataset(Index n, std::uint64_t seed, double missing_fraction = 0.02);

struct ExperimentConfig {
  std::string input_path = "bundled";
  std::vector<std::string> features = kBundledFeatures;
  std::string target = kBundledTarget;
  Index bundled_rows = kBundledRows;
  double bundled_missing_fraction = 0.02;
  double split_ratio = 0.8;
  std::vector<Index> synthetic_levels{100, 250, 500, 750, 1000};
  int tuning_k = 5;
  int eval_k = 10;
  HyperGrid grid;
  int poly_degree = 2;
  double ks_alpha = 0.05;
  double pe_epsilon = kDefaultPercentEpsilon;
  double ridge_alpha = kDefaultRidgeAlpha;
  std::uint64_t master_seed = 42;

  void validate() const;
};

/// Single-point grid used for quick runs and CI.
HyperGrid fast_grid();

/// Strict parse: unknown keys and wrong types are InvalidConfig errors.
ExperimentConfig config_from_json(const std::string& text);
ExperimentConfig load_config(const std::filesystem::path& path);
std::string to_json_string(const ExperimentConfig& cfg);

/// Seeds derived from the master seed by fixed offsets.
struct DerivedSeeds {
  std::uint64_t data;
  std::uint64_t split;
  std::uint64_t copula;
  std::uint64_t tuning_cv;
  std::uint64_t eval_cv;
  std::uint64_t boosting;

  static DerivedSeeds from(std::uint64_t master);
  std::uint64_t level_sampling(Index level) const;
  std::uint64_t level_folds(Index level) const;
};

struct ModelEntry {
  std::string name;
  Index synthetic_rows = 0;
  Index train_rows = 0;
  GbmConfig best_config;
  std::vector<CvResult> tuning;
  MetricSet test;
  CvResult eval_cv;
  std::vector<Index> eval_fold_synthetic;  // synthetic rows in each validation fold
  std::vector<double> eval_real_fold_losses;  // fold MSE over real validation rows only
  std::optional<KsValidation> ks;
};

struct TtestEntry {
  std::string model;
  TtestOutcome outcome;
};

struct Provenance {
  std::uint64_t master_seed = 0;
  DerivedSeeds seeds{};
  std::string config_hash;
  std::string timestamp;
};

struct ExperimentResult {
  ExperimentConfig config;
  Index rows_loaded = 0;
  Index rows_clean = 0;
  Index train_rows = 0;
  Index test_rows = 0;
  MetricSet ridge_baseline;
  std::vector<ModelEntry> models;  // baseline first, then levels in order
  std::vector<TtestEntry> ttests;  // baseline vs each level
  Provenance provenance;
};

struct RunOptions {
  ParallelOptions parallel;
  std::function<void(const std::string&)> log;
};

ExperimentResult run_experiment(const ExperimentConfig& cfg, const RunOptions& options = {});

std::string model_name(Index synthetic_rows);

/// report.json body. The dump is stable: parsing and re-dumping it
/// reproduces the same bytes.
std::string report_json(const ExperimentResult& r);
ExperimentResult result_from_json(const std::string& text);

/// Writes report.json, metrics.csv, percent_error.csv, ttests.csv,
/// cv_folds.csv and pe_density.csv into `out_dir` (created if absent).
std::vector<std::filesystem::path> write_report(const ExperimentResult& r,
                                                const std::filesystem::path& out_dir);

/// Human-readable Model / MSE / RMSE / MAE table.
std::string summary_table(const ExperimentResult& r);

}  // namespace copaug
