// copaug: command-line front end for the copula augmentation pipeline.
//
// Exit codes: 0 success, 1 pipeline error, 2 usage error, 3 KS validation
// failed.

#include "copaug/copula.hpp"
#include "copaug/data_model.hpp"
#include "copaug/experiment.hpp"

#include <CLI11.hpp>

#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <thread>

namespace {

using namespace copaug;

constexpr int kExitOk = 0;
constexpr int kExitError = 1;
constexpr int kExitUsage = 2;
constexpr int kExitValidation = 3;

std::optional<std::uint64_t> env_seed() {
  const char* v = std::getenv("COPAUG_SEED");
  if (v == nullptr || *v == '\0') return std::nullopt;
  try {
    std::size_t used = 0;
    const auto seed = std::stoull(v, &used);
    if (used != std::string(v).size()) throw std::invalid_argument(v);
    return seed;
  } catch (const std::exception&) {
    throw CLI::ValidationError("COPAUG_SEED", std::string("not an unsigned integer: ") + v);
  }
}

void print_copula(const CopulaModel& m) {
  std::cout << "columns: " << m.dims() << " (target " << m.target_name << ")\n";
  std::cout << std::left << std::setw(16) << "column" << std::right << std::setw(8) << "n"
            << std::setw(14) << "min" << std::setw(14) << "median" << std::setw(14) << "max" << '\n';
  for (Index j = 0; j < m.dims(); ++j) {
    const auto& mg = m.marginals[static_cast<std::size_t>(j)];
    std::cout << std::left << std::setw(16) << m.column_names[static_cast<std::size_t>(j)] << std::right
              << std::setw(8) << mg.size() << std::setw(14) << mg.min() << std::setw(14)
              << median(mg.sorted_values()) << std::setw(14) << mg.max() << '\n';
  }
  std::cout << "normal-score correlation:\n"
            << m.corr.format(Eigen::IOFormat(4, 0, "  ", "\n", "  ", "")) << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Gaussian-copula synthetic augmentation for tabular regression"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Show help for every subcommand");

  // generate-data
  auto* gen = app.add_subcommand("generate-data", "Write the bundled desk-scale dataset as CSV");
  Index gen_n = kBundledRows;
  std::uint64_t gen_seed = 42;
  double gen_missing = 0.02;
  std::string gen_out;
  gen->add_option("--n", gen_n, "Row count")->check(CLI::Range(Index{100}, Index{100000000}))->capture_default_str();
  gen->add_option("--seed", gen_seed, "Generator seed")->capture_default_str();
  gen->add_option("--missing-fraction", gen_missing, "Fraction of cells blanked")
      ->check(CLI::Range(0.0, 0.99))
      ->capture_default_str();
  gen->add_option("--out", gen_out, "Output CSV path")->required();

  // fit-copula
  auto* fit = app.add_subcommand("fit-copula", "Fit a Gaussian copula to a CSV and save it");
  std::string fit_in;
  std::string fit_out;
  std::string fit_target;
  std::uint64_t fit_seed = 42;
  fit->add_option("--input", fit_in, "Input CSV (rows with missing cells are dropped)")
      ->required()
      ->check(CLI::ExistingFile);
  fit->add_option("--out", fit_out, "Output model file (copula-v1)")->required();
  fit->add_option("--seed", fit_seed, "Seed stored with the model for sampling")->capture_default_str();
  fit->add_option("--target", fit_target, "Target column (default: last column)");

  // sample
  auto* smp = app.add_subcommand("sample", "Draw synthetic rows from a saved copula");
  std::string smp_model;
  Index smp_n = 0;
  std::string smp_out;
  std::optional<std::uint64_t> smp_seed;
  smp->add_option("--model", smp_model, "copula-v1 model file")->required()->check(CLI::ExistingFile);
  smp->add_option("--n", smp_n, "Number of rows (>= 1)")->required()->check(CLI::PositiveNumber);
  smp->add_option("--out", smp_out, "Output CSV path")->required();
  smp->add_option("--seed", smp_seed, "Override the model's stored seed");

  // ks-test
  auto* ks = app.add_subcommand("ks-test", "Per-column two-sample KS test of synthetic vs real CSV");
  std::string ks_real;
  std::string ks_synth;
  double ks_alpha = 0.05;
  ks->add_option("--real", ks_real, "Real-data CSV")->required()->check(CLI::ExistingFile);
  ks->add_option("--synth", ks_synth, "Synthetic-data CSV")->required()->check(CLI::ExistingFile);
  ks->add_option("--alpha", ks_alpha, "Significance level")->check(CLI::Range(0.0, 1.0))->capture_default_str();

  // run
  auto* run = app.add_subcommand("run", "Run the full augmentation sweep and write the report");
  std::string run_config;
  std::string run_input;
  std::vector<Index> run_levels;
  std::optional<std::uint64_t> run_seed;
  std::optional<Index> run_rows;
  bool run_fast = false;
  bool run_quiet = false;
  std::string run_out = "results";
  unsigned run_workers = std::max(1u, std::thread::hardware_concurrency());
  run->add_option("--config", run_config, "Experiment config (JSON)")->check(CLI::ExistingFile);
  run->add_option("--input", run_input, "Input CSV, or 'bundled'");
  run->add_option("--levels", run_levels, "Synthetic volumes, comma separated")->delimiter(',');
  run->add_option("--seed", run_seed, "Master seed (overrides config and COPAUG_SEED)");
  run->add_option("--rows", run_rows, "Row count for the bundled dataset");
  run->add_flag("--fast", run_fast, "Use a single-point grid (100, 0.1, 3)");
  run->add_option("--out", run_out, "Output directory")->capture_default_str();
  run->add_option("--workers", run_workers, "Worker threads")->check(CLI::PositiveNumber)->capture_default_str();
  run->add_flag("--quiet", run_quiet, "Suppress progress on standard error");

  // report
  auto* rep = app.add_subcommand("report", "Print the summary of a report.json and optionally rewrite its CSVs");
  std::string rep_from;
  std::string rep_out;
  rep->add_option("--from", rep_from, "report.json produced by run")->required()->check(CLI::ExistingFile);
  rep->add_option("--out", rep_out, "Directory to rewrite the report files into");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (*gen) {
      write_csv(make_bundled_dataset(gen_n, gen_seed, gen_missing), gen_out);
      std::cout << "wrote " << gen_n << " rows to " << gen_out << '\n';
      return kExitOk;
    }

    if (*fit) {
      const Table raw = fit_target.empty() ? load_csv(fit_in) : load_csv(fit_in, fit_target);
      IndexList complete;
      for (Index i = 0; i < raw.n_rows(); ++i) {
        if (!raw.missing().row(i).any()) complete.push_back(i);
      }
      const CopulaModel m = fit_copula(raw.select_rows(complete), fit_seed);
      save_copula(m, fit_out);
      print_copula(m);
      std::cout << "wrote " << fit_out << '\n';
      return kExitOk;
    }

    if (*smp) {
      const CopulaModel m = load_copula(smp_model);
      Rng rng(smp_seed.value_or(m.seed));
      write_csv(sample_synthetic(m, smp_n, rng), smp_out);
      std::cout << "wrote " << smp_n << " rows to " << smp_out << '\n';
      return kExitOk;
    }

    if (*ks) {
      const Table real = load_csv(ks_real);
      const Table synth = load_csv(ks_synth, real.target_name());
      const KsValidation v = validate_synthetic(real, synth, ks_alpha);
      std::cout << std::left << std::setw(16) << "column" << std::right << std::setw(12) << "D"
                << std::setw(14) << "p" << std::setw(8) << "pass" << '\n';
      for (std::size_t j = 0; j < v.columns.size(); ++j) {
        std::cout << std::left << std::setw(16) << v.columns[j] << std::right << std::setw(12)
                  << std::setprecision(6) << v.d_statistic[j] << std::setw(14) << v.p_value[j]
                  << std::setw(8) << (v.passed[j] ? "yes" : "no") << '\n';
      }
      std::cout << (v.all_passed ? "all columns pass" : "some columns fail") << " at alpha = " << ks_alpha
                << '\n';
      return v.all_passed ? kExitOk : kExitValidation;
    }

    if (*run) {
      ExperimentConfig cfg = run_config.empty() ? ExperimentConfig{} : load_config(run_config);
      if (const auto s = env_seed()) cfg.master_seed = *s;
      if (run_seed) cfg.master_seed = *run_seed;
      if (!run_input.empty()) cfg.input_path = run_input;
      if (run->count("--levels") > 0) cfg.synthetic_levels = run_levels;
      if (run_rows) cfg.bundled_rows = *run_rows;
      if (run_fast) cfg.grid = fast_grid();
      try {
        cfg.validate();
      } catch (const Error& e) {
        std::cerr << "copaug run: " << e.what() << '\n';
        return kExitUsage;
      }

      RunOptions opts;
      opts.parallel.workers = run_workers;
      if (!run_quiet) opts.log = [](const std::string& msg) { std::cerr << "[copaug] " << msg << '\n'; };
      const ExperimentResult result = run_experiment(cfg, opts);
      const auto files = write_report(result, run_out);
      std::cout << summary_table(result);
      std::cout << "wrote " << files.size() << " files to " << run_out << '\n';
      return kExitOk;
    }

    if (*rep) {
      std::ifstream in(rep_from);
      std::stringstream ss;
      ss << in.rdbuf();
      const ExperimentResult result = result_from_json(ss.str());
      std::cout << summary_table(result);
      if (!rep_out.empty()) {
        const auto files = write_report(result, rep_out);
        std::cout << "wrote " << files.size() << " files to " << rep_out << '\n';
      }
      return kExitOk;
    }
  } catch (const CLI::ValidationError& e) {
    std::cerr << "copaug: " << e.what() << '\n';
    return kExitUsage;
  } catch (const Error& e) {
    std::cerr << "copaug: " << e.what() << '\n';
    return kExitError;
  } catch (const std::exception& e) {
    std::cerr << "copaug: " << e.what() << '\n';
    return kExitError;
  }
  return kExitUsage;
}
