#pragma once

#include "copaug/core.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace copaug {

/// Column-major numeric table with one designated target column.
///
/// Missing cells hold NaN and are flagged in `missing()`; every statistic in
/// this library consults the mask, never the sentinel. Rows can carry a
/// synthetic-provenance flag, set by `augment`.
class Table {
 public:
  Table() = default;

  /// Builds a table and derives the missing mask from NaN cells.
  Table(std::vector<std::string> column_names, MatrixXd values, std::string target_name);

  Table(std::vector<std::string> column_names, MatrixXd values, ArrayXXb missing,
        std::string target_name, std::vector<bool> synthetic = {});

  Index n_rows() const { return values_.rows(); }
  Index n_cols() const { return values_.cols(); }

  const std::vector<std::string>& column_names() const { return names_; }
  const std::string& target_name() const { return target_; }
  const MatrixXd& values() const { return values_; }
  const ArrayXXb& missing() const { return missing_; }
  const std::vector<bool>& synthetic() const { return synthetic_; }

  Index column_index(const std::string& name) const;
  Index target_index() const { return target_index_; }
  std::vector<Index> feature_indices() const;
  std::vector<std::string> feature_names() const;

  bool is_missing(Index row, Index col) const { return missing_(row, col); }
  bool has_missing() const { return missing_.any(); }
  Index synthetic_count() const;

  auto column(Index j) const { return values_.col(j); }
  MatrixXd features() const;
  VectorXd target() const { return values_.col(target_index_); }

  Table select_rows(const IndexList& rows) const;

  /// Same row-schema comparison used by augment/KS validation.
  bool same_schema(const Table& other) const;

 private:
  void validate();

  std::vector<std::string> names_;
  MatrixXd values_;
  ArrayXXb missing_;
  std::string target_;
  Index target_index_ = -1;
  std::vector<bool> synthetic_;
};

struct SplitPair {
  Table train;
  Table test;
  IndexList train_rows;
  IndexList test_rows;
  double split_ratio = 0.8;
  std::uint64_t seed = 0;
};

struct Imputer {
  std::vector<std::string> columns;
  VectorXd medians;
};

struct Standardizer {
  static constexpr double kConstantThreshold = 1e-12;

  std::vector<std::string> columns;
  VectorXd means;
  VectorXd stds;

  bool is_constant(Index j) const { return stds(j) < kConstantThreshold; }
};

// ---- CSV -------------------------------------------------------------------

/// Reads `path`, keeping `schema` columns in schema order. Blank or
/// non-numeric cells become missing.
Table load_csv(const std::filesystem::path& path, const std::vector<std::string>& schema,
               const std::string& target);

/// Reads every header column; `target` defaults to the last column.
Table load_csv(const std::filesystem::path& path, std::optional<std::string> target = {});

/// Missing cells are written as empty fields; values use shortest round-trip form.
void write_csv(const Table& t, const std::filesystem::path& path);

// ---- Preprocessing ----------------------------------------------------------

Table drop_missing_target(const Table& t);

Imputer fit_imputer(const Table& train);
Table apply_imputer(const Imputer& im, const Table& t);

SplitPair train_test_split(const Table& t, double ratio, std::uint64_t seed);

Standardizer fit_standardizer(const Table& train);
Table apply_standardizer(const Standardizer& s, const Table& t);
Table invert_standardizer(const Standardizer& s, const Table& t);

inline constexpr Index kDefaultMaxPolyColumns = 1000;

/// Monomials of the feature columns of total degree 1..degree, graded
/// lexicographic, no constant term. The target column is carried through
/// last.
Table polynomial_expand(const Table& t, int degree, Index max_columns = kDefaultMaxPolyColumns);

/// Number of monomials of degree 1..degree in `features` variables.
Index polynomial_output_count(Index features, int degree);

// ---- Small statistics shared across modules ---------------------------------

/// Median with the mean-of-middle-pair rule for even counts.
double median(std::vector<double> values);

/// Mean that is exact for constant input.
double stable_mean(const Eigen::Ref<const VectorXd>& v);

}  // namespace copaug
