#include "copaug/data_model.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>
#include <string_view>

namespace copaug {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) {
    s.remove_suffix(1);
  }
  if (s.size() >= 2 && s.front() == '"' && s.back() == '"') s = s.substr(1, s.size() - 2);
  return s;
}

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    const auto pos = line.find(',', start);
    if (pos == std::string_view::npos) {
      out.push_back(trim(line.substr(start)));
      return out;
    }
    out.push_back(trim(line.substr(start, pos - start)));
    start = pos + 1;
  }
}

std::optional<double> parse_number(std::string_view s) {
  if (s.empty()) return std::nullopt;
  if (s.front() == '+') s.remove_prefix(1);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size() || !std::isfinite(v)) return std::nullopt;
  return v;
}

bool blank(const std::string& line) {
  return std::all_of(line.begin(), line.end(),
                     [](char c) { return c == ' ' || c == '\t' || c == '\r'; });
}

std::string format_double(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

void combinations(Index features, int degree, Index first, std::vector<Index>& current,
                  std::vector<std::vector<Index>>& out) {
  if (static_cast<int>(current.size()) == degree) {
    out.push_back(current);
    return;
  }
  for (Index f = first; f < features; ++f) {
    current.push_back(f);
    combinations(features, degree, f, current, out);
    current.pop_back();
  }
}

std::string monomial_name(const std::vector<Index>& term, const std::vector<std::string>& names) {
  std::string name;
  std::size_t i = 0;
  while (i < term.size()) {
    std::size_t j = i;
    while (j < term.size() && term[j] == term[i]) ++j;
    if (!name.empty()) name += '*';
    name += names[term[i]];
    if (j - i > 1) name += "^" + std::to_string(j - i);
    i = j;
  }
  return name;
}

double binomial(Index n, Index k) {
  double r = 1.0;
  for (Index i = 1; i <= k; ++i) r = r * static_cast<double>(n - k + i) / static_cast<double>(i);
  return r;
}

}  // namespace

// ---- Table -----------------------------------------------------------------

Table::Table(std::vector<std::string> column_names, MatrixXd values, std::string target_name)
    : names_(std::move(column_names)), values_(std::move(values)), target_(std::move(target_name)) {
  missing_ = values_.array().isNaN();
  validate();
}

Table::Table(std::vector<std::string> column_names, MatrixXd values, ArrayXXb missing,
             std::string target_name, std::vector<bool> synthetic)
    : names_(std::move(column_names)),
      values_(std::move(values)),
      missing_(std::move(missing)),
      target_(std::move(target_name)),
      synthetic_(std::move(synthetic)) {
  validate();
}

void Table::validate() {
  if (static_cast<Index>(names_.size()) != values_.cols()) {
    throw Error(ErrorCode::DimensionMismatch, "column name count does not match value columns");
  }
  if (missing_.rows() != values_.rows() || missing_.cols() != values_.cols()) {
    throw Error(ErrorCode::DimensionMismatch, "missing mask shape does not match values");
  }
  if (synthetic_.empty()) {
    synthetic_.assign(static_cast<std::size_t>(values_.rows()), false);
  } else if (static_cast<Index>(synthetic_.size()) != values_.rows()) {
    throw Error(ErrorCode::DimensionMismatch, "provenance flags do not match row count");
  }
  const auto it = std::find(names_.begin(), names_.end(), target_);
  if (it == names_.end()) throw Error(ErrorCode::MissingColumn, target_);
  if (std::count(names_.begin(), names_.end(), target_) != 1) {
    throw Error(ErrorCode::SchemaMismatch, "target column '" + target_ + "' is not unique");
  }
  target_index_ = static_cast<Index>(it - names_.begin());
  for (Index j = 0; j < values_.cols(); ++j) {
    for (Index i = 0; i < values_.rows(); ++i) {
      if (missing_(i, j)) values_(i, j) = kNaN;
    }
  }
}

Index Table::column_index(const std::string& name) const {
  const auto it = std::find(names_.begin(), names_.end(), name);
  if (it == names_.end()) throw Error(ErrorCode::MissingColumn, name);
  return static_cast<Index>(it - names_.begin());
}

std::vector<Index> Table::feature_indices() const {
  std::vector<Index> out;
  for (Index j = 0; j < n_cols(); ++j) {
    if (j != target_index_) out.push_back(j);
  }
  return out;
}

std::vector<std::string> Table::feature_names() const {
  std::vector<std::string> out;
  for (Index j : feature_indices()) out.push_back(names_[j]);
  return out;
}

Index Table::synthetic_count() const {
  return static_cast<Index>(std::count(synthetic_.begin(), synthetic_.end(), true));
}

MatrixXd Table::features() const {
  const auto idx = feature_indices();
  MatrixXd x(n_rows(), static_cast<Index>(idx.size()));
  for (std::size_t k = 0; k < idx.size(); ++k) x.col(static_cast<Index>(k)) = values_.col(idx[k]);
  return x;
}

Table Table::select_rows(const IndexList& rows) const {
  MatrixXd v(static_cast<Index>(rows.size()), n_cols());
  ArrayXXb m(static_cast<Index>(rows.size()), n_cols());
  std::vector<bool> syn(rows.size());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const Index src = rows[r];
    if (src < 0 || src >= n_rows()) throw Error(ErrorCode::InvalidArgument, "row index out of range");
    v.row(static_cast<Index>(r)) = values_.row(src);
    m.row(static_cast<Index>(r)) = missing_.row(src);
    syn[r] = synthetic_[static_cast<std::size_t>(src)];
  }
  return Table(names_, std::move(v), std::move(m), target_, std::move(syn));
}

bool Table::same_schema(const Table& other) const {
  return names_ == other.names_ && target_ == other.target_;
}

// ---- CSV -------------------------------------------------------------------

Table load_csv(const std::filesystem::path& path, const std::vector<std::string>& schema,
               const std::string& target) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());

  std::string line;
  std::size_t line_no = 0;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (line_no == 1 && line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) {
      line.erase(0, 3);
    }
    if (!blank(line)) {
      have_header = true;
      break;
    }
  }
  if (!have_header) throw Error(ErrorCode::EmptyFile, path.string());

  const auto header_views = split_fields(line);
  const std::vector<std::string> header(header_views.begin(), header_views.end());
  std::vector<std::size_t> source_of;
  for (const auto& name : schema) {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw Error(ErrorCode::MissingColumn, name);
    source_of.push_back(static_cast<std::size_t>(it - header.begin()));
  }
  if (std::find(schema.begin(), schema.end(), target) == schema.end()) {
    throw Error(ErrorCode::MissingColumn, target);
  }

  std::vector<std::vector<double>> cols(schema.size());
  while (std::getline(in, line)) {
    ++line_no;
    if (blank(line)) continue;
    const auto fields = split_fields(line);
    if (fields.size() != header.size()) {
      throw Error(ErrorCode::MalformedRow, "line " + std::to_string(line_no) + ": expected " +
                                               std::to_string(header.size()) + " fields, got " +
                                               std::to_string(fields.size()));
    }
    for (std::size_t k = 0; k < schema.size(); ++k) {
      cols[k].push_back(parse_number(fields[source_of[k]]).value_or(kNaN));
    }
  }

  const Index n = cols.empty() ? 0 : static_cast<Index>(cols[0].size());
  MatrixXd values(n, static_cast<Index>(schema.size()));
  for (std::size_t k = 0; k < schema.size(); ++k) {
    values.col(static_cast<Index>(k)) = Eigen::Map<const VectorXd>(cols[k].data(), n);
  }
  return Table(schema, std::move(values), target);
}

Table load_csv(const std::filesystem::path& path, std::optional<std::string> target) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  std::string line;
  while (std::getline(in, line)) {
    if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
    if (!blank(line)) break;
  }
  if (blank(line)) throw Error(ErrorCode::EmptyFile, path.string());
  const auto views = split_fields(line);
  std::vector<std::string> header(views.begin(), views.end());
  return load_csv(path, header, target.value_or(header.back()));
}

void write_csv(const Table& t, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  const auto& names = t.column_names();
  for (std::size_t j = 0; j < names.size(); ++j) out << (j ? "," : "") << names[j];
  out << '\n';
  for (Index i = 0; i < t.n_rows(); ++i) {
    for (Index j = 0; j < t.n_cols(); ++j) {
      if (j) out << ',';
      if (!t.is_missing(i, j)) out << format_double(t.values()(i, j));
    }
    out << '\n';
  }
  if (!out) throw Error(ErrorCode::IoError, "write failed for " + path.string());
}

// ---- Preprocessing ----------------------------------------------------------

Table drop_missing_target(const Table& t) {
  IndexList keep;
  const Index tj = t.target_index();
  for (Index i = 0; i < t.n_rows(); ++i) {
    if (!t.is_missing(i, tj)) keep.push_back(i);
  }
  if (keep.empty()) throw Error(ErrorCode::AllRowsDropped, "every row has a missing target");
  return t.select_rows(keep);
}

double median(std::vector<double> values) {
  if (values.empty()) throw Error(ErrorCode::EmptySample, "median of empty sample");
  const std::size_t n = values.size();
  const auto mid = values.begin() + static_cast<std::ptrdiff_t>(n / 2);
  std::nth_element(values.begin(), mid, values.end());
  const double upper = *mid;
  if (n % 2 == 1) return upper;
  const double lower = *std::max_element(values.begin(), mid);
  return 0.5 * (lower + upper);
}

double stable_mean(const Eigen::Ref<const VectorXd>& v) {
  if (v.size() == 0) return 0.0;
  const double pivot = v(0);
  return pivot + (v.array() - pivot).sum() / static_cast<double>(v.size());
}

Imputer fit_imputer(const Table& train) {
  Imputer im;
  const auto idx = train.feature_indices();
  im.medians.resize(static_cast<Index>(idx.size()));
  for (std::size_t k = 0; k < idx.size(); ++k) {
    const Index j = idx[k];
    std::vector<double> present;
    for (Index i = 0; i < train.n_rows(); ++i) {
      if (!train.is_missing(i, j)) present.push_back(train.values()(i, j));
    }
    if (present.empty()) throw Error(ErrorCode::AllMissingColumn, train.column_names()[j]);
    im.columns.push_back(train.column_names()[j]);
    im.medians(static_cast<Index>(k)) = median(std::move(present));
  }
  return im;
}

Table apply_imputer(const Imputer& im, const Table& t) {
  MatrixXd v = t.values();
  ArrayXXb m = t.missing();
  for (std::size_t k = 0; k < im.columns.size(); ++k) {
    const Index j = t.column_index(im.columns[k]);
    for (Index i = 0; i < t.n_rows(); ++i) {
      if (m(i, j)) {
        v(i, j) = im.medians(static_cast<Index>(k));
        m(i, j) = false;
      }
    }
  }
  return Table(t.column_names(), std::move(v), std::move(m), t.target_name(), t.synthetic());
}

SplitPair train_test_split(const Table& t, double ratio, std::uint64_t seed) {
  if (!(ratio > 0.0 && ratio < 1.0)) {
    throw Error(ErrorCode::InvalidArgument, "split ratio must lie in (0, 1)");
  }
  const Index n = t.n_rows();
  if (n < 2) throw Error(ErrorCode::TooFewRows, "need at least 2 rows to split");

  Index n_test = static_cast<Index>(std::llround(static_cast<double>(n) * (1.0 - ratio)));
  n_test = std::clamp<Index>(n_test, 1, n - 1);

  IndexList perm(static_cast<std::size_t>(n));
  std::iota(perm.begin(), perm.end(), Index{0});
  Rng rng(seed);
  rng.shuffle(perm);

  SplitPair out;
  out.test_rows.assign(perm.begin(), perm.begin() + n_test);
  out.train_rows.assign(perm.begin() + n_test, perm.end());
  std::sort(out.test_rows.begin(), out.test_rows.end());
  std::sort(out.train_rows.begin(), out.train_rows.end());
  out.train = t.select_rows(out.train_rows);
  out.test = t.select_rows(out.test_rows);
  out.split_ratio = ratio;
  out.seed = seed;
  return out;
}

Standardizer fit_standardizer(const Table& train) {
  Standardizer s;
  s.columns = train.column_names();
  s.means.resize(train.n_cols());
  s.stds.resize(train.n_cols());
  for (Index j = 0; j < train.n_cols(); ++j) {
    std::vector<double> present;
    for (Index i = 0; i < train.n_rows(); ++i) {
      if (!train.is_missing(i, j)) present.push_back(train.values()(i, j));
    }
    if (present.empty()) throw Error(ErrorCode::AllMissingColumn, train.column_names()[j]);
    const Eigen::Map<const VectorXd> col(present.data(), static_cast<Index>(present.size()));
    const double mean = stable_mean(col);
    s.means(j) = mean;
    s.stds(j) = std::sqrt((col.array() - mean).square().mean());
  }
  return s;
}

Table apply_standardizer(const Standardizer& s, const Table& t) {
  MatrixXd v = t.values();
  for (std::size_t k = 0; k < s.columns.size(); ++k) {
    const Index j = t.column_index(s.columns[k]);
    const Index sk = static_cast<Index>(k);
    for (Index i = 0; i < t.n_rows(); ++i) {
      if (t.is_missing(i, j)) continue;
      v(i, j) = s.is_constant(sk) ? 0.0 : (v(i, j) - s.means(sk)) / s.stds(sk);
    }
  }
  return Table(t.column_names(), std::move(v), t.missing(), t.target_name(), t.synthetic());
}

Table invert_standardizer(const Standardizer& s, const Table& t) {
  MatrixXd v = t.values();
  for (std::size_t k = 0; k < s.columns.size(); ++k) {
    const Index j = t.column_index(s.columns[k]);
    const Index sk = static_cast<Index>(k);
    for (Index i = 0; i < t.n_rows(); ++i) {
      if (t.is_missing(i, j)) continue;
      v(i, j) = s.is_constant(sk) ? s.means(sk) : v(i, j) * s.stds(sk) + s.means(sk);
    }
  }
  return Table(t.column_names(), std::move(v), t.missing(), t.target_name(), t.synthetic());
}

Index polynomial_output_count(Index features, int degree) {
  double total = 0.0;
  for (int d = 1; d <= degree; ++d) total += binomial(features + d - 1, d);
  return total > static_cast<double>(std::numeric_limits<Index>::max())
             ? std::numeric_limits<Index>::max()
             : static_cast<Index>(total);
}

Table polynomial_expand(const Table& t, int degree, Index max_columns) {
  if (degree < 1) throw Error(ErrorCode::InvalidArgument, "polynomial degree must be >= 1");
  const auto feat = t.feature_indices();
  const auto names = t.feature_names();
  const Index f = static_cast<Index>(feat.size());
  const Index count = polynomial_output_count(f, degree);
  if (count > max_columns) {
    throw Error(ErrorCode::DegreeTooLarge, "degree " + std::to_string(degree) + " yields " +
                                               std::to_string(count) + " columns, cap is " +
                                               std::to_string(max_columns));
  }

  std::vector<std::vector<Index>> terms;
  for (int d = 1; d <= degree; ++d) {
    std::vector<Index> current;
    combinations(f, d, 0, current, terms);
  }

  const Index n = t.n_rows();
  MatrixXd v(n, count + 1);
  ArrayXXb m(n, count + 1);
  std::vector<std::string> out_names;
  for (std::size_t c = 0; c < terms.size(); ++c) {
    const Index oc = static_cast<Index>(c);
    out_names.push_back(monomial_name(terms[c], names));
    v.col(oc).setOnes();
    m.col(oc).setConstant(false);
    for (Index k : terms[c]) {
      v.col(oc).array() *= t.values().col(feat[k]).array();
      m.col(oc) = m.col(oc) || t.missing().col(feat[k]);
    }
  }
  out_names.push_back(t.target_name());
  v.col(count) = t.values().col(t.target_index());
  m.col(count) = t.missing().col(t.target_index());
  return Table(std::move(out_names), std::move(v), std::move(m), t.target_name(), t.synthetic());
}

}  // namespace copaug
