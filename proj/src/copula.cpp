#include "copaug/copula.hpp"

#include "copaug/distributions.hpp"
#include "copaug/stats_tests.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

namespace copaug {

using ojson = nlohmann::ordered_json;

// ---- EmpiricalMarginal ------------------------------------------------------

EmpiricalMarginal::EmpiricalMarginal(std::vector<double> values) : sorted_(std::move(values)) {
  if (sorted_.empty()) throw Error(ErrorCode::EmptySample, "marginal needs at least one value");
  std::sort(sorted_.begin(), sorted_.end());
}

namespace {

// Average 1-based rank of the tie block [lo, hi).
double block_rank(std::size_t lo, std::size_t hi) {
  return 0.5 * (static_cast<double>(lo + 1) + static_cast<double>(hi));
}

}  // namespace

double EmpiricalMarginal::cdf(double x) const {
  if (sorted_.empty()) throw Error(ErrorCode::NotFitted, "empty marginal");
  const double denom = static_cast<double>(sorted_.size() + 1);
  const auto first = sorted_.begin();
  const auto lo = std::lower_bound(first, sorted_.end(), x);
  const auto hi = std::upper_bound(lo, sorted_.end(), x);
  if (lo != hi) {
    return block_rank(static_cast<std::size_t>(lo - first), static_cast<std::size_t>(hi - first)) /
           denom;
  }
  if (lo == first) return cdf(sorted_.front());
  if (lo == sorted_.end()) return cdf(sorted_.back());

  const double left = *(lo - 1);
  const double right = *lo;
  const auto left_lo = std::lower_bound(first, lo, left);
  const auto right_hi = std::upper_bound(lo, sorted_.end(), right);
  const double r_left = block_rank(static_cast<std::size_t>(left_lo - first),
                                   static_cast<std::size_t>(lo - first));
  const double r_right = block_rank(static_cast<std::size_t>(lo - first),
                                    static_cast<std::size_t>(right_hi - first));
  const double frac = (x - left) / (right - left);
  return (r_left + frac * (r_right - r_left)) / denom;
}

double EmpiricalMarginal::inverse_cdf(double u) const {
  if (sorted_.empty()) throw Error(ErrorCode::NotFitted, "empty marginal");
  const std::size_t n = sorted_.size();
  const double pos = u * static_cast<double>(n + 1);
  if (!(pos > 1.0)) return sorted_.front();
  if (pos >= static_cast<double>(n)) return sorted_.back();
  const auto i = static_cast<std::size_t>(std::floor(pos));  // 1-based order statistic
  const double frac = pos - static_cast<double>(i);
  const double left = sorted_[i - 1];
  const double right = sorted_[i];
  return left + frac * (right - left);
}

// ---- Fitting ----------------------------------------------------------------

VectorXd normal_scores(const Eigen::Ref<const VectorXd>& column) {
  const Index n = column.size();
  std::vector<Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Index{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](Index a, Index b) { return column(a) < column(b); });
  VectorXd z(n);
  const double denom = static_cast<double>(n + 1);
  std::size_t lo = 0;
  while (lo < order.size()) {
    std::size_t hi = lo;
    while (hi < order.size() && column(order[hi]) == column(order[lo])) ++hi;
    const double score = normal_quantile(block_rank(lo, hi) / denom);
    for (std::size_t k = lo; k < hi; ++k) z(order[k]) = score;
    lo = hi;
  }
  return z;
}

MatrixXd repair_correlation(const MatrixXd& raw, double floor) {
  const MatrixXd sym = 0.5 * (raw + raw.transpose());
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(sym);
  if (es.info() != Eigen::Success) {
    throw Error(ErrorCode::NonFiniteInput, "eigendecomposition of correlation matrix failed");
  }
  if (es.eigenvalues().minCoeff() >= 0.0) return raw;

  const VectorXd clipped = es.eigenvalues().cwiseMax(floor);
  MatrixXd fixed = es.eigenvectors() * clipped.asDiagonal() * es.eigenvectors().transpose();
  const VectorXd scale = fixed.diagonal().cwiseSqrt().cwiseInverse();
  fixed = scale.asDiagonal() * fixed * scale.asDiagonal();
  fixed.diagonal().setOnes();
  return 0.5 * (fixed + fixed.transpose());
}

CopulaModel fit_copula(const Table& train, std::uint64_t seed) {
  const Index n = train.n_rows();
  const Index d = train.n_cols();
  if (n < kMinCopulaRows) {
    throw Error(ErrorCode::TooFewRows, "copula fit needs at least " +
                                           std::to_string(kMinCopulaRows) + " rows, got " +
                                           std::to_string(n));
  }
  if (train.has_missing() || !train.values().allFinite()) {
    throw Error(ErrorCode::NonFiniteInput, "copula fit requires complete, finite data");
  }

  CopulaModel m;
  m.column_names = train.column_names();
  m.target_name = train.target_name();
  m.seed = seed;
  m.clip_min.resize(d);
  m.clip_max.resize(d);

  MatrixXd scores(n, d);
  std::vector<bool> constant(static_cast<std::size_t>(d));
  for (Index j = 0; j < d; ++j) {
    const auto col = train.column(j);
    m.marginals.emplace_back(std::vector<double>(col.begin(), col.end()));
    m.clip_min(j) = col.minCoeff();
    m.clip_max(j) = col.maxCoeff();
    constant[static_cast<std::size_t>(j)] = m.marginals.back().is_constant();
    scores.col(j) = normal_scores(col);
  }

  MatrixXd corr = MatrixXd::Identity(d, d);
  const MatrixXd centered = scores.rowwise() - scores.colwise().mean();
  const VectorXd norms = centered.colwise().norm();
  for (Index a = 0; a < d; ++a) {
    if (constant[static_cast<std::size_t>(a)]) continue;
    for (Index b = a + 1; b < d; ++b) {
      if (constant[static_cast<std::size_t>(b)]) continue;
      const double r = std::clamp(centered.col(a).dot(centered.col(b)) / (norms(a) * norms(b)),
                                  -1.0, 1.0);
      corr(a, b) = r;
      corr(b, a) = r;
    }
  }
  m.corr = repair_correlation(corr);
  return m;
}

// ---- Sampling ---------------------------------------------------------------

MatrixXd sample_normal_scores(const CopulaModel& m, Index n, Rng& rng) {
  if (!m.fitted()) throw Error(ErrorCode::NotFitted, "copula model has no marginals");
  if (n < 1) throw Error(ErrorCode::InvalidArgument, "sample count must be >= 1");
  const Index d = m.dims();

  MatrixXd factor;
  Eigen::LLT<MatrixXd> llt(m.corr);
  if (llt.info() == Eigen::Success) {
    factor = llt.matrixL();
  } else {
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(m.corr);
    factor = es.eigenvectors() * es.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal();
  }

  MatrixXd g(n, d);
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < d; ++j) g(i, j) = rng.normal();
  }
  return g * factor.transpose();
}

Table sample_synthetic(const CopulaModel& m, Index n, Rng& rng) {
  const MatrixXd z = sample_normal_scores(m, n, rng);
  MatrixXd x(n, m.dims());
  for (Index j = 0; j < m.dims(); ++j) {
    const auto& marginal = m.marginals[static_cast<std::size_t>(j)];
    for (Index i = 0; i < n; ++i) {
      const double v = marginal.is_constant() ? marginal.min()
                                              : marginal.inverse_cdf(normal_cdf(z(i, j)));
      x(i, j) = std::clamp(v, m.clip_min(j), m.clip_max(j));
    }
  }
  return Table(m.column_names, std::move(x), m.target_name);
}

Table sample_synthetic(const CopulaModel& m, Index n) {
  Rng rng(m.seed);
  return sample_synthetic(m, n, rng);
}

KsValidation validate_synthetic(const Table& real, const Table& synth, double alpha) {
  if (!real.same_schema(synth)) throw Error(ErrorCode::SchemaMismatch, "real and synthetic schemas differ");
  KsValidation out;
  out.alpha = alpha;
  for (Index j = 0; j < real.n_cols(); ++j) {
    std::vector<double> a;
    std::vector<double> b;
    for (Index i = 0; i < real.n_rows(); ++i) {
      if (!real.is_missing(i, j)) a.push_back(real.values()(i, j));
    }
    for (Index i = 0; i < synth.n_rows(); ++i) {
      if (!synth.is_missing(i, j)) b.push_back(synth.values()(i, j));
    }
    const KsOutcome ks = ks_two_sample(a, b);
    out.columns.push_back(real.column_names()[static_cast<std::size_t>(j)]);
    out.d_statistic.push_back(ks.d_statistic);
    out.p_value.push_back(ks.p_value);
    out.passed.push_back(ks.p_value >= alpha);
    out.all_passed = out.all_passed && out.passed.back();
  }
  return out;
}

Table concat_rows(const Table& first, const Table& second) {
  if (!first.same_schema(second)) throw Error(ErrorCode::SchemaMismatch, "cannot concatenate tables");
  const Index n = first.n_rows() + second.n_rows();
  MatrixXd v(n, first.n_cols());
  v << first.values(), second.values();
  ArrayXXb mask(n, first.n_cols());
  mask << first.missing(), second.missing();
  std::vector<bool> syn = first.synthetic();
  syn.insert(syn.end(), second.synthetic().begin(), second.synthetic().end());
  return Table(first.column_names(), std::move(v), std::move(mask), first.target_name(),
               std::move(syn));
}

Table augment(const Table& train, const CopulaModel& m, Index n, Rng& rng) {
  if (train.column_names() != m.column_names || train.target_name() != m.target_name) {
    throw Error(ErrorCode::SchemaMismatch, "training table does not match copula schema");
  }
  if (n == 0) return train;
  if (n < 0) throw Error(ErrorCode::InvalidArgument, "negative synthetic count");
  const Table synth = sample_synthetic(m, n, rng);
  Table flagged(synth.column_names(), synth.values(), synth.missing(), synth.target_name(),
                std::vector<bool>(static_cast<std::size_t>(n), true));
  return concat_rows(train, flagged);
}

// ---- Persistence ------------------------------------------------------------

std::string to_json_string(const CopulaModel& m) {
  ojson j;
  j["format"] = CopulaModel::kFormatTag;
  j["columns"] = m.column_names;
  j["target"] = m.target_name;
  j["seed"] = m.seed;
  ojson marginals = ojson::array();
  for (const auto& mg : m.marginals) {
    marginals.push_back({{"kind", "empirical"}, {"values", mg.sorted_values()}});
  }
  j["marginals"] = std::move(marginals);
  std::vector<double> flat;
  for (Index r = 0; r < m.corr.rows(); ++r) {
    for (Index c = 0; c < m.corr.cols(); ++c) flat.push_back(m.corr(r, c));
  }
  j["corr"] = flat;
  j["clip_min"] = std::vector<double>(m.clip_min.begin(), m.clip_min.end());
  j["clip_max"] = std::vector<double>(m.clip_max.begin(), m.clip_max.end());
  return j.dump(2) + "\n";
}

CopulaModel copula_from_json_string(const std::string& text) {
  ojson j;
  try {
    j = ojson::parse(text);
  } catch (const std::exception& e) {
    throw Error(ErrorCode::InvalidConfig, std::string("copula model is not valid JSON: ") + e.what());
  }
  if (!j.is_object() || j.value("format", "") != CopulaModel::kFormatTag) {
    throw Error(ErrorCode::InvalidConfig, "missing or unsupported format tag, expected copula-v1");
  }
  try {
    CopulaModel m;
    m.column_names = j.at("columns").get<std::vector<std::string>>();
    m.target_name = j.at("target").get<std::string>();
    m.seed = j.at("seed").get<std::uint64_t>();
    for (const auto& mg : j.at("marginals")) {
      if (mg.at("kind").get<std::string>() != "empirical") {
        throw Error(ErrorCode::InvalidConfig, "unsupported marginal kind");
      }
      m.marginals.emplace_back(mg.at("values").get<std::vector<double>>());
    }
    const Index d = m.dims();
    const auto flat = j.at("corr").get<std::vector<double>>();
    const auto lo = j.at("clip_min").get<std::vector<double>>();
    const auto hi = j.at("clip_max").get<std::vector<double>>();
    if (static_cast<Index>(m.column_names.size()) != d || static_cast<Index>(flat.size()) != d * d ||
        static_cast<Index>(lo.size()) != d || static_cast<Index>(hi.size()) != d) {
      throw Error(ErrorCode::InvalidConfig, "copula model dimensions are inconsistent");
    }
    m.corr = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
        flat.data(), d, d);
    m.clip_min = Eigen::Map<const VectorXd>(lo.data(), d);
    m.clip_max = Eigen::Map<const VectorXd>(hi.data(), d);
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::InvalidConfig, std::string("malformed copula model: ") + e.what());
  }
}

void save_copula(const CopulaModel& m, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  out << to_json_string(m);
  if (!out) throw Error(ErrorCode::IoError, "write failed for " + path.string());
}

CopulaModel load_copula(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return copula_from_json_string(ss.str());
}

}  // namespace copaug
