#pragma once

#include "copaug/core.hpp"

#include <span>

namespace copaug {

struct KsOutcome {
  double d_statistic = 0.0;
  double p_value = 1.0;
  Index n1 = 0;
  Index n2 = 0;
};

struct TtestOutcome {
  double t_statistic = 0.0;
  double p_value = 1.0;            // two-sided
  double p_value_one_sided = 0.5;  // H1: mean(a - b) > 0
  Index df = 0;
  double mean_diff = 0.0;
  bool zero_variance = false;
};

struct PercentErrorStats {
  double mean = 0.0;
  double median = 0.0;
  double std = 0.0;
};

/// Two-sample Kolmogorov-Smirnov test. D is exact; the p-value uses the
/// asymptotic Kolmogorov distribution with the Stephens correction
/// lambda = D (sqrt(ne) + 0.12 + 0.11 / sqrt(ne)).
KsOutcome ks_two_sample(std::span<const double> a, std::span<const double> b);

/// Paired Student t-test on d = a - b.
///
/// Degenerate differences follow a fixed convention instead of throwing:
/// sd(d) = 0 with mean(d) != 0 gives p = 0 (t = +/-inf); sd(d) = 0 with
/// mean(d) = 0 gives t = 0, p = 1.
TtestOutcome paired_ttest(std::span<const double> a, std::span<const double> b);

/// Mean, median (mean of middle pair for even counts) and sample standard
/// deviation (divisor n - 1; zero for a single value).
PercentErrorStats percent_error_stats(std::span<const double> pe);

}  // namespace copaug
