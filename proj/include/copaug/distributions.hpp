#pragma once

namespace copaug {

/// Standard normal CDF.
double normal_cdf(double z);

/// Standard normal quantile (Wichura AS241, relative error ~1e-16).
/// Returns -inf / +inf at p = 0 / 1.
double normal_quantile(double p);

/// Regularized incomplete beta I_x(a, b), continued-fraction evaluation.
double regularized_incomplete_beta(double x, double a, double b);

/// Student-t CDF with `df` degrees of freedom.
double student_t_cdf(double t, double df);

/// Kolmogorov survival function Q(lambda) = 2 sum_{j>=1} (-1)^(j-1) exp(-2 j^2 lambda^2).
double kolmogorov_survival(double lambda);

}  // namespace copaug
