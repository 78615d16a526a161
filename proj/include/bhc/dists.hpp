#pragma once

namespace bhc::stats {

double normal_cdf(double z);
/// Inverse standard normal CDF, |error| < 1e-13 over (0,1).
double normal_quantile(double p);

/// Regularized incomplete beta I_x(a, b) by continued fraction, ~1e-14.
double incomplete_beta(double a, double b, double x);

/// Student-t CDF with df > 0 (df may be fractional and very large).
double t_cdf(double t, double df);
/// Two-sided p-value for an observed |t| at the given df.
double t_two_sided_p(double t, double df);
double t_quantile(double p, double df);

/// CDF of the studentized range with k groups and df error degrees of
/// freedom, via the classical range-of-normals integral mixed over the
/// chi distribution of the pooled scale. Absolute accuracy ~1e-7.
double studentized_range_cdf(double q, int k, double df);
/// Upper-tail p used by Tukey's HSD.
double studentized_range_p(double q, int k, double df);
double studentized_range_quantile(double p, int k, double df);

} // namespace bhc::stats
