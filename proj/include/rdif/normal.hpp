#pragma once

namespace rdif {

/// Standard normal CDF.
double normal_cdf(double x);

/// Inverse of the standard normal CDF (Wichura's AS 241, PPND16).
/// Requires 0 < p < 1.
double normal_quantile(double p);

/// Two-sided p-value of a standard normal statistic, 2(1 - Phi(|z|)).
double two_sided_p(double z);

/// Survival function of chi-square with one degree of freedom.
double chi2_1df_sf(double q);

/// Survival function of chi-square with two degrees of freedom, exp(-q/2).
double chi2_2df_sf(double q);

}  // namespace rdif
