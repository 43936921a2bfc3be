#pragma once

namespace ipcc::special {

// log Gamma(s) for s > 0.
double log_gamma(double s);

// Regularized lower incomplete gamma P(s, z) = gamma(s, z) / Gamma(s), s > 0, z >= 0.
// Series for z < s + 1, continued fraction otherwise; relative accuracy ~1e-14.
double gamma_p(double s, double z);

// Regularized upper incomplete gamma Q(s, z) = 1 - P(s, z).
double gamma_q(double s, double z);

// gamma(s, z) / z^s, finite as z -> 0 (limit 1/s).
double lower_gamma_scaled(double s, double z);

// Upper tail probability of the chi-squared distribution with df degrees of freedom.
double chi2_upper_tail(double x, double df);

// Upper quantile of chi-squared: x such that chi2_upper_tail(x, df) = p.
double chi2_upper_quantile(double p, double df);

}  // namespace ipcc::special
