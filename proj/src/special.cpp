#include "ipcc/special.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace ipcc::special {
namespace {

constexpr double kEps = 1e-16;
constexpr int kMaxIter = 100000;

// sum_{n>=0} z^n / (s (s+1) ... (s+n))
double lower_series(double s, double z) {
  double term = 1.0 / s;
  double sum = term;
  double ap = s;
  for (int n = 0; n < kMaxIter; ++n) {
    ap += 1.0;
    term *= z / ap;
    sum += term;
    if (std::fabs(term) < std::fabs(sum) * kEps) return sum;
  }
  throw std::runtime_error("incomplete gamma series did not converge");
}

// Continued fraction for Gamma(s, z) e^z z^-s (modified Lentz).
double upper_fraction(double s, double z) {
  constexpr double tiny = 1e-300;
  double b = z + 1.0 - s;
  double c = 1.0 / tiny;
  double d = 1.0 / b;
  double h = d;
  for (int i = 1; i < kMaxIter; ++i) {
    double an = -i * (i - s);
    b += 2.0;
    d = an * d + b;
    if (std::fabs(d) < tiny) d = tiny;
    c = b + an / c;
    if (std::fabs(c) < tiny) c = tiny;
    d = 1.0 / d;
    double delta = d * c;
    h *= delta;
    if (std::fabs(delta - 1.0) < 4.0 * kEps) return h;
  }
  throw std::runtime_error("incomplete gamma continued fraction did not converge");
}

void check_args(double s, double z) {
  if (!(s > 0.0) || !(z >= 0.0) || std::isnan(z))
    throw std::domain_error("incomplete gamma requires s > 0 and z >= 0");
}

}  // namespace

double log_gamma(double s) {
#if defined(__GLIBC__)
  int sign = 0;
  return ::lgamma_r(s, &sign);
#else
  return std::lgamma(s);
#endif
}

double gamma_p(double s, double z) {
  check_args(s, z);
  if (z == 0.0) return 0.0;
  if (std::isinf(z)) return 1.0;
  double log_prefactor = s * std::log(z) - z - log_gamma(s);
  if (z < s + 1.0) return std::exp(log_prefactor) * lower_series(s, z);
  return 1.0 - std::exp(log_prefactor) * upper_fraction(s, z);
}

double gamma_q(double s, double z) {
  check_args(s, z);
  if (z == 0.0) return 1.0;
  if (std::isinf(z)) return 0.0;
  double log_prefactor = s * std::log(z) - z - log_gamma(s);
  if (z < s + 1.0) return 1.0 - std::exp(log_prefactor) * lower_series(s, z);
  return std::exp(log_prefactor) * upper_fraction(s, z);
}

double lower_gamma_scaled(double s, double z) {
  check_args(s, z);
  if (z == 0.0) return 1.0 / s;
  if (z < s + 1.0) return std::exp(-z) * lower_series(s, z);
  double log_gamma_s = log_gamma(s);
  double q = std::exp(s * std::log(z) - z - log_gamma_s) * upper_fraction(s, z);
  return std::exp(log_gamma_s - s * std::log(z)) * (1.0 - q);
}

double chi2_upper_tail(double x, double df) {
  if (!(df > 0.0)) throw std::domain_error("chi-squared df must be positive");
  if (std::isnan(x)) return std::numeric_limits<double>::quiet_NaN();
  if (x <= 0.0) return 1.0;
  return gamma_q(0.5 * df, 0.5 * x);
}

double chi2_upper_quantile(double p, double df) {
  if (!(p > 0.0 && p < 1.0)) throw std::domain_error("quantile probability must lie in (0, 1)");
  double lo = 0.0, hi = df + 10.0;
  while (chi2_upper_tail(hi, df) > p) hi *= 2.0;
  for (int i = 0; i < 200 && hi - lo > 1e-12 * hi; ++i) {
    double mid = 0.5 * (lo + hi);
    if (chi2_upper_tail(mid, df) > p) lo = mid;
    else hi = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace ipcc::special
