#include "ipcc/survival.hpp"

#include <cmath>
#include <limits>

#include "ipcc/special.hpp"

namespace ipcc {
namespace {

// (1 - e^{-t}) / t, stable near 0.
double one_minus_exp_over(double t) {
  if (t < 1e-10) return 1.0 - 0.5 * t;
  return -std::expm1(-t) / t;
}

// Step for the shape derivative of the Weibull log mu (central differences).
constexpr double kShapeStep = 1e-5;

}  // namespace

SurvivalModel::SurvivalModel(HazardFamily family, Eigen::VectorXd hazard_params, Eigen::VectorXd zeta, double xi)
    : family_(std::move(family)), hazard_(std::move(hazard_params)), zeta_(std::move(zeta)), xi_(xi) {
  if (!(xi_ > 0.0) || !std::isfinite(xi_)) throw ParameterDomainError("xi must be positive and finite");
  if (static_cast<std::size_t>(hazard_.size()) != family_.n_params())
    throw ParameterDomainError("hazard parameter count does not match the family");
  for (Eigen::Index k = 0; k < hazard_.size(); ++k)
    if (!(hazard_[k] > 0.0) || !std::isfinite(hazard_[k]))
      throw ParameterDomainError("hazard parameters must be positive and finite");
  if (!zeta_.allFinite()) throw ParameterDomainError("zeta must be finite");
  if (family_.kind == HazardKind::PiecewiseConstant) {
    const auto& tau = family_.breakpoints;
    if (tau.empty() || tau.front() != 0.0) throw ParameterDomainError("piecewise breakpoints must start at 0");
    for (std::size_t k = 1; k < tau.size(); ++k)
      if (!(tau[k] > tau[k - 1])) throw ParameterDomainError("piecewise breakpoints must increase");
  }
}

bool SurvivalModel::has_unit_shape() const {
  return family_.kind == HazardKind::Exponential ||
         (family_.kind == HazardKind::Weibull && hazard_[0] == 1.0);
}

double SurvivalModel::linear_predictor(std::span<const double> x) const {
  if (static_cast<Eigen::Index>(x.size()) != zeta_.size())
    throw std::invalid_argument("covariate length does not match zeta");
  double lp = 0.0;
  for (std::size_t j = 0; j < x.size(); ++j) lp += x[j] * zeta_[static_cast<Eigen::Index>(j)];
  return lp;
}

double SurvivalModel::cumulative_baseline(double a) const {
  if (a <= 0.0) return 0.0;
  switch (family_.kind) {
    case HazardKind::Exponential:
      return hazard_[0] * a;
    case HazardKind::Weibull:
      return std::pow(a / hazard_[1], hazard_[0]);
    case HazardKind::PiecewiseConstant: {
      const auto& tau = family_.breakpoints;
      double h = 0.0;
      for (std::size_t k = 0; k < tau.size(); ++k) {
        double hi = k + 1 < tau.size() ? tau[k + 1] : std::numeric_limits<double>::infinity();
        if (a <= tau[k]) break;
        h += hazard_[static_cast<Eigen::Index>(k)] * (std::min(a, hi) - tau[k]);
      }
      return h;
    }
  }
  return 0.0;
}

double SurvivalModel::log_survival_lp(double a, double lp) const {
  return -cumulative_baseline(a) * std::exp(lp);
}

double SurvivalModel::log_survival(double a, std::span<const double> x) const {
  return log_survival_lp(a, linear_predictor(x));
}

double SurvivalModel::survival_integral_lp(double upper, double lp) const {
  if (upper <= 0.0) return 0.0;
  switch (family_.kind) {
    case HazardKind::Exponential: {
      double psi = hazard_[0] * std::exp(lp);
      return upper * one_minus_exp_over(psi * upper);
    }
    case HazardKind::Weibull: {
      double shape = hazard_[0], scale = hazard_[1];
      double psi = std::exp(lp - shape * std::log(scale));
      double z = psi * std::pow(upper, shape);
      return upper / shape * special::lower_gamma_scaled(1.0 / shape, z);
    }
    case HazardKind::PiecewiseConstant: {
      const auto& tau = family_.breakpoints;
      double c = std::exp(lp);
      double h_acc = 0.0, total = 0.0;
      for (std::size_t k = 0; k < tau.size(); ++k) {
        if (upper <= tau[k]) break;
        double hi = k + 1 < tau.size() ? std::min(tau[k + 1], upper) : upper;
        double len = hi - tau[k];
        double rate = c * hazard_[static_cast<Eigen::Index>(k)];
        total += std::exp(-c * h_acc) * len * one_minus_exp_over(rate * len);
        h_acc += hazard_[static_cast<Eigen::Index>(k)] * len;
      }
      return total;
    }
  }
  return 0.0;
}

double SurvivalModel::log_mu_lp(double lp) const { return std::log(survival_integral_lp(xi_, lp)); }

double SurvivalModel::mu(std::span<const double> x) const {
  return survival_integral_lp(xi_, linear_predictor(x));
}

double SurvivalModel::log_mu_weibull(double shape, double scale, double lp) const {
  double psi = std::exp(lp - shape * std::log(scale));
  double z = psi * std::pow(xi_, shape);
  return std::log(xi_ / shape * special::lower_gamma_scaled(1.0 / shape, z));
}

double SurvivalModel::log_mu_with_grad(double lp, Eigen::Ref<Eigen::VectorXd> d_hazard, double& d_lp) const {
  switch (family_.kind) {
    case HazardKind::Exponential: {
      double t = hazard_[0] * std::exp(lp) * xi_;
      // d log mu / d log psi = t / (e^t - 1) - 1
      double ratio = t < 1e-10 ? 1.0 - 0.5 * t : t / std::expm1(t);
      d_lp = ratio - 1.0;
      d_hazard[0] = d_lp;
      return std::log(xi_ * one_minus_exp_over(t));
    }
    case HazardKind::Weibull: {
      double shape = hazard_[0], scale = hazard_[1];
      double s = 1.0 / shape;
      double psi = std::exp(lp - shape * std::log(scale));
      double z = psi * std::pow(xi_, shape);
      double scaled = special::lower_gamma_scaled(s, z);
      // d log mu / d log psi = -(s - z^s e^{-z} / gamma(s, z))
      double r = std::exp(-z) / scaled;
      d_lp = -(s - r);
      d_hazard[1] = -shape * d_lp;
      d_hazard[0] = (log_mu_weibull(shape * std::exp(kShapeStep), scale, lp) -
                     log_mu_weibull(shape * std::exp(-kShapeStep), scale, lp)) /
                    (2.0 * kShapeStep);
      return std::log(xi_ / shape * scaled);
    }
    case HazardKind::PiecewiseConstant: {
      const auto& tau = family_.breakpoints;
      const std::size_t n = tau.size();
      double c = std::exp(lp);
      double h_acc = 0.0, total = 0.0;
      // Each interval term S_k G_k with S_k = exp(-c H(tau_k)),
      // G_k = (1 - e^{-r_k L_k}) / r_k, r_k = c lambda_k.
      Eigen::VectorXd d_total = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n));
      Eigen::VectorXd cum_weight = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n));  // c lambda_j L_j
      for (std::size_t k = 0; k < n; ++k) {
        if (xi_ <= tau[k]) break;
        const auto kk = static_cast<Eigen::Index>(k);
        double hi = k + 1 < n ? std::min(tau[k + 1], xi_) : xi_;
        double len = hi - tau[k];
        double rate = c * hazard_[kk];
        double t = rate * len;
        double g = len * one_minus_exp_over(t);
        double sk = std::exp(-c * h_acc);
        double term = sk * g;
        total += term;
        for (std::size_t j = 0; j < k; ++j) d_total[static_cast<Eigen::Index>(j)] -= term * cum_weight[static_cast<Eigen::Index>(j)];
        d_total[kk] += sk * (len * std::exp(-t) - g);
        cum_weight[kk] = rate * len;
        h_acc += hazard_[kk] * len;
      }
      d_hazard = d_total / total;
      d_lp = d_hazard.sum();
      return std::log(total);
    }
  }
  return 0.0;
}

double SurvivalModel::log_survival_with_grad(double a, double lp, Eigen::Ref<Eigen::VectorXd> d_hazard,
                                             double& d_lp) const {
  double c = std::exp(lp);
  switch (family_.kind) {
    case HazardKind::Exponential: {
      double ls = -hazard_[0] * a * c;
      d_hazard[0] = ls;
      d_lp = ls;
      return ls;
    }
    case HazardKind::Weibull: {
      double shape = hazard_[0], scale = hazard_[1];
      if (a <= 0.0) {
        d_hazard.setZero();
        d_lp = 0.0;
        return 0.0;
      }
      double ls = -std::pow(a / scale, shape) * c;
      d_hazard[0] = ls * shape * std::log(a / scale);
      d_hazard[1] = -shape * ls;
      d_lp = ls;
      return ls;
    }
    case HazardKind::PiecewiseConstant: {
      const auto& tau = family_.breakpoints;
      d_hazard.setZero();
      double ls = 0.0;
      for (std::size_t k = 0; k < tau.size(); ++k) {
        if (a <= tau[k]) break;
        const auto kk = static_cast<Eigen::Index>(k);
        double hi = k + 1 < tau.size() ? std::min(tau[k + 1], a) : a;
        double contrib = -c * hazard_[kk] * (hi - tau[k]);
        d_hazard[kk] = contrib;
        ls += contrib;
      }
      d_lp = ls;
      return ls;
    }
  }
  return 0.0;
}

Eigen::VectorXd SurvivalModel::grad_log_mu(std::span<const double> x) const {
  Eigen::VectorXd g(n_params());
  double d_lp = 0.0;
  log_mu_with_grad(linear_predictor(x), g.head(n_hazard()), d_lp);
  for (Eigen::Index j = 0; j < zeta_.size(); ++j) g[n_hazard() + j] = d_lp * x[static_cast<std::size_t>(j)];
  return g;
}

Eigen::VectorXd SurvivalModel::grad_log_survival(double a, std::span<const double> x) const {
  Eigen::VectorXd g(n_params());
  double d_lp = 0.0;
  log_survival_with_grad(a, linear_predictor(x), g.head(n_hazard()), d_lp);
  for (Eigen::Index j = 0; j < zeta_.size(); ++j) g[n_hazard() + j] = d_lp * x[static_cast<std::size_t>(j)];
  return g;
}

double SurvivalModel::backward_density(double a, std::span<const double> x) const {
  if (a < 0.0 || a > xi_) return 0.0;
  double lp = linear_predictor(x);
  return std::exp(log_survival_lp(a, lp) - log_mu_lp(lp));
}

double SurvivalModel::backward_cdf_lp(double a, double lp) const {
  if (a <= 0.0) return 0.0;
  if (a >= xi_) return 1.0;
  return survival_integral_lp(a, lp) / survival_integral_lp(xi_, lp);
}

double SurvivalModel::sample_backward_time(std::span<const double> x, double u) const {
  if (!has_unit_shape())
    throw UnsupportedFamilyError(
        "closed-form backward-time sampling needs a unit-shape hazard; use sample_backward_time_numeric");
  if (!(u >= 0.0 && u < 1.0)) throw std::domain_error("u must lie in [0, 1)");
  double lp = linear_predictor(x);
  double rate = family_.kind == HazardKind::Exponential ? hazard_[0] : 1.0 / hazard_[1];
  double psi = rate * std::exp(lp);
  double m = survival_integral_lp(xi_, lp);
  double a = -std::log1p(-u * psi * m) / psi;
  return std::min(a, std::nextafter(xi_, 0.0));
}

double SurvivalModel::sample_backward_time_numeric(std::span<const double> x, double u) const {
  if (!(u >= 0.0 && u < 1.0)) throw std::domain_error("u must lie in [0, 1)");
  if (u == 0.0) return 0.0;
  double lp = linear_predictor(x);
  double target = u * survival_integral_lp(xi_, lp);
  double lo = 0.0, hi = xi_;
  const double tol = 1e-9 * xi_;
  while (hi - lo > tol) {
    double mid = 0.5 * (lo + hi);
    if (survival_integral_lp(mid, lp) < target) lo = mid;
    else hi = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace ipcc
