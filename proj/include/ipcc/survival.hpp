#pragma once

// Parametric proportional-hazards survival model for the backward time of
// prevalent cases: S(a|x) = exp(-H0(a) exp(x zeta)), the truncated
// integral mu(x) = int_0^xi S(a|x) da, the backward-time density
// S(a|x)/mu(x) on [0, xi], and samplers for it.
//
// Gradients are taken with respect to the unconstrained coordinates
// (log hazard parameters, zeta).

#include <span>

#include <Eigen/Core>

#include "ipcc/types.hpp"

namespace ipcc {

class SurvivalModel {
 public:
  SurvivalModel(HazardFamily family, Eigen::VectorXd hazard_params, Eigen::VectorXd zeta, double xi);

  const HazardFamily& family() const { return family_; }
  const Eigen::VectorXd& hazard_params() const { return hazard_; }
  const Eigen::VectorXd& zeta() const { return zeta_; }
  double xi() const { return xi_; }
  Eigen::Index n_hazard() const { return hazard_.size(); }
  Eigen::Index n_params() const { return hazard_.size() + zeta_.size(); }

  double linear_predictor(std::span<const double> x) const;

  // Cumulative baseline hazard H0(a).
  double cumulative_baseline(double a) const;

  double log_survival(double a, std::span<const double> x) const;
  double log_survival_lp(double a, double lp) const;

  // int_0^upper S(a | lp) da, closed form for every family.
  double survival_integral_lp(double upper, double lp) const;

  double mu(std::span<const double> x) const;
  double log_mu_lp(double lp) const;

  // d log mu / d(log hazard params, zeta).
  Eigen::VectorXd grad_log_mu(std::span<const double> x) const;
  // d log S(a) / d(log hazard params, zeta).
  Eigen::VectorXd grad_log_survival(double a, std::span<const double> x) const;

  // Value and derivatives in terms of the linear predictor lp = x zeta:
  // d_hazard receives d/d log(hazard params), d_lp receives d/d lp
  // (the zeta gradient is d_lp * x).
  double log_mu_with_grad(double lp, Eigen::Ref<Eigen::VectorXd> d_hazard, double& d_lp) const;
  double log_survival_with_grad(double a, double lp, Eigen::Ref<Eigen::VectorXd> d_hazard, double& d_lp) const;

  // S(a|x)/mu(x) on [0, xi], zero elsewhere.
  double backward_density(double a, std::span<const double> x) const;
  double backward_cdf_lp(double a, double lp) const;

  // Closed-form inverse CDF; only for unit-shape families (Exponential or
  // Weibull with shape 1). u in [0, 1).
  double sample_backward_time(std::span<const double> x, double u) const;
  // Bisection on the CDF to absolute tolerance 1e-9 * xi; any family.
  double sample_backward_time_numeric(std::span<const double> x, double u) const;

  bool has_unit_shape() const;

 private:
  double log_mu_weibull(double shape, double scale, double lp) const;

  HazardFamily family_;
  Eigen::VectorXd hazard_;
  Eigen::VectorXd zeta_;
  double xi_;
};

class UnsupportedFamilyError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

}  // namespace ipcc
