#pragma once

// Sandwich covariance, likelihood-ratio tests and jackknife standard errors
// for fits of the profile likelihood.

#include <string>
#include <vector>

#include <Eigen/Core>

#include "ipcc/estimation.hpp"

namespace ipcc {

// Covariance of theta-hat over the free coordinates of a fit:
//   V = H / N (numeric Hessian of the log-likelihood),
//   Sigma = N^-1 sum_g sum_{i in g} (s_i - mean_g s)(s_i - mean_g s)^T,
//   Omega / N = V^-1 Sigma V^-1 / N.
struct CovarianceEstimate {
  Eigen::MatrixXd omega_over_n;
  Eigen::MatrixXd v_hat;
  Eigen::MatrixXd sigma_hat;
  std::vector<Eigen::Index> coordinates;  // full-vector index of each row
  bool richardson = false;                // Richardson-extrapolated Hessian used

  Eigen::VectorXd sd() const;
  // Standard deviations with hazard parameters mapped to the natural scale
  // by the delta method. Entries are aligned with `coordinates`.
  Eigen::VectorXd natural_sd(const FitResult& fit) const;
  // Full-length covariance (zeros for fixed coordinates).
  Eigen::MatrixXd full(Eigen::Index size) const;
};

class SingularInformationError : public std::runtime_error {
 public:
  SingularInformationError(const std::string& what, std::string coordinate)
      : std::runtime_error(what), coordinate_(std::move(coordinate)) {}
  const std::string& coordinate() const { return coordinate_; }

 private:
  std::string coordinate_;
};

CovarianceEstimate sandwich_covariance(const FitResult& fit, const Dataset& data, const ModelSpec& spec);
CovarianceEstimate sandwich_covariance(const ParamVector& theta_hat, const Dataset& data, const ModelSpec& spec);

struct LrtResult {
  double statistic = 0.0;
  int df = 0;
  double p_value = 1.0;
  double loglik_full = 0.0;
  double loglik_restricted = 0.0;
  bool converged = true;
  std::string diagnostic;
};

// Restrictions address (beta, hazard, zeta) coordinates; alpha and nu are
// always profiled.
LrtResult lrt(const Dataset& data, const ModelSpec& spec, const FitConfig& config,
              const std::vector<FixedCoordinate>& restriction);
// Same, reusing an existing unrestricted fit.
LrtResult lrt(const Dataset& data, const ModelSpec& spec, const FitConfig& config,
              const std::vector<FixedCoordinate>& restriction, const FitResult& full_fit);

struct JackknifeResult {
  Eigen::VectorXd se;          // natural-scale hazard parameters, alpha* and nu* in place of alpha, nu
  Eigen::VectorXd se_unconstrained;
  std::size_t used = 0;
  std::size_t failures = 0;
};

class JackknifeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct JackknifeOptions {
  std::size_t max_n = 5000;
  unsigned threads = 1;
};

JackknifeResult jackknife_se(const Dataset& data, const ModelSpec& spec, const FitConfig& config,
                             const FitResult& full_fit, const JackknifeOptions& options = {});

}  // namespace ipcc
