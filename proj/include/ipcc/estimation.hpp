#pragma once

// Maximum likelihood fitting of the profile likelihood (model C) and the
// logistic comparators (model A: controls vs incident cases; model B:
// controls vs incident and prevalent cases pooled).

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "ipcc/likelihood.hpp"
#include "ipcc/types.hpp"

namespace ipcc {

enum class ParamBlock { Beta, Hazard, Zeta };

// A coordinate of (beta, hazard, zeta) held fixed during a fit. Hazard
// values are on the natural (positive) scale.
struct FixedCoordinate {
  ParamBlock block = ParamBlock::Beta;
  std::size_t index = 0;
  double value = 0.0;
};

struct FitConfig {
  int max_iterations = 500;
  double gradient_tolerance = 1e-6;  // on ||score||_inf / N
  std::optional<ParamVector> initial_theta;
  int n_restarts = 3;
  std::uint64_t seed = 0;
  std::vector<FixedCoordinate> fixed;
};

struct FitResult {
  ParamLayout layout;
  GroupCounts counts;
  std::vector<std::string> names;     // unconstrained coordinate names
  ParamVector theta_hat;
  Eigen::VectorXd theta;              // unconstrained coordinates
  std::vector<bool> free;             // per coordinate; false if held fixed
  double loglik = 0.0;
  bool converged = false;
  std::string diagnostic;
  Eigen::MatrixXd hessian;            // numeric Hessian of the log-likelihood (free coordinates)
  Eigen::MatrixXd covariance;         // filled by inference, unconstrained coordinates
  std::optional<EmpiricalMasses> masses;
  int n_evals = 0;
  int iterations = 0;
  int restart_used = 0;

  double alpha_star() const;
  double nu_star() const;
};

class InvalidDataError : public std::invalid_argument {
 public:
  InvalidDataError(const std::string& what, std::vector<std::string> violations)
      : std::invalid_argument(what), violations_(std::move(violations)) {}
  const std::vector<std::string>& violations() const { return violations_; }

 private:
  std::vector<std::string> violations_;
};

class InitializationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class SeparationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

ParamVector default_initialization(const Dataset& data, const ModelSpec& spec);

FitResult fit_ipcc(const Dataset& data, const ModelSpec& spec, const FitConfig& config = {});

// Newton-Raphson logistic regression of case status on the given
// covariates. The dataset must contain only controls and incident cases;
// use incident_only() / pool_cases() to build the model A / B inputs.
// covariance holds the inverse observed information.
FitResult fit_logistic(const Dataset& data, const std::vector<std::size_t>& covariates, const FitConfig& config = {});

Dataset incident_only(const Dataset& data);
Dataset pool_cases(const Dataset& data);

// Central-difference Hessian of the log-likelihood built from the analytic
// score, symmetrised. Coordinates outside `free` are excluded.
Eigen::MatrixXd numeric_hessian(const ProfileLikelihood& lik, const Eigen::VectorXd& theta,
                                const std::vector<bool>& free, double step = 1e-4);

}  // namespace ipcc
