#pragma once

// Profiled empirical log-likelihood for controls, incident cases and
// prevalent cases (the "IP-case-control" likelihood):
//
//   l(theta) = -sum_i log(1 + w1_i + w2_i)
//              + sum_incident log w1_i
//              + sum_prevalent [log w2_i + log S(a_i|x_i) - log mu_i]
//
// with w1 = exp(alpha + x beta), w2 = exp(nu + x beta + log mu(x)).
// Parameters are handled in unconstrained coordinates: hazard parameters
// enter through their logarithms.

#include <cstddef>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "ipcc/types.hpp"

namespace ipcc {

// Which blocks of theta are active for a given design and where they sit in
// the flat unconstrained vector. Order: alpha, nu, beta, log hazard, zeta.
// n2 = 0 drops nu and the survival block; n1 = 0 drops alpha.
struct ParamLayout {
  bool has_alpha = true;
  bool has_nu = true;
  Eigen::Index n_beta = 0;
  Eigen::Index n_hazard = 0;
  Eigen::Index n_zeta = 0;

  static ParamLayout make(const ModelSpec& spec, const GroupCounts& counts);

  bool has_survival() const { return has_nu; }
  Eigen::Index alpha_at() const { return 0; }
  Eigen::Index nu_at() const { return has_alpha ? 1 : 0; }
  Eigen::Index beta_at() const { return (has_alpha ? 1 : 0) + (has_nu ? 1 : 0); }
  Eigen::Index hazard_at() const { return beta_at() + n_beta; }
  Eigen::Index zeta_at() const { return hazard_at() + n_hazard; }
  Eigen::Index size() const { return zeta_at() + n_zeta; }

  Eigen::VectorXd pack(const ParamVector& theta) const;
  ParamVector unpack(const Eigen::VectorXd& v) const;
  // Coordinate names, e.g. "alpha", "beta[x1]", "log_kappa1", "zeta[x2]".
  std::vector<std::string> names(const Dataset& data, const ModelSpec& spec, bool natural_scale = false) const;

  bool operator==(const ParamLayout&) const = default;
};

struct TiltWeights {
  Eigen::VectorXd w1;
  Eigen::VectorXd w2;
  Eigen::VectorXd eta;  // 1 + w1 + w2
};

struct EmpiricalMasses {
  Eigen::VectorXd p;
  double lambda1 = 0.0;
  double lambda2 = 0.0;
  double residual_total = 0.0;  // |sum p - 1|
  double residual_w1 = 0.0;     // |sum p w1* - 1|
  double residual_w2 = 0.0;     // |sum p w2* - 1|
};

class NonConvergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Precomputed design for repeated evaluation of the profile likelihood.
// Immutable after construction; evaluations are pure and thread-safe.
class ProfileLikelihood {
 public:
  ProfileLikelihood(const Dataset& data, const ModelSpec& spec);

  const ParamLayout& layout() const { return layout_; }
  const GroupCounts& counts() const { return counts_; }
  const ModelSpec& spec() const { return spec_; }
  std::size_t n() const { return static_cast<std::size_t>(groups_.size()); }

  // Throws EvaluationError on a non-finite subject term.
  double value(const Eigen::VectorXd& theta) const;
  double value_and_gradient(const Eigen::VectorXd& theta, Eigen::VectorXd& gradient) const;
  // Row i holds the gradient of subject i's contribution.
  Eigen::MatrixXd subject_scores(const Eigen::VectorXd& theta) const;
  // Per-subject contributions to the log-likelihood.
  Eigen::VectorXd subject_terms(const Eigen::VectorXd& theta) const;

  // Tilt weights in the offset parameterisation (alpha, nu).
  TiltWeights weights(const Eigen::VectorXd& theta) const;

 private:
  template <bool WithGradient>
  double evaluate(const Eigen::VectorXd& theta, Eigen::VectorXd* gradient, Eigen::MatrixXd* scores,
                  Eigen::VectorXd* terms) const;

  ModelSpec spec_;
  GroupCounts counts_;
  ParamLayout layout_;
  Eigen::VectorXi groups_;
  Eigen::MatrixXd x_incidence_;
  Eigen::MatrixXd x_survival_;
  Eigen::VectorXd backward_;
};

double profile_loglik(const ParamVector& theta, const Dataset& data, const ModelSpec& spec);
Eigen::VectorXd profile_score(const ParamVector& theta, const Dataset& data, const ModelSpec& spec);

// p_i = 1 / (N [1 + lambda1 (w1*_i - 1) + lambda2 (w2*_i - 1)]) with
// lambda_k = n_k / N, where w*_k are the tilts with alpha*, nu*.
// Throws NonConvergenceError if any constraint residual exceeds 1e-4.
EmpiricalMasses recover_masses(const ParamVector& theta_hat, const Dataset& data, const ModelSpec& spec);

}  // namespace ipcc
