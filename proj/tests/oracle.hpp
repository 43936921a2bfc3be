#pragma once

// Independent reference computations shared by the unit tests and the
// acceptance binary. Nothing here calls into the library's numerics.

#include <functional>
#include <vector>

#include <Eigen/Core>

#include "ipcc/types.hpp"

namespace oracle {

// S(a | lp) = exp(-H0(a) e^lp) written out per family.
double survival(const ipcc::HazardFamily& fam, const Eigen::VectorXd& h, double a, double lp);

// Adaptive quadrature of S over [lo, hi], split at breakpoints.
double survival_integral(const ipcc::HazardFamily& fam, const Eigen::VectorXd& h, double lo, double hi, double lp);

// Backward-time cdf at each of the sorted points, by cumulative quadrature
// between consecutive points.
std::vector<double> backward_cdf_sorted(const ipcc::HazardFamily& fam, const Eigen::VectorXd& h, double lp, double xi,
                                        const std::vector<double>& sorted_points);

// One-sample Kolmogorov-Smirnov p-value from cdf values of the sample.
double ks_p_value(std::vector<double> cdf_values);

// Quasi-Newton maximisation with central-difference gradients; stops when
// the largest gradient entry is below gtol. The value at the returned point
// is written to `best`.
Eigen::VectorXd bfgs_max(const std::function<double(const Eigen::VectorXd&)>& f, Eigen::VectorXd start, double& best,
                         double gtol = 1e-7, int max_iter = 2000);

// Semiparametric likelihood with the baseline distribution as point masses,
// maximised over p subject to sum p = 1, sum p w1 = 1, sum p w2 = 1 by an
// infeasible-start Newton method. One covariate, exponential hazard.
// theta = (a, n, beta, log rate, zeta) with w1 = e^(a + x beta) and
// w2 = e^(n + x beta) mu(x).
struct ConstrainedFit {
  double value = 0.0;          // -inf when the constraints are infeasible
  Eigen::VectorXd p;
  Eigen::Vector3d multipliers;  // for (total, w1, w2)
  bool converged = false;
};

// Infeasible constraints (1, 1) outside the hull of (w1, w2) give -inf.
ConstrainedFit constrained_masses(const ipcc::Dataset& data, const Eigen::VectorXd& theta, double xi);

}  // namespace oracle
