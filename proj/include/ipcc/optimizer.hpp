#pragma once

#include <functional>
#include <string>

#include <Eigen/Core>

namespace ipcc {

// Objective for minimisation. Writes the gradient when `gradient` is
// non-null. Returns +inf (or NaN) for points outside the domain; the line
// search treats those as rejected steps.
using Objective = std::function<double(const Eigen::VectorXd& x, Eigen::VectorXd* gradient)>;

struct BfgsOptions {
  int max_iterations = 500;
  double gradient_tolerance = 1e-6;  // on the infinity norm of the gradient
  double max_step = 5.0;             // infinity-norm cap on a single step
  double armijo = 1e-4;
};

struct BfgsResult {
  Eigen::VectorXd x;
  double value = 0.0;
  Eigen::VectorXd gradient;
  int iterations = 0;
  int evaluations = 0;
  bool converged = false;
  std::string message;
};

// Quasi-Newton minimisation with an inverse-Hessian BFGS update and a
// backtracking line search enforcing sufficient decrease.
BfgsResult minimize_bfgs(const Objective& f, Eigen::VectorXd x0, const BfgsOptions& options = {});

}  // namespace ipcc
