#include "ipcc/optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace ipcc {

BfgsResult minimize_bfgs(const Objective& f, Eigen::VectorXd x0, const BfgsOptions& options) {
  const Eigen::Index n = x0.size();
  BfgsResult r;
  r.x = std::move(x0);
  r.gradient.resize(n);
  r.value = f(r.x, &r.gradient);
  ++r.evaluations;
  if (!std::isfinite(r.value) || !r.gradient.allFinite()) {
    r.message = "objective is not finite at the initial point";
    return r;
  }
  if (n == 0) {
    r.converged = true;
    r.message = "no free parameters";
    return r;
  }

  Eigen::MatrixXd h = Eigen::MatrixXd::Identity(n, n);
  bool fresh = true;  // h is a (scaled) identity
  bool scaled = false;
  Eigen::VectorXd g_new(n), x_new(n);

  for (r.iterations = 0;; ++r.iterations) {
    if (r.gradient.lpNorm<Eigen::Infinity>() <= options.gradient_tolerance) {
      r.converged = true;
      r.message = "gradient tolerance reached";
      return r;
    }
    if (r.iterations >= options.max_iterations) {
      r.message = "iteration limit reached";
      return r;
    }

    Eigen::VectorXd d = -h * r.gradient;
    double slope = r.gradient.dot(d);
    if (!(slope < 0.0)) {
      h.setIdentity();
      fresh = true;
      d = -r.gradient;
      slope = r.gradient.dot(d);
    }
    double step = 1.0;
    const double dmax = d.lpNorm<Eigen::Infinity>();
    if (dmax * step > options.max_step) step = options.max_step / dmax;

    bool accepted = false;
    double f_new = 0.0;
    for (int k = 0; k < 60; ++k) {
      x_new = r.x + step * d;
      f_new = f(x_new, &g_new);
      ++r.evaluations;
      if (std::isfinite(f_new) && g_new.allFinite() && f_new <= r.value + options.armijo * step * slope) {
        accepted = true;
        break;
      }
      // Quadratic interpolation when the trial value is usable, halving otherwise.
      double next = 0.5 * step;
      if (std::isfinite(f_new)) {
        double denom = 2.0 * (f_new - r.value - slope * step);
        if (denom > 0.0) next = std::clamp(-slope * step * step / denom, 0.1 * step, 0.5 * step);
      }
      step = next;
    }
    if (!accepted) {
      if (!fresh) {
        h.setIdentity();
        fresh = true;
        scaled = false;
        continue;
      }
      r.message = "line search failed to find a sufficient decrease";
      return r;
    }

    Eigen::VectorXd s = x_new - r.x;
    Eigen::VectorXd y = g_new - r.gradient;
    r.x = x_new;
    r.value = f_new;
    r.gradient = g_new;

    const double sy = s.dot(y);
    if (sy > 1e-12 * s.norm() * y.norm()) {
      if (!scaled) {
        h = Eigen::MatrixXd::Identity(n, n) * (sy / y.squaredNorm());
        scaled = true;
      }
      const double rho = 1.0 / sy;
      Eigen::VectorXd hy = h * y;
      const double yhy = y.dot(hy);
      h += ((sy + yhy) * rho * rho) * (s * s.transpose()) - rho * (hy * s.transpose() + s * hy.transpose());
      fresh = false;
    }
  }
}

}  // namespace ipcc
