#pragma once

#include <cmath>
#include <functional>

#include <Eigen/Core>

#include "ipcc/simulation.hpp"
#include "ipcc/types.hpp"

namespace testing {

inline ipcc::Dataset small_sample(std::size_t n0, std::size_t n1, std::size_t n2, std::uint64_t seed,
                                  Eigen::Vector2d beta = Eigen::Vector2d(1.0, -1.0)) {
  ipcc::SimScenario s;
  s.n0 = n0;
  s.n1 = n1;
  s.n2 = n2;
  s.beta = beta;
  s.seed = seed;
  return ipcc::simulate_dataset(s, 0).data;
}

inline ipcc::ModelSpec two_covariate_spec(ipcc::HazardFamily fam = ipcc::HazardFamily::weibull(), double xi = 25.0) {
  ipcc::ModelSpec spec;
  spec.incidence_covariates = {0, 1};
  spec.survival_covariates = {0, 1};
  spec.hazard_family = std::move(fam);
  spec.xi = xi;
  return spec;
}

// Central differences of a scalar function.
inline Eigen::VectorXd fd_gradient(const std::function<double(const Eigen::VectorXd&)>& f, const Eigen::VectorXd& x,
                                   double h = 1e-5) {
  Eigen::VectorXd g(x.size());
  for (Eigen::Index k = 0; k < x.size(); ++k) {
    Eigen::VectorXd a = x, b = x;
    a[k] += h;
    b[k] -= h;
    g[k] = (f(a) - f(b)) / (2.0 * h);
  }
  return g;
}

inline double rel_err(double a, double b) { return std::fabs(a - b) / std::max(1.0, std::fabs(b)); }

}  // namespace testing
