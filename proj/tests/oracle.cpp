#include "oracle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <Eigen/LU>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>

namespace oracle {

using ipcc::HazardKind;

double survival(const ipcc::HazardFamily& fam, const Eigen::VectorXd& h, double a, double lp) {
  double H = 0.0;
  switch (fam.kind) {
    case HazardKind::Exponential: H = h[0] * a; break;
    case HazardKind::Weibull: H = std::pow(a / h[1], h[0]); break;
    case HazardKind::PiecewiseConstant:
      for (std::size_t k = 0; k < fam.breakpoints.size(); ++k) {
        const double lo = fam.breakpoints[k];
        const double hi = k + 1 < fam.breakpoints.size() ? fam.breakpoints[k + 1] : 1e300;
        if (a > lo) H += h[static_cast<Eigen::Index>(k)] * (std::min(a, hi) - lo);
      }
      break;
  }
  return std::exp(-H * std::exp(lp));
}

double survival_integral(const ipcc::HazardFamily& fam, const Eigen::VectorXd& h, double lo, double hi, double lp) {
  boost::math::quadrature::tanh_sinh<double> ts;
  auto f = [&](double a) { return survival(fam, h, a, lp); };
  std::vector<double> cuts{lo};
  for (double t : fam.breakpoints)
    if (t > lo && t < hi) cuts.push_back(t);
  cuts.push_back(hi);
  double total = 0.0;
  for (std::size_t k = 0; k + 1 < cuts.size(); ++k) total += ts.integrate(f, cuts[k], cuts[k + 1], 1e-14);
  return total;
}

std::vector<double> backward_cdf_sorted(const ipcc::HazardFamily& fam, const Eigen::VectorXd& h, double lp, double xi,
                                        const std::vector<double>& sorted_points) {
  const double mu = survival_integral(fam, h, 0.0, xi, lp);
  boost::math::quadrature::gauss_kronrod<double, 15> gk;
  auto f = [&](double t) { return survival(fam, h, t, lp); };
  std::vector<double> cdf(sorted_points.size());
  double acc = 0.0, prev = 0.0;
  for (std::size_t i = 0; i < sorted_points.size(); ++i) {
    double lo = prev;
    for (double t : fam.breakpoints)
      if (t > lo && t < sorted_points[i]) {
        acc += gk.integrate(f, lo, t);
        lo = t;
      }
    acc += gk.integrate(f, lo, sorted_points[i]);
    prev = sorted_points[i];
    cdf[i] = acc / mu;
  }
  return cdf;
}

double ks_p_value(std::vector<double> cdf_values) {
  std::sort(cdf_values.begin(), cdf_values.end());
  const double n = static_cast<double>(cdf_values.size());
  double d = 0.0;
  for (std::size_t i = 0; i < cdf_values.size(); ++i) {
    d = std::max(d, static_cast<double>(i + 1) / n - cdf_values[i]);
    d = std::max(d, cdf_values[i] - static_cast<double>(i) / n);
  }
  const double t = (std::sqrt(n) + 0.12 + 0.11 / std::sqrt(n)) * d;
  double p = 0.0;
  for (int k = 1; k < 200; ++k) p += 2.0 * ((k % 2) ? 1.0 : -1.0) * std::exp(-2.0 * k * k * t * t);
  return std::clamp(p, 0.0, 1.0);
}

Eigen::VectorXd bfgs_max(const std::function<double(const Eigen::VectorXd&)>& f, Eigen::VectorXd x, double& best,
                         double gtol, int max_iter) {
  const Eigen::Index n = x.size();
  auto grad = [&](const Eigen::VectorXd& at) {
    Eigen::VectorXd g(n);
    const double h = 1e-5;
    for (Eigen::Index k = 0; k < n; ++k) {
      Eigen::VectorXd p = at, m = at;
      p[k] += h;
      m[k] -= h;
      g[k] = (f(p) - f(m)) / (2.0 * h);
    }
    return g;
  };
  double fx = f(x);
  Eigen::VectorXd g = grad(x);
  Eigen::MatrixXd B = Eigen::MatrixXd::Identity(n, n);  // inverse Hessian of -f
  for (int it = 0; it < max_iter && g.lpNorm<Eigen::Infinity>() > gtol; ++it) {
    Eigen::VectorXd d = B * g;
    if (d.dot(g) <= 0.0) {
      B.setIdentity();
      d = g;
    }
    double t = 1.0, ft = f(x + d);
    while (!(std::isfinite(ft) && ft >= fx + 1e-4 * t * d.dot(g)) && t > 1e-16) {
      t *= 0.5;
      ft = f(x + t * d);
    }
    if (t <= 1e-16) break;
    const Eigen::VectorXd s = t * d;
    x += s;
    fx = ft;
    const Eigen::VectorXd g_new = grad(x);
    const Eigen::VectorXd y = g - g_new;  // gradient change of -f
    g = g_new;
    const double sy = s.dot(y);
    if (sy > 1e-14) {
      const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(n, n);
      B = (I - s * y.transpose() / sy) * B * (I - y * s.transpose() / sy) + s * s.transpose() / sy;
    }
  }
  best = fx;
  return x;
}

namespace {

double cross(const Eigen::Vector2d& o, const Eigen::Vector2d& a, const Eigen::Vector2d& b) {
  return (a - o).x() * (b - o).y() - (a - o).y() * (b - o).x();
}

// True when q lies strictly inside the convex hull of the points.
bool strictly_inside_hull(std::vector<Eigen::Vector2d> pts, const Eigen::Vector2d& q) {
  std::sort(pts.begin(), pts.end(), [](const auto& a, const auto& b) { return a.x() < b.x() || (a.x() == b.x() && a.y() < b.y()); });
  std::vector<Eigen::Vector2d> hull(2 * pts.size());
  std::size_t k = 0;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    while (k >= 2 && cross(hull[k - 2], hull[k - 1], pts[i]) <= 0) --k;
    hull[k++] = pts[i];
  }
  for (std::size_t i = pts.size() - 1, t = k + 1; i-- > 0;) {
    while (k >= t && cross(hull[k - 2], hull[k - 1], pts[i]) <= 0) --k;
    hull[k++] = pts[i];
  }
  if (k < 4) return false;
  for (std::size_t i = 0; i + 1 < k; ++i)
    if (cross(hull[i], hull[i + 1], q) <= 1e-12) return false;
  return true;
}

}  // namespace

ConstrainedFit constrained_masses(const ipcc::Dataset& data, const Eigen::VectorXd& theta, double xi) {
  const double a = theta[0], nu = theta[1], beta = theta[2], rate = std::exp(theta[3]), zeta = theta[4];
  const auto N = static_cast<Eigen::Index>(data.size());
  Eigen::MatrixXd A(3, N);
  double fixed = 0.0;
  for (Eigen::Index i = 0; i < N; ++i) {
    const auto& s = data.subjects[static_cast<std::size_t>(i)];
    const double x = s.covariates[0];
    const double r = rate * std::exp(zeta * x);
    const double mu = -std::expm1(-r * xi) / r;
    A(0, i) = 1.0;
    A(1, i) = std::exp(a + x * beta);
    A(2, i) = std::exp(nu + x * beta) * mu;
    if (s.group == ipcc::GroupLabel::IncidentCase) fixed += a + x * beta;
    if (s.group == ipcc::GroupLabel::PrevalentCase) fixed += nu + x * beta - r * *s.backward_time;
  }
  const Eigen::Vector3d b = Eigen::Vector3d::Ones();
  ConstrainedFit out;
  out.value = -std::numeric_limits<double>::infinity();
  std::vector<Eigen::Vector2d> pts;
  for (Eigen::Index i = 0; i < N; ++i) pts.emplace_back(A(1, i), A(2, i));
  if (!strictly_inside_hull(pts, Eigen::Vector2d(1.0, 1.0))) return out;
  Eigen::VectorXd p = Eigen::VectorXd::Constant(N, 1.0 / static_cast<double>(N));
  Eigen::Vector3d v = Eigen::Vector3d::Zero();
  auto residual = [&](const Eigen::VectorXd& q, const Eigen::Vector3d& w) {
    Eigen::VectorXd r(N + 3);
    r.head(N) = -q.cwiseInverse() + A.transpose() * w;
    r.tail(3) = A * q - b;
    return r.norm();
  };
  for (int it = 0; it < 200; ++it) {
    const double r0 = residual(p, v);
    if ((A * p - b).lpNorm<Eigen::Infinity>() < 1e-12 && r0 < 1e-9 * static_cast<double>(N)) {
      out.converged = true;
      break;
    }
    Eigen::MatrixXd K = Eigen::MatrixXd::Zero(N + 3, N + 3);
    K.topLeftCorner(N, N) = p.array().square().inverse().matrix().asDiagonal();
    K.topRightCorner(N, 3) = A.transpose();
    K.bottomLeftCorner(3, N) = A;
    Eigen::VectorXd rhs(N + 3);
    rhs.head(N) = p.cwiseInverse();
    rhs.tail(3) = b - A * p;
    const Eigen::VectorXd sol = K.fullPivLu().solve(rhs);
    const Eigen::VectorXd dp = sol.head(N);
    const Eigen::Vector3d dv = sol.tail(3) - v;
    double t = 1.0;
    while ((p + t * dp).minCoeff() <= 0.0) t *= 0.5;
    while (residual(p + t * dp, v + t * dv) > (1.0 - 0.01 * t) * r0 && t > 1e-14) t *= 0.5;
    if (t <= 1e-14) break;
    p += t * dp;
    v += t * dv;
  }
  if (!out.converged) return out;
  out.p = p;
  out.multipliers = v;
  out.value = p.array().log().sum() + fixed;
  return out;
}

}  // namespace oracle
