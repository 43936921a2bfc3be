#include "ipcc/inference.hpp"

#include <cmath>
#include <sstream>

#include <Eigen/Eigenvalues>
#include <Eigen/LU>

#include "ipcc/parallel.hpp"
#include "ipcc/special.hpp"

namespace ipcc {
namespace {

constexpr double kHessianStep = 1e-4;

bool negative_semidefinite(const Eigen::MatrixXd& h) {
  if (h.size() == 0) return true;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(h, Eigen::EigenvaluesOnly);
  return es.eigenvalues().maxCoeff() <= 1e-8 * es.eigenvalues().cwiseAbs().maxCoeff();
}

CovarianceEstimate sandwich_at(const ProfileLikelihood& lik, const Eigen::VectorXd& theta, const std::vector<bool>& free,
                               const std::vector<std::string>& names) {
  CovarianceEstimate c;
  for (std::size_t k = 0; k < free.size(); ++k)
    if (free[k]) c.coordinates.push_back(static_cast<Eigen::Index>(k));
  const auto m = static_cast<Eigen::Index>(c.coordinates.size());
  const double n = static_cast<double>(lik.n());

  Eigen::MatrixXd h = numeric_hessian(lik, theta, free, kHessianStep);
  if (!negative_semidefinite(h)) {
    Eigen::MatrixXd h_half = numeric_hessian(lik, theta, free, 0.5 * kHessianStep);
    h = (4.0 * h_half - h) / 3.0;
    c.richardson = true;
  }
  c.v_hat = h / n;

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(c.v_hat);
  const Eigen::VectorXd ev = es.eigenvalues().cwiseAbs();
  Eigen::Index weakest = 0;
  const double smallest = ev.minCoeff(&weakest);
  if (m > 0 && (!(smallest > 0.0) || ev.maxCoeff() / smallest > 1e12)) {
    Eigen::Index worst = 0;
    es.eigenvectors().col(weakest).cwiseAbs().maxCoeff(&worst);
    const std::string name = names.at(static_cast<std::size_t>(c.coordinates[static_cast<std::size_t>(worst)]));
    throw SingularInformationError("information matrix is singular or ill-conditioned near " + name, name);
  }

  c.sigma_hat = Eigen::MatrixXd::Zero(m, m);
  return c;
}

}  // namespace

Eigen::VectorXd CovarianceEstimate::sd() const { return omega_over_n.diagonal().cwiseMax(0.0).cwiseSqrt(); }

Eigen::VectorXd CovarianceEstimate::natural_sd(const FitResult& fit) const {
  Eigen::VectorXd s = sd();
  for (std::size_t k = 0; k < coordinates.size(); ++k) {
    const Eigen::Index idx = coordinates[k];
    if (idx >= fit.layout.hazard_at() && idx < fit.layout.zeta_at()) s[static_cast<Eigen::Index>(k)] *= std::exp(fit.theta[idx]);
  }
  return s;
}

Eigen::MatrixXd CovarianceEstimate::full(Eigen::Index size) const {
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(size, size);
  for (std::size_t a = 0; a < coordinates.size(); ++a)
    for (std::size_t b = 0; b < coordinates.size(); ++b)
      out(coordinates[a], coordinates[b]) = omega_over_n(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b));
  return out;
}

static CovarianceEstimate sandwich_impl(const Dataset& data, const ModelSpec& spec, const Eigen::VectorXd& theta,
                                        const std::vector<bool>& free, const std::vector<std::string>& names) {
  ProfileLikelihood lik(data, spec);
  CovarianceEstimate c = sandwich_at(lik, theta, free, names);
  const auto m = static_cast<Eigen::Index>(c.coordinates.size());
  const double n = static_cast<double>(lik.n());

  Eigen::MatrixXd scores_full = lik.subject_scores(theta);
  for (int g = 0; g < 3; ++g) {
    std::vector<Eigen::Index> rows;
    for (std::size_t i = 0; i < data.size(); ++i)
      if (static_cast<int>(data.subjects[i].group) == g) rows.push_back(static_cast<Eigen::Index>(i));
    if (rows.empty()) continue;
    Eigen::MatrixXd s(static_cast<Eigen::Index>(rows.size()), m);
    for (std::size_t r = 0; r < rows.size(); ++r)
      for (Eigen::Index j = 0; j < m; ++j) s(static_cast<Eigen::Index>(r), j) = scores_full(rows[r], c.coordinates[static_cast<std::size_t>(j)]);
    Eigen::RowVectorXd mean = s.colwise().mean();
    s.rowwise() -= mean;
    c.sigma_hat += s.transpose() * s;
  }
  c.sigma_hat /= n;

  Eigen::MatrixXd v_inv = c.v_hat.inverse();
  c.omega_over_n = v_inv * c.sigma_hat * v_inv / n;
  c.omega_over_n = (0.5 * (c.omega_over_n + c.omega_over_n.transpose())).eval();
  return c;
}

CovarianceEstimate sandwich_covariance(const FitResult& fit, const Dataset& data, const ModelSpec& spec) {
  return sandwich_impl(data, spec, fit.theta, fit.free, fit.names);
}

CovarianceEstimate sandwich_covariance(const ParamVector& theta_hat, const Dataset& data, const ModelSpec& spec) {
  ProfileLikelihood lik(data, spec);
  const auto& layout = lik.layout();
  std::vector<bool> free(static_cast<std::size_t>(layout.size()), true);
  return sandwich_impl(data, spec, layout.pack(theta_hat), free, layout.names(data, spec));
}

LrtResult lrt(const Dataset& data, const ModelSpec& spec, const FitConfig& config,
              const std::vector<FixedCoordinate>& restriction) {
  if (restriction.empty()) return {};
  FitConfig full_cfg = config;
  full_cfg.fixed.clear();
  FitResult full = fit_ipcc(data, spec, full_cfg);
  return lrt(data, spec, config, restriction, full);
}

LrtResult lrt(const Dataset& data, const ModelSpec& spec, const FitConfig& config,
              const std::vector<FixedCoordinate>& restriction, const FitResult& full_fit) {
  LrtResult r;
  if (restriction.empty()) return r;
  FitConfig cfg = config;
  cfg.fixed = restriction;
  cfg.initial_theta = full_fit.theta_hat;
  FitResult restricted = fit_ipcc(data, spec, cfg);

  double ll_full = full_fit.loglik;
  bool full_ok = full_fit.converged;
  if (restricted.loglik > ll_full + 1e-6) {
    // The unrestricted fit missed the global maximum; restart it from the
    // restricted optimum.
    FitConfig again = config;
    again.fixed.clear();
    again.initial_theta = restricted.theta_hat;
    FitResult refit = fit_ipcc(data, spec, again);
    if (refit.loglik > ll_full) {
      ll_full = refit.loglik;
      full_ok = refit.converged;
    }
  }
  r.loglik_full = ll_full;
  r.loglik_restricted = restricted.loglik;
  r.df = static_cast<int>(restriction.size());
  r.statistic = std::max(0.0, 2.0 * (ll_full - restricted.loglik));
  r.p_value = special::chi2_upper_tail(r.statistic, r.df);
  r.converged = full_ok && restricted.converged;
  if (!full_ok) r.diagnostic = "unrestricted fit did not converge: " + full_fit.diagnostic;
  else if (!restricted.converged) r.diagnostic = "restricted fit did not converge: " + restricted.diagnostic;
  return r;
}

JackknifeResult jackknife_se(const Dataset& data, const ModelSpec& spec, const FitConfig& config,
                             const FitResult& full_fit, const JackknifeOptions& options) {
  const std::size_t n = data.size();
  if (n > options.max_n)
    throw JackknifeError("dataset has " + std::to_string(n) + " subjects, above the jackknife limit of " +
                         std::to_string(options.max_n));
  const Eigen::Index p = full_fit.theta.size();
  Eigen::MatrixXd est(static_cast<Eigen::Index>(n), p);
  Eigen::MatrixXd star(static_cast<Eigen::Index>(n), p);
  std::vector<char> ok(n, 0);

  FitConfig cfg = config;
  cfg.initial_theta = full_fit.theta_hat;
  cfg.n_restarts = 0;
  parallel_for(n, options.threads, [&](std::size_t i) {
    Dataset loo;
    loo.covariate_names = data.covariate_names;
    loo.subjects.reserve(n - 1);
    for (std::size_t k = 0; k < n; ++k)
      if (k != i) loo.subjects.push_back(data.subjects[k]);
    try {
      FitResult f = fit_ipcc(loo, spec, cfg);
      if (f.converged && f.layout == full_fit.layout) {
        est.row(static_cast<Eigen::Index>(i)) = f.theta.transpose();
        star.row(static_cast<Eigen::Index>(i)) = est.row(static_cast<Eigen::Index>(i));
        if (f.layout.has_alpha) star(static_cast<Eigen::Index>(i), f.layout.alpha_at()) = f.alpha_star();
        if (f.layout.has_nu) star(static_cast<Eigen::Index>(i), f.layout.nu_at()) = f.nu_star();
        ok[i] = 1;
      }
    } catch (const std::exception&) {
    }
  });

  JackknifeResult r;
  for (char v : ok) r.used += v ? 1 : 0;
  r.failures = n - r.used;
  if (static_cast<double>(r.failures) > 0.05 * static_cast<double>(n))
    throw JackknifeError(std::to_string(r.failures) + " of " + std::to_string(n) + " leave-one-out fits failed");

  Eigen::MatrixXd good(static_cast<Eigen::Index>(r.used), p);
  Eigen::MatrixXd natural(static_cast<Eigen::Index>(r.used), p);
  Eigen::Index row = 0;
  for (std::size_t i = 0; i < n; ++i)
    if (ok[i]) {
      good.row(row) = est.row(static_cast<Eigen::Index>(i));
      natural.row(row++) = star.row(static_cast<Eigen::Index>(i));
    }
  for (Eigen::Index j = full_fit.layout.hazard_at(); j < full_fit.layout.zeta_at(); ++j)
    natural.col(j) = natural.col(j).array().exp().matrix();

  const double m = static_cast<double>(r.used);
  auto jk = [&](const Eigen::MatrixXd& x) {
    Eigen::MatrixXd centered = x.rowwise() - x.colwise().mean();
    return Eigen::VectorXd(((m - 1.0) / m * centered.colwise().squaredNorm().transpose()).cwiseSqrt());
  };
  r.se_unconstrained = jk(good);
  r.se = jk(natural);
  return r;
}

}  // namespace ipcc
