#include "ipcc/estimation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <Eigen/LU>

#include "ipcc/optimizer.hpp"
#include "ipcc/rng.hpp"
#include "ipcc/survival.hpp"

namespace ipcc {
namespace {

Eigen::Index coordinate_of(const ParamLayout& layout, const FixedCoordinate& f) {
  switch (f.block) {
    case ParamBlock::Beta:
      if (static_cast<Eigen::Index>(f.index) >= layout.n_beta) break;
      return layout.beta_at() + static_cast<Eigen::Index>(f.index);
    case ParamBlock::Hazard:
      if (static_cast<Eigen::Index>(f.index) >= layout.n_hazard) break;
      return layout.hazard_at() + static_cast<Eigen::Index>(f.index);
    case ParamBlock::Zeta:
      if (static_cast<Eigen::Index>(f.index) >= layout.n_zeta) break;
      return layout.zeta_at() + static_cast<Eigen::Index>(f.index);
  }
  throw std::invalid_argument("fixed coordinate does not exist in this model");
}

Eigen::VectorXd expand(const Eigen::VectorXd& base, const std::vector<Eigen::Index>& free_idx, const Eigen::VectorXd& z) {
  Eigen::VectorXd full = base;
  for (std::size_t k = 0; k < free_idx.size(); ++k) full[free_idx[k]] = z[static_cast<Eigen::Index>(k)];
  return full;
}

struct Attempt {
  BfgsResult opt;
  Eigen::VectorXd theta;
  double loglik = -std::numeric_limits<double>::infinity();
};

}  // namespace

double FitResult::alpha_star() const {
  if (!layout.has_alpha) return std::numeric_limits<double>::quiet_NaN();
  return theta_hat.alpha - std::log(static_cast<double>(counts.n1) / static_cast<double>(counts.n0));
}

double FitResult::nu_star() const {
  if (!layout.has_nu) return std::numeric_limits<double>::quiet_NaN();
  return theta_hat.nu - std::log(static_cast<double>(counts.n2) / static_cast<double>(counts.n0));
}

Dataset incident_only(const Dataset& data) {
  Dataset out;
  out.covariate_names = data.covariate_names;
  for (const auto& s : data.subjects)
    if (s.group != GroupLabel::PrevalentCase) out.subjects.push_back(s);
  return out;
}

Dataset pool_cases(const Dataset& data) {
  Dataset out;
  out.covariate_names = data.covariate_names;
  out.subjects.reserve(data.size());
  for (auto s : data.subjects) {
    if (s.group == GroupLabel::PrevalentCase) {
      s.group = GroupLabel::IncidentCase;
      s.backward_time.reset();
    }
    out.subjects.push_back(std::move(s));
  }
  return out;
}

FitResult fit_logistic(const Dataset& data, const std::vector<std::size_t>& covariates, const FitConfig& config) {
  const auto counts = group_counts(data);
  if (counts.n2 != 0) throw std::invalid_argument("fit_logistic expects controls and incident cases only");
  if (counts.n0 == 0 || counts.n1 == 0) throw std::invalid_argument("fit_logistic needs two nonempty groups");
  const auto n = static_cast<Eigen::Index>(data.size());
  const auto p = static_cast<Eigen::Index>(covariates.size()) + 1;
  Eigen::MatrixXd x(n, p);
  x.col(0).setOnes();
  x.rightCols(p - 1) = design_matrix(data, covariates);
  Eigen::VectorXd y(n);
  for (Eigen::Index i = 0; i < n; ++i) y[i] = data.subjects[static_cast<std::size_t>(i)].group == GroupLabel::Control ? 0.0 : 1.0;

  auto loglik = [&](const Eigen::VectorXd& b) {
    Eigen::VectorXd eta = x * b;
    double ll = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      const double e = eta[i];
      const double log1pexp = e > 0 ? e + std::log1p(std::exp(-e)) : std::log1p(std::exp(e));
      ll += y[i] * e - log1pexp;
    }
    return ll;
  };

  Eigen::VectorXd b = Eigen::VectorXd::Zero(p);
  b[0] = std::log(static_cast<double>(counts.n1) / static_cast<double>(counts.n0));
  double ll = loglik(b);
  Eigen::MatrixXd info(p, p);
  Eigen::VectorXd score(p);
  FitResult r;
  bool done = false;
  int it = 0;
  for (; it < config.max_iterations; ++it) {
    Eigen::VectorXd prob = (x * b).unaryExpr([](double e) { return 1.0 / (1.0 + std::exp(-e)); });
    score = x.transpose() * (y - prob);
    Eigen::VectorXd wts = prob.array() * (1.0 - prob.array());
    info = x.transpose() * wts.asDiagonal() * x;
    if (score.lpNorm<Eigen::Infinity>() / static_cast<double>(n) <= 1e-6 * config.gradient_tolerance) {
      done = true;
      break;
    }
    Eigen::VectorXd step = info.ldlt().solve(score);
    double t = 1.0;
    double ll_new = ll;
    Eigen::VectorXd b_new;
    for (int k = 0; k < 50; ++k) {
      b_new = b + t * step;
      ll_new = loglik(b_new);
      if (std::isfinite(ll_new) && ll_new >= ll - 1e-12 * std::fabs(ll)) break;
      t *= 0.5;
    }
    b = b_new;
    ll = ll_new;
    if (b.tail(p - 1).norm() > 50.0 || !b.allFinite())
      throw SeparationError("logistic fit diverged (|beta| > 50): the groups appear separated");
    if ((t * step).lpNorm<Eigen::Infinity>() < 1e-13) {
      done = true;
      break;
    }
  }

  if (ll > -1e-6)
    throw SeparationError("logistic fit is perfect: the groups are completely separated by the covariates");

  r.layout.has_alpha = true;
  r.layout.has_nu = false;
  r.layout.n_beta = p - 1;
  r.counts = counts;
  r.theta = b;
  r.theta_hat.alpha = b[0];
  r.theta_hat.beta = b.tail(p - 1);
  r.free.assign(static_cast<std::size_t>(p), true);
  r.loglik = ll;
  r.iterations = it;
  r.n_evals = it + 1;
  r.hessian = -info;
  r.covariance = info.inverse();
  r.names.push_back("alpha");
  for (auto j : covariates) r.names.push_back("beta[" + data.covariate_names.at(j) + "]");
  r.converged = done;
  r.diagnostic = done ? "converged" : "iteration limit reached";
  return r;
}

ParamVector default_initialization(const Dataset& data, const ModelSpec& spec) {
  const auto counts = group_counts(data);
  ParamVector init;
  const auto nb = static_cast<Eigen::Index>(spec.incidence_covariates.size());
  const double n0 = static_cast<double>(counts.n0);
  const double n1 = static_cast<double>(counts.n1);
  const double n2 = static_cast<double>(counts.n2);
  double intercept = std::log((n1 + n2) / n0);
  init.beta = Eigen::VectorXd::Zero(nb);
  try {
    FitConfig cfg;
    cfg.max_iterations = 100;
    FitResult pooled = fit_logistic(pool_cases(data), spec.incidence_covariates, cfg);
    intercept = pooled.theta_hat.alpha;
    init.beta = pooled.theta_hat.beta;
  } catch (const std::exception&) {
    // separation or degenerate design: keep the flat start
  }
  // Split the pooled case intercept between the two case groups.
  init.alpha = counts.n1 > 0 ? intercept + std::log(n1 / (n1 + n2)) : 0.0;
  init.nu = 0.0;
  init.zeta = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(spec.survival_covariates.size()));
  if (counts.n2 == 0) {
    init.hazard_params.resize(0);
    init.zeta.resize(0);
    return init;
  }

  std::vector<double> a;
  for (const auto& s : data.subjects)
    if (s.group == GroupLabel::PrevalentCase && s.backward_time) a.push_back(*s.backward_time);
  double mean_a = 0.0;
  for (double v : a) mean_a += v;
  mean_a /= static_cast<double>(a.size());
  mean_a = std::max(mean_a, 1e-3 * spec.xi);

  const auto& fam = spec.hazard_family;
  switch (fam.kind) {
    case HazardKind::Exponential:
      init.hazard_params = Eigen::VectorXd::Constant(1, 1.0 / mean_a);
      break;
    case HazardKind::Weibull:
      init.hazard_params.resize(2);
      init.hazard_params << 1.0, mean_a;
      break;
    case HazardKind::PiecewiseConstant: {
      const auto& tau = fam.breakpoints;
      init.hazard_params.resize(static_cast<Eigen::Index>(tau.size()));
      for (std::size_t k = 0; k < tau.size(); ++k) {
        const double hi = k + 1 < tau.size() ? tau[k + 1] : spec.xi;
        const double cnt = static_cast<double>(
            std::count_if(a.begin(), a.end(), [&](double v) { return v >= tau[k] && (v < hi || k + 1 == tau.size()); }));
        init.hazard_params[static_cast<Eigen::Index>(k)] = std::max(cnt / (n2 * (hi - tau[k])), 1e-4);
      }
      break;
    }
  }
  // nu = log(n2/n0), offset by the average log mu at the starting survival
  // parameters so the initial prevalent tilt has the right scale.
  SurvivalModel surv(fam, init.hazard_params, init.zeta, spec.xi);
  const double log_mu0 = surv.log_mu_lp(0.0);
  init.nu = std::log(n2 / n0) + (counts.n1 > 0 ? init.alpha - std::log(n1 / n0) : intercept - std::log((n1 + n2) / n0)) - log_mu0;
  return init;
}

Eigen::MatrixXd numeric_hessian(const ProfileLikelihood& lik, const Eigen::VectorXd& theta, const std::vector<bool>& free,
                                double step) {
  std::vector<Eigen::Index> idx;
  for (std::size_t k = 0; k < free.size(); ++k)
    if (free[k]) idx.push_back(static_cast<Eigen::Index>(k));
  const auto m = static_cast<Eigen::Index>(idx.size());
  Eigen::MatrixXd h(m, m);
  Eigen::VectorXd gp, gm;
  for (Eigen::Index a = 0; a < m; ++a) {
    Eigen::VectorXd tp = theta, tm = theta;
    tp[idx[static_cast<std::size_t>(a)]] += step;
    tm[idx[static_cast<std::size_t>(a)]] -= step;
    lik.value_and_gradient(tp, gp);
    lik.value_and_gradient(tm, gm);
    for (Eigen::Index b = 0; b < m; ++b) h(b, a) = (gp[idx[static_cast<std::size_t>(b)]] - gm[idx[static_cast<std::size_t>(b)]]) / (2.0 * step);
  }
  return 0.5 * (h + h.transpose());
}

FitResult fit_ipcc(const Dataset& data, const ModelSpec& spec, const FitConfig& config) {
  auto report = validate_dataset(data, spec);
  if (!report.ok()) throw InvalidDataError("dataset failed validation", report.violations);

  ProfileLikelihood lik(data, spec);
  const ParamLayout& layout = lik.layout();
  const double n = static_cast<double>(lik.n());

  ParamVector init = config.initial_theta ? *config.initial_theta : default_initialization(data, spec);
  if (!layout.has_survival()) {
    init.hazard_params.resize(0);
    init.zeta.resize(0);
  }
  Eigen::VectorXd start = layout.pack(init);

  std::vector<bool> free(static_cast<std::size_t>(layout.size()), true);
  for (const auto& f : config.fixed) {
    const Eigen::Index k = coordinate_of(layout, f);
    if (f.block == ParamBlock::Hazard) {
      if (!(f.value > 0.0)) throw ParameterDomainError("fixed hazard parameter must be positive");
      start[k] = std::log(f.value);
    } else {
      start[k] = f.value;
    }
    free[static_cast<std::size_t>(k)] = false;
  }
  std::vector<Eigen::Index> free_idx;
  for (std::size_t k = 0; k < free.size(); ++k)
    if (free[k]) free_idx.push_back(static_cast<Eigen::Index>(k));

  try {
    lik.value(start);
  } catch (const EvaluationError& e) {
    throw InitializationError(std::string("likelihood cannot be evaluated at the initial point: ") + e.what());
  }

  int evals = 0;
  auto run_from = [&](const Eigen::VectorXd& from) {
    Objective obj = [&](const Eigen::VectorXd& z, Eigen::VectorXd* grad) -> double {
      Eigen::VectorXd full = expand(from, free_idx, z);
      try {
        Eigen::VectorXd g;
        const double v = lik.value_and_gradient(full, g);
        if (grad) {
          grad->resize(z.size());
          for (std::size_t k = 0; k < free_idx.size(); ++k) (*grad)[static_cast<Eigen::Index>(k)] = -g[free_idx[k]] / n;
        }
        return -v / n;
      } catch (const EvaluationError&) {
        return std::numeric_limits<double>::infinity();
      } catch (const ParameterDomainError&) {
        return std::numeric_limits<double>::infinity();
      }
    };
    Eigen::VectorXd z0(static_cast<Eigen::Index>(free_idx.size()));
    for (std::size_t k = 0; k < free_idx.size(); ++k) z0[static_cast<Eigen::Index>(k)] = from[free_idx[k]];
    BfgsOptions opts;
    opts.max_iterations = config.max_iterations;
    opts.gradient_tolerance = config.gradient_tolerance;
    Attempt a;
    a.opt = minimize_bfgs(obj, z0, opts);
    evals += a.opt.evaluations;
    a.theta = expand(from, free_idx, a.opt.x);
    a.loglik = -a.opt.value * n;
    return a;
  };

  std::vector<Attempt> attempts;
  attempts.push_back(run_from(start));
  RandomStream rng(config.seed, {0x5245u});
  for (int r = 0; r < config.n_restarts; ++r) {
    Eigen::VectorXd perturbed = start;
    for (auto k : free_idx) perturbed[k] += 0.25 * rng.normal();
    try {
      lik.value(perturbed);
    } catch (const EvaluationError&) {
      perturbed = start;
    }
    attempts.push_back(run_from(perturbed));
  }

  // Converged attempts first, then highest log-likelihood; near-ties go to
  // the lowest restart index.
  std::size_t best = 0;
  for (std::size_t k = 1; k < attempts.size(); ++k) {
    const auto& a = attempts[k];
    const auto& b = attempts[best];
    if (a.opt.converged != b.opt.converged) {
      if (a.opt.converged) best = k;
      continue;
    }
    if (a.loglik > b.loglik + 1e-10) best = k;
  }
  const Attempt& win = attempts[best];

  FitResult r;
  r.layout = layout;
  r.counts = lik.counts();
  r.names = layout.names(data, spec);
  r.theta = win.theta;
  r.theta_hat = layout.unpack(win.theta);
  r.free = free;
  r.loglik = win.loglik;
  r.n_evals = evals;
  r.iterations = win.opt.iterations;
  r.restart_used = static_cast<int>(best);
  r.converged = win.opt.converged;
  r.diagnostic = win.opt.message;

  try {
    r.hessian = numeric_hessian(lik, r.theta, free);
  } catch (const EvaluationError& e) {
    r.converged = false;
    r.diagnostic = std::string("Hessian evaluation failed: ") + e.what();
    return r;
  }
  if (r.converged && r.hessian.size() > 0) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(r.hessian, Eigen::EigenvaluesOnly);
    const double scale = es.eigenvalues().cwiseAbs().maxCoeff();
    if (es.eigenvalues().maxCoeff() > 1e-6 * scale) {
      r.converged = false;
      std::ostringstream os;
      os << "stationary point is not a maximum (Hessian eigenvalue " << es.eigenvalues().maxCoeff() << ")";
      r.diagnostic = os.str();
    }
  }
  try {
    r.masses = recover_masses(r.theta_hat, data, spec);
  } catch (const NonConvergenceError& e) {
    r.converged = false;
    r.diagnostic = e.what();
  }
  return r;
}

}  // namespace ipcc
