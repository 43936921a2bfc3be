#include "ipcc/likelihood.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "ipcc/survival.hpp"

namespace ipcc {

ParamLayout ParamLayout::make(const ModelSpec& spec, const GroupCounts& counts) {
  ParamLayout l;
  l.has_alpha = counts.n1 > 0;
  l.has_nu = counts.n2 > 0;
  l.n_beta = static_cast<Eigen::Index>(spec.incidence_covariates.size());
  if (l.has_nu) {
    l.n_hazard = static_cast<Eigen::Index>(spec.hazard_family.n_params());
    l.n_zeta = static_cast<Eigen::Index>(spec.survival_covariates.size());
  }
  return l;
}

Eigen::VectorXd ParamLayout::pack(const ParamVector& theta) const {
  if (theta.beta.size() != n_beta) throw std::invalid_argument("beta has the wrong dimension");
  if (has_survival() && (theta.hazard_params.size() != n_hazard || theta.zeta.size() != n_zeta))
    throw std::invalid_argument("survival parameters have the wrong dimension");
  theta.check();
  Eigen::VectorXd v(size());
  if (has_alpha) v[alpha_at()] = theta.alpha;
  if (has_nu) v[nu_at()] = theta.nu;
  v.segment(beta_at(), n_beta) = theta.beta;
  if (has_survival()) {
    v.segment(hazard_at(), n_hazard) = theta.hazard_params.array().log().matrix();
    v.segment(zeta_at(), n_zeta) = theta.zeta;
  }
  return v;
}

ParamVector ParamLayout::unpack(const Eigen::VectorXd& v) const {
  if (v.size() != size()) throw std::invalid_argument("parameter vector has the wrong length");
  ParamVector p;
  p.alpha = has_alpha ? v[alpha_at()] : 0.0;
  p.nu = has_nu ? v[nu_at()] : 0.0;
  p.beta = v.segment(beta_at(), n_beta);
  p.hazard_params = v.segment(hazard_at(), n_hazard).array().exp().matrix();
  p.zeta = v.segment(zeta_at(), n_zeta);
  return p;
}

std::vector<std::string> ParamLayout::names(const Dataset& data, const ModelSpec& spec, bool natural_scale) const {
  std::vector<std::string> out;
  if (has_alpha) out.push_back("alpha");
  if (has_nu) out.push_back("nu");
  for (auto j : spec.incidence_covariates) out.push_back("beta[" + data.covariate_names.at(j) + "]");
  if (has_survival()) {
    for (const auto& h : spec.hazard_family.param_names()) out.push_back(natural_scale ? h : "log_" + h);
    for (auto j : spec.survival_covariates) out.push_back("zeta[" + data.covariate_names.at(j) + "]");
  }
  return out;
}

ProfileLikelihood::ProfileLikelihood(const Dataset& data, const ModelSpec& spec)
    : spec_(spec), counts_(group_counts(data)), layout_(ParamLayout::make(spec, counts_)) {
  spec_.check(data.n_covariates());
  const auto n = static_cast<Eigen::Index>(data.size());
  groups_.resize(n);
  backward_ = Eigen::VectorXd::Zero(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& s = data.subjects[static_cast<std::size_t>(i)];
    groups_[i] = static_cast<int>(s.group);
    if (s.group == GroupLabel::PrevalentCase) {
      if (!s.backward_time) throw std::invalid_argument("prevalent subject without backward time");
      backward_[i] = *s.backward_time;
    }
  }
  x_incidence_ = design_matrix(data, spec.incidence_covariates);
  x_survival_ = design_matrix(data, spec.survival_covariates);
}

template <bool WithGradient>
double ProfileLikelihood::evaluate(const Eigen::VectorXd& theta, Eigen::VectorXd* gradient, Eigen::MatrixXd* scores,
                                   Eigen::VectorXd* terms) const {
  const ParamLayout& L = layout_;
  if (theta.size() != L.size()) throw std::invalid_argument("parameter vector has the wrong length");
  const double alpha = L.has_alpha ? theta[L.alpha_at()] : 0.0;
  const double nu = L.has_nu ? theta[L.nu_at()] : 0.0;
  const Eigen::VectorXd beta = theta.segment(L.beta_at(), L.n_beta);

  std::optional<SurvivalModel> surv;
  if (L.has_survival()) {
    Eigen::VectorXd hazard = theta.segment(L.hazard_at(), L.n_hazard).array().exp().matrix();
    if (!hazard.allFinite() || (hazard.array() <= 0.0).any())
      throw EvaluationError("hazard parameters out of range", 0);
    surv.emplace(spec_.hazard_family, std::move(hazard), theta.segment(L.zeta_at(), L.n_zeta), spec_.xi);
  }

  const auto n = groups_.size();
  const auto p = L.size();
  Eigen::VectorXd grad_i(p);
  Eigen::VectorXd dmu_h(L.n_hazard), ds_h(L.n_hazard);
  if constexpr (WithGradient) {
    if (gradient) gradient->setZero(p);
    if (scores) scores->setZero(n, p);
  }
  if (terms) terms->resize(n);

  const double neg_inf = -std::numeric_limits<double>::infinity();
  double total = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const int g = groups_[i];
    const double xb = x_incidence_.row(i).dot(beta);
    const double a = L.has_alpha ? alpha + xb : neg_inf;
    double b = neg_inf, lp = 0.0, log_mu = 0.0, dmu_lp = 0.0;
    if (surv) {
      lp = x_survival_.row(i).dot(surv->zeta());
      if constexpr (WithGradient) log_mu = surv->log_mu_with_grad(lp, dmu_h, dmu_lp);
      else log_mu = surv->log_mu_lp(lp);
      b = nu + xb + log_mu;
    }
    const double m = std::max({0.0, a, b});
    const double log_eta = m + std::log(std::exp(-m) + std::exp(a - m) + std::exp(b - m));
    double term = -log_eta;
    double ls = 0.0, ds_lp = 0.0;
    if (g == 1) {
      term += a;
    } else if (g == 2) {
      if constexpr (WithGradient) ls = surv->log_survival_with_grad(backward_[i], lp, ds_h, ds_lp);
      else ls = surv->log_survival_lp(backward_[i], lp);
      term += nu + xb + ls;
    }
    if (!std::isfinite(term)) throw EvaluationError("non-finite likelihood contribution", static_cast<std::size_t>(i));
    if (terms) (*terms)[i] = term;
    total += term;

    if constexpr (WithGradient) {
      const double pi1 = L.has_alpha ? std::exp(a - log_eta) : 0.0;
      const double pi2 = surv ? std::exp(b - log_eta) : 0.0;
      grad_i.setZero();
      if (L.has_alpha) grad_i[L.alpha_at()] = (g == 1 ? 1.0 : 0.0) - pi1;
      if (L.has_nu) grad_i[L.nu_at()] = (g == 2 ? 1.0 : 0.0) - pi2;
      grad_i.segment(L.beta_at(), L.n_beta) = ((g != 0 ? 1.0 : 0.0) - pi1 - pi2) * x_incidence_.row(i).transpose();
      if (surv) {
        Eigen::VectorXd dh = -pi2 * dmu_h;
        double dl = -pi2 * dmu_lp;
        if (g == 2) {
          dh += ds_h;
          dl += ds_lp;
        }
        grad_i.segment(L.hazard_at(), L.n_hazard) = dh;
        grad_i.segment(L.zeta_at(), L.n_zeta) = dl * x_survival_.row(i).transpose();
      }
      if (!grad_i.allFinite()) throw EvaluationError("non-finite score contribution", static_cast<std::size_t>(i));
      if (gradient) *gradient += grad_i;
      if (scores) scores->row(i) = grad_i.transpose();
    }
  }
  return total;
}

double ProfileLikelihood::value(const Eigen::VectorXd& theta) const {
  return evaluate<false>(theta, nullptr, nullptr, nullptr);
}

double ProfileLikelihood::value_and_gradient(const Eigen::VectorXd& theta, Eigen::VectorXd& gradient) const {
  return evaluate<true>(theta, &gradient, nullptr, nullptr);
}

Eigen::MatrixXd ProfileLikelihood::subject_scores(const Eigen::VectorXd& theta) const {
  Eigen::MatrixXd s;
  evaluate<true>(theta, nullptr, &s, nullptr);
  return s;
}

Eigen::VectorXd ProfileLikelihood::subject_terms(const Eigen::VectorXd& theta) const {
  Eigen::VectorXd t;
  evaluate<false>(theta, nullptr, nullptr, &t);
  return t;
}

TiltWeights ProfileLikelihood::weights(const Eigen::VectorXd& theta) const {
  const ParamLayout& L = layout_;
  const auto n = groups_.size();
  TiltWeights w;
  w.w1 = Eigen::VectorXd::Zero(n);
  w.w2 = Eigen::VectorXd::Zero(n);
  const Eigen::VectorXd beta = theta.segment(L.beta_at(), L.n_beta);
  std::optional<SurvivalModel> surv;
  if (L.has_survival())
    surv.emplace(spec_.hazard_family, theta.segment(L.hazard_at(), L.n_hazard).array().exp().matrix(),
                 theta.segment(L.zeta_at(), L.n_zeta), spec_.xi);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double xb = x_incidence_.row(i).dot(beta);
    if (L.has_alpha) w.w1[i] = std::exp(theta[L.alpha_at()] + xb);
    if (surv)
      w.w2[i] = std::exp(theta[L.nu_at()] + xb + surv->log_mu_lp(x_survival_.row(i).dot(surv->zeta())));
  }
  w.eta = (1.0 + w.w1.array() + w.w2.array()).matrix();
  return w;
}

double profile_loglik(const ParamVector& theta, const Dataset& data, const ModelSpec& spec) {
  ProfileLikelihood lik(data, spec);
  return lik.value(lik.layout().pack(theta));
}

Eigen::VectorXd profile_score(const ParamVector& theta, const Dataset& data, const ModelSpec& spec) {
  ProfileLikelihood lik(data, spec);
  Eigen::VectorXd g;
  lik.value_and_gradient(lik.layout().pack(theta), g);
  return g;
}

EmpiricalMasses recover_masses(const ParamVector& theta_hat, const Dataset& data, const ModelSpec& spec) {
  ProfileLikelihood lik(data, spec);
  const auto& c = lik.counts();
  const double n = static_cast<double>(c.total());
  const double n0 = static_cast<double>(c.n0);
  TiltWeights w = lik.weights(lik.layout().pack(theta_hat));
  // Starred tilts use alpha* = alpha - log(n1/n0), nu* = nu - log(n2/n0).
  Eigen::VectorXd w1s = c.n1 > 0 ? Eigen::VectorXd(w.w1 * (n0 / static_cast<double>(c.n1))) : w.w1;
  Eigen::VectorXd w2s = c.n2 > 0 ? Eigen::VectorXd(w.w2 * (n0 / static_cast<double>(c.n2))) : w.w2;

  EmpiricalMasses m;
  m.lambda1 = static_cast<double>(c.n1) / n;
  m.lambda2 = static_cast<double>(c.n2) / n;
  Eigen::ArrayXd denom = 1.0 + m.lambda1 * (w1s.array() - 1.0) + m.lambda2 * (w2s.array() - 1.0);
  if (c.n1 == 0) denom = 1.0 + m.lambda2 * (w2s.array() - 1.0);
  if (c.n2 == 0) denom = 1.0 + m.lambda1 * (w1s.array() - 1.0);
  m.p = (1.0 / (n * denom)).matrix();
  m.residual_total = std::fabs(m.p.sum() - 1.0);
  m.residual_w1 = c.n1 > 0 ? std::fabs(m.p.dot(w1s) - 1.0) : 0.0;
  m.residual_w2 = c.n2 > 0 ? std::fabs(m.p.dot(w2s) - 1.0) : 0.0;
  const double worst = std::max({m.residual_total, m.residual_w1, m.residual_w2});
  if (worst > 1e-4)
    throw NonConvergenceError("empirical mass constraints violated (residual " + std::to_string(worst) +
                              "); theta is not a stationary point");
  return m;
}

}  // namespace ipcc
