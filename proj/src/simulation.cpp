#include "ipcc/simulation.hpp"

#include <chrono>
#include <cmath>
#include <limits>
#include <numbers>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include "ipcc/inference.hpp"
#include "ipcc/parallel.hpp"

namespace ipcc {
namespace {

enum Purpose : std::uint64_t { kControls = 1, kIncident = 2, kPrevalentBase = 3, kResample = 4, kBackward = 5, kFit = 6 };

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

Eigen::MatrixXd cholesky_factor(const Eigen::MatrixXd& cov) {
  Eigen::LLT<Eigen::MatrixXd> llt(cov);
  if (llt.info() != Eigen::Success) throw std::invalid_argument("covariate covariance is not positive definite");
  return llt.matrixL();
}

Eigen::MatrixXd gaussian_rows(std::size_t n, const Eigen::VectorXd& mean, const Eigen::MatrixXd& chol,
                              RandomStream& rng) {
  const auto d = chol.rows();
  Eigen::MatrixXd out(static_cast<Eigen::Index>(n), d);
  Eigen::VectorXd z(d);
  for (Eigen::Index i = 0; i < static_cast<Eigen::Index>(n); ++i) {
    for (Eigen::Index j = 0; j < d; ++j) z[j] = rng.normal();
    out.row(i) = (mean + chol * z).transpose();
  }
  return out;
}

// Physicists' Gauss-Hermite rule via Golub-Welsch: int e^{-t^2} f(t) dt.
void gauss_hermite(int n, Eigen::VectorXd& nodes, Eigen::VectorXd& weights) {
  Eigen::MatrixXd j = Eigen::MatrixXd::Zero(n, n);
  for (int k = 1; k < n; ++k) j(k, k - 1) = j(k - 1, k) = std::sqrt(0.5 * k);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(j);
  nodes = es.eigenvalues();
  weights = std::sqrt(std::numbers::pi) * es.eigenvectors().row(0).transpose().array().square().matrix();
}

Eigen::VectorXd generation_beta(const SimScenario& scn) {
  Eigen::VectorXd b = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(scn.n_generated()));
  b.head(scn.beta.size()) = scn.beta;
  return b;
}

SurvivalModel generation_survival(const SimScenario& scn) {
  return SurvivalModel(scn.gen_family, scn.gen_params, scn.zeta, scn.xi);
}

double sample_time(const SurvivalModel& s, std::span<const double> x, double u) {
  return s.has_unit_shape() ? s.sample_backward_time(x, u) : s.sample_backward_time_numeric(x, u);
}

struct ReportEntry {
  std::string name;
  double value;
  double variance;
};

std::vector<ReportEntry> report_entries(const FitResult& fit, const CovarianceEstimate* cov,
                                        const HazardFamily& family) {
  const auto& L = fit.layout;
  Eigen::MatrixXd full = cov ? cov->full(L.size()) : Eigen::MatrixXd::Constant(L.size(), L.size(), kNaN);
  std::vector<ReportEntry> out;
  if (L.has_alpha) out.push_back({"alpha_star", fit.alpha_star(), full(L.alpha_at(), L.alpha_at())});
  if (L.has_nu) {
    out.push_back({"nu", fit.theta[L.nu_at()], full(L.nu_at(), L.nu_at())});
    out.push_back({"nu_star", fit.nu_star(), full(L.nu_at(), L.nu_at())});
  }
  for (Eigen::Index j = 0; j < L.n_beta; ++j)
    out.push_back({"beta" + std::to_string(j + 1), fit.theta[L.beta_at() + j], full(L.beta_at() + j, L.beta_at() + j)});
  const auto hnames = family.param_names();
  for (Eigen::Index j = 0; j < L.n_hazard; ++j) {
    const Eigen::Index k = L.hazard_at() + j;
    const double v = std::exp(fit.theta[k]);
    out.push_back({hnames[static_cast<std::size_t>(j)], v, v * v * full(k, k)});
  }
  for (Eigen::Index j = 0; j < L.n_zeta; ++j)
    out.push_back({"zeta" + std::to_string(j + 1), fit.theta[L.zeta_at() + j], full(L.zeta_at() + j, L.zeta_at() + j)});
  return out;
}

std::vector<double> truths(const SimScenario& scn, const std::vector<ReportEntry>& entries) {
  std::vector<double> t;
  const double nu_star = scn.n2 > 0 ? true_nu_star(scn) : kNaN;
  const bool same_family = scn.gen_family == scn.fit_family;
  const auto hnames = scn.fit_family.param_names();
  for (const auto& e : entries) {
    if (e.name == "alpha_star") t.push_back(true_alpha_star(scn));
    else if (e.name == "nu") t.push_back(nu_star + std::log(static_cast<double>(scn.n2) / static_cast<double>(scn.n0)));
    else if (e.name == "nu_star") t.push_back(nu_star);
    else if (e.name.rfind("beta", 0) == 0) t.push_back(scn.beta[std::stoi(e.name.substr(4)) - 1]);
    else if (e.name.rfind("zeta", 0) == 0) t.push_back(scn.zeta[std::stoi(e.name.substr(4)) - 1]);
    else {
      double v = kNaN;
      if (same_family)
        for (std::size_t k = 0; k < hnames.size(); ++k)
          if (hnames[k] == e.name) v = scn.gen_params[static_cast<Eigen::Index>(k)];
      t.push_back(v);
    }
  }
  return t;
}

}  // namespace

Eigen::MatrixXd SimScenario::covariate_covariance() const {
  const auto d = beta.size();
  Eigen::MatrixXd cov = Eigen::MatrixXd::Constant(d, d, rho);
  cov.diagonal().setOnes();
  if (omitted_covariate) {
    if (d != 2) throw std::invalid_argument("the omitted-covariate design needs two fitted covariates");
    Eigen::MatrixXd ext(3, 3);
    ext.topLeftCorner(2, 2) = cov;
    const double c = 0.5 + 0.5 * rho;  // cov(X3, Xj)
    ext(0, 2) = ext(2, 0) = c;
    ext(1, 2) = ext(2, 1) = c;
    ext(2, 2) = 0.25 * (2.0 + 2.0 * rho) + 0.25;
    cov = ext;
  }
  cholesky_factor(cov);
  return cov;
}

ModelSpec SimScenario::fit_spec() const {
  ModelSpec s;
  for (std::size_t j = 0; j < n_fitted(); ++j) {
    s.incidence_covariates.push_back(j);
    s.survival_covariates.push_back(j);
  }
  s.hazard_family = fit_family;
  s.xi = xi;
  return s;
}

void SimScenario::check() const {
  if (n0 == 0 || n1 + n2 == 0) throw std::invalid_argument("scenario needs controls and cases");
  if (!(rho > -1.0 && rho < 1.0)) throw std::invalid_argument("rho must lie in (-1, 1)");
  if (replications < 1) throw std::invalid_argument("replications must be positive");
  if (static_cast<std::size_t>(zeta.size()) != n_generated())
    throw std::invalid_argument("zeta must have one entry per generated covariate");
  if (!(oversample >= 1.0)) throw std::invalid_argument("oversample factor must be at least 1");
  covariate_covariance();
  generation_survival(*this);
}

Eigen::MatrixXd generate_controls(std::size_t n0, const Eigen::MatrixXd& cov, RandomStream& rng) {
  return gaussian_rows(n0, Eigen::VectorXd::Zero(cov.rows()), cholesky_factor(cov), rng);
}

Eigen::MatrixXd generate_incident(std::size_t n1, const Eigen::VectorXd& beta, const Eigen::MatrixXd& cov,
                                  RandomStream& rng) {
  return gaussian_rows(n1, cov * beta, cholesky_factor(cov), rng);
}

PrevalentDraw generate_prevalent(std::size_t n2, const Eigen::VectorXd& beta, const SurvivalModel& gen_survival,
                                 const Eigen::MatrixXd& cov, double oversample, RandomStream& base_rng,
                                 RandomStream& resample_rng, RandomStream& time_rng) {
  PrevalentDraw out;
  const auto d = cov.rows();
  out.covariates.resize(static_cast<Eigen::Index>(n2), d);
  out.backward_times.resize(static_cast<Eigen::Index>(n2));
  if (n2 == 0) return out;
  out.base_size = static_cast<std::size_t>(std::ceil(oversample * static_cast<double>(n2)));
  Eigen::MatrixXd base = gaussian_rows(out.base_size, Eigen::VectorXd::Zero(d), cholesky_factor(cov), base_rng);

  std::vector<double> log_w(out.base_size);
  double max_log_w = -std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < out.base_size; ++k) {
    const Eigen::VectorXd x = base.row(static_cast<Eigen::Index>(k)).transpose();
    log_w[k] = x.dot(beta) + gen_survival.log_mu_lp(x.dot(gen_survival.zeta()));
    max_log_w = std::max(max_log_w, log_w[k]);
  }
  std::vector<double> cumulative(out.base_size);
  double sum = 0.0, sum_sq = 0.0;
  for (std::size_t k = 0; k < out.base_size; ++k) {
    const double w = std::exp(log_w[k] - max_log_w);
    sum += w;
    sum_sq += w * w;
    cumulative[k] = sum;
  }
  out.effective_sample_size = sum * sum / sum_sq;
  if (out.effective_sample_size < 2.0 * static_cast<double>(n2))
    throw OversampleError("effective sample size " + std::to_string(out.effective_sample_size) +
                          " of the prevalent resampling weights is below 2 n2; increase the oversample factor");

  for (Eigen::Index i = 0; i < static_cast<Eigen::Index>(n2); ++i) {
    const auto k = static_cast<Eigen::Index>(resample_rng.pick(cumulative));
    out.covariates.row(i) = base.row(k);
  }
  for (Eigen::Index i = 0; i < static_cast<Eigen::Index>(n2); ++i) {
    const Eigen::VectorXd x = out.covariates.row(i).transpose();
    out.backward_times[i] = sample_time(gen_survival, std::span<const double>(x.data(), static_cast<std::size_t>(x.size())),
                                        time_rng.uniform());
  }
  return out;
}

SimulatedSample simulate_dataset(const SimScenario& scn, std::uint64_t replication) {
  const Eigen::MatrixXd cov = scn.covariate_covariance();
  const Eigen::VectorXd beta = generation_beta(scn);
  RandomStream root(scn.seed, {replication});
  RandomStream controls_rng = root.child(kControls), incident_rng = root.child(kIncident);
  RandomStream base_rng = root.child(kPrevalentBase), resample_rng = root.child(kResample);
  RandomStream time_rng = root.child(kBackward);

  SimulatedSample out;
  const auto d = static_cast<std::size_t>(cov.rows());
  for (std::size_t j = 0; j < d; ++j) out.data.covariate_names.push_back("x" + std::to_string(j + 1));
  auto append = [&](const Eigen::MatrixXd& x, GroupLabel g, const Eigen::VectorXd* times) {
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
      Subject s;
      s.group = g;
      s.covariates.resize(d);
      for (std::size_t j = 0; j < d; ++j) s.covariates[j] = x(i, static_cast<Eigen::Index>(j));
      if (times) s.backward_time = (*times)[i];
      out.data.subjects.push_back(std::move(s));
    }
  };
  append(generate_controls(scn.n0, cov, controls_rng), GroupLabel::Control, nullptr);
  append(generate_incident(scn.n1, beta, cov, incident_rng), GroupLabel::IncidentCase, nullptr);
  if (scn.n2 > 0) {
    PrevalentDraw prev = generate_prevalent(scn.n2, beta, generation_survival(scn), cov, scn.oversample, base_rng,
                                            resample_rng, time_rng);
    out.effective_sample_size = prev.effective_sample_size;
    append(prev.covariates, GroupLabel::PrevalentCase, &prev.backward_times);
  }
  return out;
}

double true_alpha_star(const SimScenario& scn) {
  const Eigen::VectorXd beta = generation_beta(scn);
  return -0.5 * beta.dot(scn.covariate_covariance() * beta);
}

double true_nu_star(const SimScenario& scn) {
  const Eigen::MatrixXd chol = cholesky_factor(scn.covariate_covariance());
  const Eigen::VectorXd beta = generation_beta(scn);
  const SurvivalModel surv = generation_survival(scn);
  const int d = static_cast<int>(chol.rows());
  const int m = d <= 2 ? 48 : 28;
  Eigen::VectorXd t, w;
  gauss_hermite(m, t, w);
  // Tensor rule over x = sqrt(2) L t, x ~ N(0, cov).
  std::vector<int> idx(static_cast<std::size_t>(d), 0);
  double total = 0.0;
  Eigen::VectorXd z(d);
  while (true) {
    double weight = 1.0;
    for (int j = 0; j < d; ++j) {
      z[j] = std::sqrt(2.0) * t[idx[static_cast<std::size_t>(j)]];
      weight *= w[idx[static_cast<std::size_t>(j)]];
    }
    const Eigen::VectorXd x = chol * z;
    total += weight * std::exp(x.dot(beta) + surv.log_mu_lp(x.dot(surv.zeta())));
    int j = 0;
    while (j < d && ++idx[static_cast<std::size_t>(j)] == m) idx[static_cast<std::size_t>(j++)] = 0;
    if (j == d) break;
  }
  total /= std::pow(std::numbers::pi, 0.5 * d);
  return -std::log(total);
}

const ParamSummary& SimSummary::operator[](const std::string& name) const {
  for (const auto& p : params)
    if (p.name == name) return p;
  throw std::out_of_range("no parameter '" + name + "' in summary");
}

bool SimSummary::has(const std::string& name) const {
  for (const auto& p : params)
    if (p.name == name) return true;
  return false;
}

SimSummary run_scenario(const SimScenario& scn, unsigned threads) {
  scn.check();
  const auto t0 = std::chrono::steady_clock::now();
  const ModelSpec spec = scn.fit_spec();
  const auto k = static_cast<std::size_t>(scn.replications);

  struct Slot {
    bool ok = false;
    bool warned = false;
    std::vector<ReportEntry> entries;
    std::string message;
  };
  std::vector<Slot> slots(k);
  parallel_for(k, threads, [&](std::size_t r) {
    Slot& slot = slots[r];
    try {
      SimulatedSample sample = simulate_dataset(scn, r);
      slot.warned = scn.n2 > 0 && sample.effective_sample_size < 10.0 * static_cast<double>(scn.n2);
      FitConfig cfg = scn.fit_config;
      cfg.seed = RandomStream(scn.seed, {r, kFit}).next_u64();
      FitResult fit = fit_ipcc(sample.data, spec, cfg);
      if (!fit.converged) {
        slot.message = "replication " + std::to_string(r) + ": " + fit.diagnostic;
        return;
      }
      CovarianceEstimate cov = sandwich_covariance(fit, sample.data, spec);
      slot.entries = report_entries(fit, &cov, scn.fit_family);
      slot.ok = true;
    } catch (const std::exception& e) {
      slot.message = "replication " + std::to_string(r) + ": " + e.what();
    }
  });

  SimSummary s;
  s.scenario = scn.name;
  s.replications = scn.replications;
  std::vector<const Slot*> good;
  for (const auto& slot : slots) {
    if (slot.warned) ++s.oversample_warnings;
    if (slot.ok) good.push_back(&slot);
    else if (s.diagnostics.size() < 20) s.diagnostics.push_back(slot.message);
  }
  s.converged = static_cast<int>(good.size());
  s.failed = static_cast<double>(scn.replications - s.converged) > 0.1 * static_cast<double>(scn.replications);
  s.sd_emp_defined = s.converged >= 2;
  if (!good.empty()) {
    const auto& names = good.front()->entries;
    const auto p = static_cast<Eigen::Index>(names.size());
    s.estimates.resize(static_cast<Eigen::Index>(good.size()), p);
    s.variances.resize(static_cast<Eigen::Index>(good.size()), p);
    for (std::size_t r = 0; r < good.size(); ++r)
      for (Eigen::Index j = 0; j < p; ++j) {
        s.estimates(static_cast<Eigen::Index>(r), j) = good[r]->entries[static_cast<std::size_t>(j)].value;
        s.variances(static_cast<Eigen::Index>(r), j) = good[r]->entries[static_cast<std::size_t>(j)].variance;
      }
    const std::vector<double> truth = truths(scn, names);
    for (Eigen::Index j = 0; j < p; ++j) {
      ParamSummary ps;
      ps.name = names[static_cast<std::size_t>(j)].name;
      ps.truth = truth[static_cast<std::size_t>(j)];
      ps.mean = s.estimates.col(j).mean();
      ps.sd_emp = s.sd_emp_defined
                      ? std::sqrt((s.estimates.col(j).array() - ps.mean).square().sum() / static_cast<double>(good.size() - 1))
                      : kNaN;
      ps.mean_var_asy = s.variances.col(j).mean();
      ps.sd_asy = std::sqrt(ps.mean_var_asy);
      s.params.push_back(ps);
    }
  }
  s.runtime_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return s;
}

SimSummary misspecification_study(const SimScenario& scn, unsigned threads) {
  if (scn.gen_family == scn.fit_family)
    throw std::invalid_argument("misspecification study needs different generation and fitting families");
  return run_scenario(scn, threads);
}

std::vector<EfficiencyRow> variance_ratios(const SimSummary& base, const SimSummary& variant, std::size_t n1,
                                           std::size_t n2) {
  std::vector<EfficiencyRow> rows;
  for (const auto& p : base.params) {
    if (p.name.rfind("beta", 0) != 0) continue;
    EfficiencyRow row;
    row.variant = variant.scenario;
    row.coordinate = p.name;
    row.n1 = n1;
    row.n2 = n2;
    row.variance_ratio = p.mean_var_asy / variant[p.name].mean_var_asy;
    rows.push_back(row);
  }
  return rows;
}

std::vector<EfficiencyRow> efficiency_curve(const SimScenario& base, const std::vector<SimScenario>& variants,
                                            unsigned threads) {
  for (const auto& v : variants)
    if (v.beta.size() != base.beta.size()) throw std::invalid_argument("variants must share the beta dimension");
  const SimSummary b = run_scenario(base, threads);
  if (b.failed) throw std::runtime_error("base scenario failed: " + (b.diagnostics.empty() ? "" : b.diagnostics[0]));
  std::vector<EfficiencyRow> rows;
  for (const auto& v : variants) {
    const SimSummary s = run_scenario(v, threads);
    if (s.failed) throw std::runtime_error("scenario " + v.name + " failed: " + (s.diagnostics.empty() ? "" : s.diagnostics[0]));
    auto r = variance_ratios(b, s, v.n1, v.n2);
    rows.insert(rows.end(), r.begin(), r.end());
  }
  return rows;
}

std::vector<EquivalenceRow> equivalence_search(const SimScenario& base, const std::vector<std::size_t>& added_incident,
                                               std::size_t n2_step, std::size_t n2_max, unsigned threads) {
  if (n2_step == 0) throw std::invalid_argument("n2 step must be positive");
  auto run = [&](std::size_t n1, std::size_t n2) {
    SimScenario s = base;
    s.n1 = n1;
    s.n2 = n2;
    s.name = base.name + "_n1_" + std::to_string(n1) + "_n2_" + std::to_string(n2);
    SimSummary out = run_scenario(s, threads);
    if (out.failed) throw std::runtime_error("scenario " + s.name + " failed");
    return out;
  };
  std::vector<SimSummary> ip;
  std::vector<std::size_t> grid;
  for (std::size_t n2 = n2_step; n2 <= n2_max; n2 += n2_step) {
    grid.push_back(n2);
    ip.push_back(run(base.n1, base.n2 + n2));
  }
  std::vector<EquivalenceRow> rows;
  for (std::size_t m : added_incident) {
    const SimSummary cc = run(base.n1 + m, base.n2);
    for (const auto& p : cc.params) {
      if (p.name.rfind("beta", 0) != 0) continue;
      EquivalenceRow row;
      row.added_incident = m;
      row.coordinate = p.name;
      double best_gap = std::numeric_limits<double>::infinity();
      for (std::size_t g = 0; g < grid.size(); ++g) {
        const double ratio = ip[g][p.name].mean_var_asy / p.mean_var_asy;
        const bool hit = ratio >= 0.9985 && ratio <= 1.0015;
        if (hit) {
          row.n2 = grid[g];
          row.variance_ratio = ratio;
          row.solved = true;
          break;
        }
        if (std::fabs(ratio - 1.0) < best_gap) {
          best_gap = std::fabs(ratio - 1.0);
          row.n2 = grid[g];
          row.variance_ratio = ratio;
        }
      }
      rows.push_back(row);
    }
  }
  return rows;
}

}  // namespace ipcc
