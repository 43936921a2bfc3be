#pragma once

// Simulation studies: data generation from the three-sample tilting model,
// replicated fits with sandwich variances, efficiency (variance-ratio)
// curves and baseline-hazard misspecification runs.

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "ipcc/estimation.hpp"
#include "ipcc/rng.hpp"
#include "ipcc/survival.hpp"
#include "ipcc/types.hpp"

namespace ipcc {

struct SimScenario {
  std::string name = "scenario";
  std::size_t n0 = 500;
  std::size_t n1 = 500;
  std::size_t n2 = 0;
  Eigen::VectorXd beta = Eigen::Vector2d(0.0, 0.0);
  // Generation zeta; one entry per generated covariate (including the
  // omitted covariate when enabled).
  Eigen::VectorXd zeta = Eigen::Vector2d(1.0, -1.0);
  double rho = 0.5;
  double xi = 25.0;
  HazardFamily gen_family = HazardFamily::weibull();
  Eigen::VectorXd gen_params = Eigen::Vector2d(1.0, 1.0);
  HazardFamily fit_family = HazardFamily::weibull();
  int replications = 1000;
  std::uint64_t seed = 1;
  double oversample = 50.0;
  // Adds X3 = 0.5 X1 + 0.5 X2 + e, e ~ N(0, 0.25), to the survival model
  // used for generation; X3 is recorded but not fitted.
  bool omitted_covariate = false;
  FitConfig fit_config = default_fit_config();

  static FitConfig default_fit_config() {
    FitConfig c;
    c.n_restarts = 1;
    return c;
  }

  std::size_t n_fitted() const { return static_cast<std::size_t>(beta.size()); }
  std::size_t n_generated() const { return n_fitted() + (omitted_covariate ? 1 : 0); }
  // Covariance of the generated covariates; throws if not positive definite.
  Eigen::MatrixXd covariate_covariance() const;
  ModelSpec fit_spec() const;
  void check() const;
};

struct SimulatedSample {
  Dataset data;
  double effective_sample_size = 0.0;  // of the prevalent resampling weights
};

class OversampleError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Draws from N(0, cov): one row per subject.
Eigen::MatrixXd generate_controls(std::size_t n0, const Eigen::MatrixXd& cov, RandomStream& rng);
// Draws from N(cov * beta, cov), the exponential tilt of N(0, cov) by exp(x beta).
Eigen::MatrixXd generate_incident(std::size_t n1, const Eigen::VectorXd& beta, const Eigen::MatrixXd& cov,
                                  RandomStream& rng);

struct PrevalentDraw {
  Eigen::MatrixXd covariates;
  Eigen::VectorXd backward_times;
  double effective_sample_size = 0.0;
  std::size_t base_size = 0;
};

// Weighted resampling of oversample * n2 draws from N(0, cov) with weights
// exp(x beta + log mu(x)), then backward times from S(a|x)/mu(x).
// The survival model acts on all generated covariates.
PrevalentDraw generate_prevalent(std::size_t n2, const Eigen::VectorXd& beta, const SurvivalModel& gen_survival,
                                 const Eigen::MatrixXd& cov, double oversample, RandomStream& base_rng,
                                 RandomStream& resample_rng, RandomStream& time_rng);

// One replication of a scenario, deterministic in (scenario seed, replication).
SimulatedSample simulate_dataset(const SimScenario& scn, std::uint64_t replication);

// True alpha* and nu* implied by the generating model.
double true_alpha_star(const SimScenario& scn);
double true_nu_star(const SimScenario& scn);

struct ParamSummary {
  std::string name;
  double truth = 0.0;  // NaN when the fitted model has no true value
  double mean = 0.0;
  double sd_emp = 0.0;  // NaN when fewer than two converged replications
  double sd_asy = 0.0;  // sqrt(mean over replications of Omega/N diagonal)
  double mean_var_asy = 0.0;
};

struct SimSummary {
  std::string scenario;
  std::vector<ParamSummary> params;
  int replications = 0;
  int converged = 0;
  int oversample_warnings = 0;
  bool failed = false;              // more than 10% non-converged replications
  bool sd_emp_defined = true;
  std::vector<std::string> diagnostics;
  double runtime_seconds = 0.0;
  // Per converged replication (rows), aligned with params.
  Eigen::MatrixXd estimates;
  Eigen::MatrixXd variances;

  const ParamSummary& operator[](const std::string& name) const;
  bool has(const std::string& name) const;
};

SimSummary run_scenario(const SimScenario& scn, unsigned threads = 1);

// Same as run_scenario; asserts generation and fitting families differ.
SimSummary misspecification_study(const SimScenario& scn, unsigned threads = 1);

struct EfficiencyRow {
  std::string variant;
  std::string coordinate;
  std::size_t n1 = 0;
  std::size_t n2 = 0;
  double variance_ratio = 0.0;  // var_asy(base) / var_asy(variant)
};

// Per beta coordinate ratio of mean asymptotic variances.
std::vector<EfficiencyRow> variance_ratios(const SimSummary& base, const SimSummary& variant, std::size_t n1,
                                           std::size_t n2);
std::vector<EfficiencyRow> efficiency_curve(const SimScenario& base, const std::vector<SimScenario>& variants,
                                            unsigned threads = 1);

struct EquivalenceRow {
  std::size_t added_incident = 0;
  std::string coordinate;
  std::size_t n2 = 0;            // smallest hit, or the nearest grid point
  double variance_ratio = 0.0;   // var_asy(IP-cc with n2) / var_asy(cc with added incident)
  bool solved = false;           // ratio within [0.9985, 1.0015]
};

// For each number of added incident cases, the number of added prevalent
// cases giving the same asymptotic variance of beta-hat, searched on a grid
// of step n2_step up to n2_max.
std::vector<EquivalenceRow> equivalence_search(const SimScenario& base, const std::vector<std::size_t>& added_incident,
                                               std::size_t n2_step, std::size_t n2_max, unsigned threads = 1);

}  // namespace ipcc
