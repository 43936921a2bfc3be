#include <doctest.h>

#include <cmath>

#include "helpers.hpp"
#include "ipcc/rng.hpp"
#include "ipcc/simulation.hpp"

using namespace ipcc;

namespace {

Eigen::MatrixXd equicorrelated(double rho) {
  Eigen::MatrixXd c = Eigen::MatrixXd::Constant(2, 2, rho);
  c.diagonal().setOnes();
  return c;
}

Eigen::MatrixXd sample_cov(const Eigen::MatrixXd& x) {
  const Eigen::MatrixXd c = x.rowwise() - x.colwise().mean();
  return c.transpose() * c / static_cast<double>(x.rows() - 1);
}

// mu for the exponential baseline with rate 1: (1 - exp(-psi xi)) / psi.
double mu_unit_exponential(double lp, double xi) {
  const double psi = std::exp(lp);
  return -std::expm1(-psi * xi) / psi;
}

}  // namespace

TEST_SUITE("simulation-harness") {
  TEST_CASE("controls follow N(0, Sigma)") {
    RandomStream rng(1, {});
    const Eigen::MatrixXd x = generate_controls(100000, equicorrelated(0.5), rng);
    CHECK((sample_cov(x) - equicorrelated(0.5)).cwiseAbs().maxCoeff() < 0.05);
    CHECK(x.colwise().mean().cwiseAbs().maxCoeff() < 0.02);

    RandomStream r0(2, {});
    const Eigen::MatrixXd y = generate_controls(10000, equicorrelated(0.0), r0);
    const Eigen::MatrixXd c = sample_cov(y);
    CHECK(std::fabs(c(0, 1) / std::sqrt(c(0, 0) * c(1, 1))) < 0.02);

    RandomStream a(3, {}), b(3, {});
    CHECK(generate_controls(50, equicorrelated(0.5), a) == generate_controls(50, equicorrelated(0.5), b));
  }

  TEST_CASE("incident covariates are shifted by Sigma beta") {
    RandomStream rng(4, {});
    const Eigen::MatrixXd x = generate_incident(100000, Eigen::Vector2d(1, -1), equicorrelated(0.5), rng);
    const Eigen::RowVectorXd m = x.colwise().mean();
    CHECK(m[0] == doctest::Approx(0.5).epsilon(0.04));
    CHECK(m[1] == doctest::Approx(-0.5).epsilon(0.04));
    CHECK((sample_cov(x) - equicorrelated(0.5)).cwiseAbs().maxCoeff() < 0.05);
  }

  TEST_CASE("tilted resampling with zeta = 0 reproduces the incident law") {
    const Eigen::MatrixXd cov = equicorrelated(0.5);
    SurvivalModel s(HazardFamily::weibull(), Eigen::Vector2d(1, 1), Eigen::Vector2d(0, 0), 25.0);
    RandomStream base(5, {1}), res(5, {2}), times(5, {3});
    const std::size_t n = 20000;
    const PrevalentDraw p = generate_prevalent(n, Eigen::Vector2d(1, -1), s, cov, 50.0, base, res, times);
    const Eigen::RowVectorXd m = p.covariates.colwise().mean();
    const double se = std::sqrt(1.0 / static_cast<double>(n));
    CHECK(std::fabs(m[0] - 0.5) < 3.0 * se * 1.2);
    CHECK(std::fabs(m[1] + 0.5) < 3.0 * se * 1.2);
    CHECK(p.base_size == 50 * n);
    CHECK(p.effective_sample_size > 10.0 * n);
    CHECK(p.backward_times.minCoeff() >= 0.0);
    CHECK(p.backward_times.maxCoeff() <= 25.0);
  }

  TEST_CASE("tilted sample mean matches an importance-sampling oracle") {
    const Eigen::MatrixXd cov = equicorrelated(0.5);
    const Eigen::Vector2d beta(1, -1), zeta(1, -1);
    SurvivalModel s(HazardFamily::weibull(), Eigen::Vector2d(1, 1), zeta, 25.0);
    RandomStream base(6, {1}), res(6, {2}), times(6, {3});
    const std::size_t n = 20000;
    const PrevalentDraw p = generate_prevalent(n, beta, s, cov, 50.0, base, res, times);

    RandomStream other(600, {});
    const Eigen::MatrixXd x = generate_controls(2000000, cov, other);
    Eigen::Vector2d num = Eigen::Vector2d::Zero();
    double den = 0.0;
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
      const Eigen::Vector2d xi = x.row(i).transpose();
      const double w = std::exp(xi.dot(beta)) * mu_unit_exponential(xi.dot(zeta), 25.0);
      num += w * xi;
      den += w;
    }
    const Eigen::Vector2d oracle = num / den;
    const Eigen::RowVectorXd m = p.covariates.colwise().mean();
    CHECK(std::fabs(m[0] - oracle[0]) < 0.04);
    CHECK(std::fabs(m[1] - oracle[1]) < 0.04);
  }

  TEST_CASE("too little oversampling is an error") {
    SurvivalModel s(HazardFamily::weibull(), Eigen::Vector2d(1, 1), Eigen::Vector2d(1, -1), 25.0);
    RandomStream base(7, {1}), res(7, {2}), times(7, {3});
    CHECK_THROWS_AS(generate_prevalent(1000, Eigen::Vector2d(1, -1), s, equicorrelated(0.5), 1.5, base, res, times),
                    OversampleError);
  }

  TEST_CASE("true alpha* and nu*") {
    SimScenario scn;
    scn.beta = Eigen::Vector2d(1, -1);
    CHECK(true_alpha_star(scn) == doctest::Approx(-0.5).epsilon(1e-12));

    RandomStream rng(8, {});
    const Eigen::MatrixXd x = generate_controls(1000000, scn.covariate_covariance(), rng);
    for (const auto& b : {Eigen::Vector2d(0, 0), Eigen::Vector2d(1, -1)}) {
      scn.beta = b;
      double acc = 0.0;
      for (Eigen::Index i = 0; i < x.rows(); ++i) {
        const Eigen::Vector2d xi = x.row(i).transpose();
        acc += std::exp(xi.dot(b)) * mu_unit_exponential(xi.dot(scn.zeta), scn.xi);
      }
      const double mc = -std::log(acc / static_cast<double>(x.rows()));
      CHECK(true_nu_star(scn) == doctest::Approx(mc).epsilon(0.02));
    }
  }

  TEST_CASE("scenario checks and the omitted-covariate design") {
    SimScenario scn;
    scn.rho = 1.0;
    CHECK_THROWS(scn.check());
    scn.rho = 0.5;
    scn.omitted_covariate = true;
    CHECK_THROWS(scn.check());  // zeta must have three entries
    scn.zeta = Eigen::Vector3d(1, -1, 0.5);
    CHECK_NOTHROW(scn.check());
    const Eigen::MatrixXd c = scn.covariate_covariance();
    CHECK(c(0, 2) == doctest::Approx(0.75));
    CHECK(c(2, 2) == doctest::Approx(1.0));
    scn.n2 = 50;
    const Dataset d = simulate_dataset(scn, 0).data;
    CHECK(d.n_covariates() == 3);
    CHECK(scn.fit_spec().survival_covariates.size() == 2);
  }

  TEST_CASE("replications are reproducible and thread-independent") {
    SimScenario scn;
    scn.n0 = 150;
    scn.n1 = 150;
    scn.n2 = 150;
    scn.beta = Eigen::Vector2d(1, -1);
    scn.replications = 4;
    scn.seed = 17;
    const SimSummary a = run_scenario(scn, 1);
    const SimSummary b = run_scenario(scn, 3);
    CHECK(a.converged == 4);
    CHECK(a.estimates == b.estimates);
    CHECK(a.variances == b.variances);
    CHECK(a.has("nu_star"));
    CHECK(a["beta1"].truth == 1.0);
    CHECK(a["kappa1"].truth == 1.0);
    CHECK(a["nu"].truth == doctest::Approx(a["nu_star"].truth));
    CHECK(simulate_dataset(scn, 2).data == simulate_dataset(scn, 2).data);
    CHECK_FALSE(simulate_dataset(scn, 2).data == simulate_dataset(scn, 3).data);

    scn.replications = 1;
    const SimSummary one = run_scenario(scn, 1);
    CHECK_FALSE(one.sd_emp_defined);
    CHECK(std::isnan(one["beta1"].sd_emp));
  }

  TEST_CASE("variance ratios and study wrappers") {
    SimScenario scn;
    scn.n0 = 150;
    scn.n1 = 150;
    scn.replications = 3;
    const SimSummary s = run_scenario(scn, 1);
    const auto rows = variance_ratios(s, s, 150, 0);
    REQUIRE(rows.size() == 2);
    CHECK(rows[0].variance_ratio == doctest::Approx(1.0));
    CHECK_THROWS(misspecification_study(scn, 1));
    CHECK_THROWS(equivalence_search(scn, {20}, 0, 100, 1));
  }
}
