#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <unistd.h>

#include "helpers.hpp"
#include "ipcc/app.hpp"
#include "ipcc/csv.hpp"
#include "ipcc/rng.hpp"
#include "ipcc/survival.hpp"

using namespace ipcc;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  fs::path p = fs::temp_directory_path() / ("ipcc_test_" + std::to_string(::getpid())) / name;
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::size_t draw_category(RandomStream& rng, std::initializer_list<double> probs) {
  double u = rng.uniform(), acc = 0.0;
  std::size_t k = 0;
  for (double p : probs) {
    acc += p;
    if (u < acc) return k;
    ++k;
  }
  return k - 1;
}

// Registry-like case-control data: ordinal age and BMI trends and binary
// exposures, cases drawn by exponential tilting of the control law.
Dataset registry_like(std::size_t n0, std::size_t n1, std::size_t n2, std::uint64_t seed) {
  const std::vector<std::string> names{"age_trend", "worked_before_1955", "ever_smoker",
                                       "family_history", "bmi20_trend", "rs2981582"};
  const Eigen::VectorXd beta = (Eigen::VectorXd(6) << 0.25, 0.3, 0.2, 0.5, -0.15, 0.25).finished();
  const double xi = 40.0;
  SurvivalModel surv(HazardFamily::exponential(), Eigen::VectorXd::Constant(1, 0.08), Eigen::Vector2d(0.3, 0.4), xi);
  RandomStream rng(seed, {});
  auto draw_x = [&] {
    std::vector<double> x(6);
    x[0] = static_cast<double>(draw_category(rng, {0.1, 0.2, 0.3, 0.2, 0.2}));
    x[1] = rng.uniform() < 0.3 ? 1.0 : 0.0;
    x[2] = rng.uniform() < 0.45 ? 1.0 : 0.0;
    x[3] = rng.uniform() < 0.12 ? 1.0 : 0.0;
    x[4] = static_cast<double>(draw_category(rng, {0.3, 0.55, 0.15}));
    x[5] = rng.uniform() < 0.6 ? 1.0 : 0.0;
    return x;
  };
  const std::size_t pool_size = 40 * (n1 + n2);
  std::vector<std::vector<double>> pool(pool_size);
  std::vector<double> cum1(pool_size), cum2(pool_size);
  double s1 = 0.0, s2 = 0.0;
  for (std::size_t i = 0; i < pool_size; ++i) {
    pool[i] = draw_x();
    const double xb = Eigen::Map<const Eigen::VectorXd>(pool[i].data(), 6).dot(beta);
    const std::vector<double> z{pool[i][0], pool[i][1]};
    s1 += std::exp(xb);
    s2 += std::exp(xb) * surv.mu(z);
    cum1[i] = s1;
    cum2[i] = s2;
  }
  Dataset d;
  d.covariate_names = names;
  for (std::size_t i = 0; i < n0; ++i) d.subjects.push_back({GroupLabel::Control, draw_x(), {}});
  for (std::size_t i = 0; i < n1; ++i) d.subjects.push_back({GroupLabel::IncidentCase, pool[rng.pick(cum1)], {}});
  for (std::size_t i = 0; i < n2; ++i) {
    const auto& x = pool[rng.pick(cum2)];
    const std::vector<double> z{x[0], x[1]};
    d.subjects.push_back({GroupLabel::PrevalentCase, x, surv.sample_backward_time(z, rng.uniform())});
  }
  return d;
}

RunConfig registry_fit_config(const fs::path& input) {
  RunConfig c;
  c.command = "fit";
  c.input = input.string();
  c.survival_covariates = {"age_trend", "worked_before_1955"};
  c.hazard_family = "exponential";
  c.xi = 40.0;
  c.lrt = {"beta", "zeta"};
  c.seed = 5;
  return c;
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  return out;
}

// Field-wise comparison: numbers to a relative tolerance, text exactly.
void compare_tables(const std::string& got, const std::string& want) {
  std::istringstream g(got), w(want);
  std::string lg, lw;
  int line = 0;
  while (true) {
    const bool more_g = static_cast<bool>(std::getline(g, lg));
    const bool more_w = static_cast<bool>(std::getline(w, lw));
    REQUIRE(more_g == more_w);
    if (!more_g) break;
    ++line;
    if (lw.rfind("# config:", 0) == 0) continue;
    const auto fg = split(lg), fw = split(lw);
    CAPTURE(line);
    REQUIRE(fg.size() == fw.size());
    for (std::size_t k = 0; k < fg.size(); ++k) {
      char* end_g = nullptr;
      char* end_w = nullptr;
      const double vg = std::strtod(fg[k].c_str(), &end_g);
      const double vw = std::strtod(fw[k].c_str(), &end_w);
      if (!fw[k].empty() && *end_w == '\0' && *end_g == '\0' && fw[k] != "NA")
        CHECK(vg == doctest::Approx(vw).epsilon(1e-6).scale(1e-8));
      else
        CHECK(fg[k] == fw[k]);
    }
  }
}

}  // namespace

TEST_SUITE("cli-app") {
  TEST_CASE("fit on registry-like data matches the golden tables") {
    const fs::path dir = scratch("golden");
    const fs::path input = dir / "registry.csv";
    write_dataset_csv(input.string(), registry_like(663, 345, 213, 2018));
    std::ostringstream log, err;
    const int rc = cmd_fit(registry_fit_config(input), (dir / "out").string(), log, err);
    CHECK(rc == 0);
    CHECK(log.str().find("Model C") != std::string::npos);
    const fs::path golden(IPCC_GOLDEN_DIR);
    for (const char* f : {"fit_coefficients.csv", "fit_lrt.csv", "fit_models.csv"}) {
      CAPTURE(f);
      const std::string got = slurp(dir / "out" / f);
      if (std::getenv("IPCC_UPDATE_GOLDEN")) {
        std::ofstream(golden / f) << got;
        continue;
      }
      REQUIRE(fs::exists(golden / f));
      compare_tables(got, slurp(golden / f));
    }
  }

  TEST_CASE("model A and B output does not depend on row order") {
    const fs::path dir = scratch("shuffle");
    Dataset d = registry_like(300, 150, 100, 7);
    write_dataset_csv((dir / "a.csv").string(), d);
    std::reverse(d.subjects.begin(), d.subjects.end());
    write_dataset_csv((dir / "b.csv").string(), d);
    RunConfig c = registry_fit_config(dir / "a.csv");
    c.models = {"A", "B"};
    std::ostringstream log, err;
    REQUIRE(cmd_fit(c, (dir / "out_a").string(), log, err) == 0);
    c.input = (dir / "b.csv").string();
    REQUIRE(cmd_fit(c, (dir / "out_b").string(), log, err) == 0);
    compare_tables(slurp(dir / "out_a" / "fit_coefficients.csv"), slurp(dir / "out_b" / "fit_coefficients.csv"));
  }

  TEST_CASE("model C without prevalent cases is refused") {
    const fs::path dir = scratch("no_prevalent");
    write_dataset_csv((dir / "d.csv").string(), testing::small_sample(50, 50, 0, 3));
    RunConfig c;
    c.input = (dir / "d.csv").string();
    std::ostringstream log, err;
    CHECK(cmd_fit(c, (dir / "out").string(), log, err) == 1);
    CHECK(err.str().find("fit model A instead") != std::string::npos);
    c.models = {"A"};
    std::ostringstream err2;
    CHECK(cmd_fit(c, (dir / "out").string(), log, err2) == 0);
  }

  TEST_CASE("backward time beyond xi and schema errors exit with 1") {
    const fs::path dir = scratch("bad");
    write_dataset_csv((dir / "d.csv").string(), testing::small_sample(50, 50, 50, 4));
    RunConfig c;
    c.input = (dir / "d.csv").string();
    c.xi = 0.5;
    std::ostringstream log, err;
    CHECK(cmd_fit(c, (dir / "out").string(), log, err) == 1);
    CHECK(err.str().find("A exceeds xi") != std::string::npos);

    std::ofstream(dir / "broken.csv") << "group,backward_time,x1\n0,,1\n5,,2\n";
    c.input = (dir / "broken.csv").string();
    c.xi = 25;
    std::ostringstream err2;
    CHECK(cmd_fit(c, (dir / "out").string(), log, err2) == 1);
    CHECK(err2.str().find("row 3: group must be 0, 1 or 2") != std::string::npos);
  }

  TEST_CASE("simulate is byte-reproducible and reruns from its own header") {
    const fs::path dir = scratch("simulate");
    RunConfig c;
    c.command = "simulate";
    c.n0 = 120;
    c.n1 = 120;
    c.n2 = 120;
    c.beta = {1, -1};
    c.replications = 3;
    c.seed = 99;
    std::ostringstream log, err;
    REQUIRE(cmd_simulate(c, (dir / "a").string(), log, err) == 0);
    REQUIRE(cmd_simulate(c, (dir / "b").string(), log, err) == 0);
    const std::string first = slurp(dir / "a" / "simulate_summary.csv");
    CHECK(first == slurp(dir / "b" / "simulate_summary.csv"));
    CHECK(first.find("scenario,nu_star,") != std::string::npos);
    CHECK(log.str().find("converged 3 of 3") != std::string::npos);

    const RunConfig again = load_config((dir / "a" / "simulate_summary.csv").string());
    CHECK(again == c);
    REQUIRE(run_command(again, (dir / "c").string(), log, err) == 0);
    CHECK(first == slurp(dir / "c" / "simulate_summary.csv"));

    c.replications = 1;
    std::ostringstream log1;
    REQUIRE(cmd_simulate(c, (dir / "d").string(), log1, err) == 0);
    CHECK(log1.str().find("SD_emp undefined") != std::string::npos);
  }

  TEST_CASE("efficiency writes long-format rows") {
    const fs::path dir = scratch("efficiency");
    RunConfig c;
    c.command = "efficiency";
    c.n0 = 120;
    c.n1 = 120;
    c.replications = 2;
    c.variant_n1 = {120};
    c.variant_n2 = {120};
    std::ostringstream log, err;
    REQUIRE(cmd_efficiency(c, (dir / "out").string(), log, err) == 0);
    std::istringstream in(slurp(dir / "out" / "efficiency.csv"));
    std::string line;
    std::vector<std::string> lines;
    while (std::getline(in, line)) lines.push_back(line);
    REQUIRE(lines.size() == 4);
    CHECK(lines[1] == "base,variant,coordinate,n1,n2,proportion_prevalent,variance_ratio");
    CHECK(lines[2].rfind("scenario,scenario_n1_120_n2_120,beta1,120,120,0.5,", 0) == 0);
  }
}
