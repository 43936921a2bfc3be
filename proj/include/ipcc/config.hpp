#pragma once

// Run configuration for the command-line tool. The file format is a flat
// JSON object; every key is optional, unknown keys are rejected.
// Output files carry the resolved configuration in a "# config: {...}"
// header line, and load_config accepts such files directly.

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "ipcc/simulation.hpp"
#include "ipcc/types.hpp"

namespace ipcc {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct RunConfig {
  std::string command = "fit";  // fit | simulate | efficiency

  // fit
  std::string input;
  std::vector<std::string> incidence_covariates;  // empty: all columns
  std::vector<std::string> survival_covariates;   // empty: all columns
  std::string hazard_family = "weibull";
  std::vector<double> breakpoints;                // piecewise only
  double xi = 25.0;
  std::vector<std::string> models{"A", "B", "C"};
  bool sandwich = true;
  bool jackknife = false;
  std::vector<std::string> lrt;                   // subset of {"beta", "zeta"}

  // optimizer
  int max_iterations = 500;
  double gradient_tolerance = 1e-6;
  int n_restarts = 3;
  std::uint64_t seed = 1;
  int threads = 1;

  // simulate / efficiency
  std::string name = "scenario";
  std::uint64_t n0 = 500, n1 = 500, n2 = 0;
  std::vector<double> beta{0.0, 0.0};
  std::vector<double> zeta{1.0, -1.0};
  double rho = 0.5;
  std::string gen_family = "weibull";
  std::vector<double> gen_params{1.0, 1.0};
  std::vector<double> gen_breakpoints;
  std::string fit_family = "weibull";
  std::vector<double> fit_breakpoints;
  int replications = 1000;
  double oversample = 50.0;
  bool omitted_covariate = false;
  int sim_restarts = 1;

  // efficiency: paired (n1, n2) variants of the base scenario
  std::vector<std::uint64_t> variant_n1;
  std::vector<std::uint64_t> variant_n2;
  // efficiency: equivalence search, skipped when empty
  std::vector<std::uint64_t> added_incident;
  std::uint64_t n2_step = 20;
  std::uint64_t n2_max = 1000;

  bool operator==(const RunConfig&) const = default;
};

RunConfig parse_config(const std::string& text);
RunConfig load_config(const std::string& path);
// Single-line JSON rendering with round-trip precision.
std::string config_to_string(const RunConfig& cfg);
std::string config_header(const RunConfig& cfg);

void validate(const RunConfig& cfg);
SimScenario to_scenario(const RunConfig& cfg);
ModelSpec to_model_spec(const RunConfig& cfg, const Dataset& data);

}  // namespace ipcc
