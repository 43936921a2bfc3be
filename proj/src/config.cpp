#include "ipcc/config.hpp"

#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include <json.hpp>

namespace ipcc {
namespace {

using nlohmann::json;

template <class T>
T as(const json& v, const std::string& key) {
  try {
    if constexpr (std::is_same_v<T, bool>) {
      if (!v.is_boolean()) throw ConfigError("");
    } else if constexpr (std::is_same_v<T, std::string>) {
      if (!v.is_string()) throw ConfigError("");
    } else if constexpr (std::is_integral_v<T>) {
      if (!v.is_number_integer()) throw ConfigError("");
      if (std::is_unsigned_v<T> && v.is_number_integer() && !v.is_number_unsigned() && v.get<std::int64_t>() < 0)
        throw ConfigError("");
    } else if constexpr (std::is_floating_point_v<T>) {
      if (!v.is_number()) throw ConfigError("");
    } else {
      if (!v.is_array()) throw ConfigError("");
      T out;
      for (const auto& e : v) out.push_back(as<typename T::value_type>(e, key));
      return out;
    }
    return v.get<T>();
  } catch (const ConfigError&) {
    throw ConfigError("config key '" + key + "' has the wrong type: " + v.dump());
  }
}

template <class Fn>
void for_each_field(RunConfig& c, Fn&& fn) {
  fn("command", c.command);
  fn("input", c.input);
  fn("incidence_covariates", c.incidence_covariates);
  fn("survival_covariates", c.survival_covariates);
  fn("hazard_family", c.hazard_family);
  fn("breakpoints", c.breakpoints);
  fn("xi", c.xi);
  fn("models", c.models);
  fn("sandwich", c.sandwich);
  fn("jackknife", c.jackknife);
  fn("lrt", c.lrt);
  fn("max_iterations", c.max_iterations);
  fn("gradient_tolerance", c.gradient_tolerance);
  fn("n_restarts", c.n_restarts);
  fn("seed", c.seed);
  fn("threads", c.threads);
  fn("name", c.name);
  fn("n0", c.n0);
  fn("n1", c.n1);
  fn("n2", c.n2);
  fn("beta", c.beta);
  fn("zeta", c.zeta);
  fn("rho", c.rho);
  fn("gen_family", c.gen_family);
  fn("gen_params", c.gen_params);
  fn("gen_breakpoints", c.gen_breakpoints);
  fn("fit_family", c.fit_family);
  fn("fit_breakpoints", c.fit_breakpoints);
  fn("replications", c.replications);
  fn("oversample", c.oversample);
  fn("omitted_covariate", c.omitted_covariate);
  fn("sim_restarts", c.sim_restarts);
  fn("variant_n1", c.variant_n1);
  fn("variant_n2", c.variant_n2);
  fn("added_incident", c.added_incident);
  fn("n2_step", c.n2_step);
  fn("n2_max", c.n2_max);
}

HazardFamily make_family(const std::string& name, const std::vector<double>& breakpoints) {
  try {
    switch (hazard_kind_from_string(name)) {
      case HazardKind::Exponential: return HazardFamily::exponential();
      case HazardKind::Weibull: return HazardFamily::weibull();
      case HazardKind::PiecewiseConstant: return HazardFamily::piecewise(breakpoints);
    }
  } catch (const std::exception& e) {
    throw ConfigError(std::string("hazard family: ") + e.what());
  }
  throw ConfigError("unknown hazard family '" + name + "'");
}

std::vector<std::size_t> resolve(const std::vector<std::string>& names, const Dataset& data, const char* what) {
  std::vector<std::size_t> out;
  if (names.empty()) {
    for (std::size_t j = 0; j < data.covariate_names.size(); ++j) out.push_back(j);
    return out;
  }
  for (const auto& n : names) {
    std::size_t j = 0;
    while (j < data.covariate_names.size() && data.covariate_names[j] != n) ++j;
    if (j == data.covariate_names.size())
      throw ConfigError(std::string(what) + " covariate '" + n + "' is not a column of the input");
    out.push_back(j);
  }
  return out;
}

}  // namespace

RunConfig parse_config(const std::string& text) {
  std::string body = text;
  // Output files: take the embedded header line.
  std::istringstream lines(text);
  std::string line;
  const std::string tag = "# config: ";
  while (std::getline(lines, line))
    if (line.rfind(tag, 0) == 0) {
      body = line.substr(tag.size());
      break;
    }

  json j;
  try {
    j = json::parse(body, nullptr, true, true);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw ConfigError("config must be a JSON object");

  RunConfig cfg;
  std::map<std::string, std::function<void(const json&)>> setters;
  for_each_field(cfg, [&](const char* key, auto& field) {
    using T = std::decay_t<decltype(field)>;
    setters[key] = [&field, key](const json& v) { field = as<T>(v, key); };
  });
  for (const auto& [key, value] : j.items()) {
    auto it = setters.find(key);
    if (it == setters.end()) throw ConfigError("unknown config key '" + key + "'");
    it->second(value);
  }
  validate(cfg);
  return cfg;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string config_to_string(const RunConfig& cfg) {
  json j = json::object();
  RunConfig copy = cfg;
  for_each_field(copy, [&](const char* key, auto& field) { j[key] = field; });
  return j.dump();
}

std::string config_header(const RunConfig& cfg) { return "# config: " + config_to_string(cfg) + "\n"; }

void validate(const RunConfig& c) {
  if (c.command != "fit" && c.command != "simulate" && c.command != "efficiency")
    throw ConfigError("command must be fit, simulate or efficiency");
  if (c.max_iterations <= 0) throw ConfigError("max_iterations must be positive");
  if (!(c.gradient_tolerance > 0.0)) throw ConfigError("gradient_tolerance must be positive");
  if (c.n_restarts < 0 || c.sim_restarts < 0) throw ConfigError("restart counts must be non-negative");
  if (c.threads < 1) throw ConfigError("threads must be at least 1");
  if (!(c.xi > 0.0)) throw ConfigError("xi must be positive");
  for (const auto& m : c.models)
    if (m != "A" && m != "B" && m != "C") throw ConfigError("models may contain only A, B and C");
  for (const auto& r : c.lrt)
    if (r != "beta" && r != "zeta") throw ConfigError("lrt may contain only beta and zeta");
  make_family(c.hazard_family, c.breakpoints);
  if (c.command != "fit") to_scenario(c).check();
  if (c.variant_n1.size() != c.variant_n2.size()) throw ConfigError("variant_n1 and variant_n2 must have equal length");
  if (c.n2_step == 0) throw ConfigError("n2_step must be positive");
}

SimScenario to_scenario(const RunConfig& c) {
  SimScenario s;
  s.name = c.name;
  s.n0 = c.n0;
  s.n1 = c.n1;
  s.n2 = c.n2;
  s.beta = Eigen::Map<const Eigen::VectorXd>(c.beta.data(), static_cast<Eigen::Index>(c.beta.size()));
  s.zeta = Eigen::Map<const Eigen::VectorXd>(c.zeta.data(), static_cast<Eigen::Index>(c.zeta.size()));
  s.rho = c.rho;
  s.xi = c.xi;
  s.gen_family = make_family(c.gen_family, c.gen_breakpoints);
  s.gen_params = Eigen::Map<const Eigen::VectorXd>(c.gen_params.data(), static_cast<Eigen::Index>(c.gen_params.size()));
  s.fit_family = make_family(c.fit_family, c.fit_breakpoints);
  s.replications = c.replications;
  s.seed = c.seed;
  s.oversample = c.oversample;
  s.omitted_covariate = c.omitted_covariate;
  s.fit_config.max_iterations = c.max_iterations;
  s.fit_config.gradient_tolerance = c.gradient_tolerance;
  s.fit_config.n_restarts = c.sim_restarts;
  try {
    s.check();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("scenario: ") + e.what());
  }
  return s;
}

ModelSpec to_model_spec(const RunConfig& c, const Dataset& data) {
  ModelSpec spec;
  spec.incidence_covariates = resolve(c.incidence_covariates, data, "incidence");
  spec.survival_covariates = resolve(c.survival_covariates, data, "survival");
  spec.hazard_family = make_family(c.hazard_family, c.breakpoints);
  spec.xi = c.xi;
  return spec;
}

}  // namespace ipcc
