#include "ipcc/app.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <ostream>
#include <sstream>

#include "ipcc/csv.hpp"
#include "ipcc/estimation.hpp"
#include "ipcc/inference.hpp"
#include "ipcc/simulation.hpp"

namespace ipcc {
namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr double kZ975 = 1.96;

std::string human(double v) { return format_number(v, 6); }
std::string full(double v) { return format_number(v, 17); }

std::ofstream open_output(const std::string& dir, const std::string& file, const RunConfig& cfg) {
  std::filesystem::create_directories(dir);
  const auto path = std::filesystem::path(dir) / file;
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << config_header(cfg);
  return out;
}

void write_table(std::ostream& out, const std::vector<std::vector<std::string>>& rows) {
  std::vector<std::size_t> width;
  for (const auto& r : rows)
    for (std::size_t j = 0; j < r.size(); ++j) {
      if (width.size() <= j) width.push_back(0);
      width[j] = std::max(width[j], r[j].size());
    }
  for (const auto& r : rows) {
    for (std::size_t j = 0; j < r.size(); ++j)
      out << (j == 0 ? "" : "  ") << (j == 0 ? std::left : std::right) << std::setw(static_cast<int>(width[j])) << r[j];
    out << std::right << '\n';
  }
}

struct CoefRow {
  std::string model;
  std::string parameter;
  std::string scale;
  double estimate = kNaN;
  double se = kNaN;
  std::string method;
};

struct ModelBlock {
  std::string model;
  std::string title;
  double loglik = kNaN;
  bool converged = false;
  std::string diagnostic;
  std::vector<CoefRow> rows;
};

FitConfig fit_config_of(const RunConfig& cfg) {
  FitConfig f;
  f.max_iterations = cfg.max_iterations;
  f.gradient_tolerance = cfg.gradient_tolerance;
  f.n_restarts = cfg.n_restarts;
  f.seed = cfg.seed;
  return f;
}

ModelBlock logistic_block(const std::string& model, const std::string& title, const Dataset& data,
                          const ModelSpec& spec, const FitConfig& fcfg, double case_count, double n0) {
  ModelBlock b;
  b.model = model;
  b.title = title;
  const FitResult fit = fit_logistic(data, spec.incidence_covariates, fcfg);
  b.loglik = fit.loglik;
  b.converged = fit.converged;
  b.diagnostic = fit.diagnostic;
  const Eigen::VectorXd se = fit.covariance.diagonal().cwiseMax(0.0).cwiseSqrt();
  b.rows.push_back({model, "alpha_star", "log", fit.theta[0] - std::log(case_count / n0), se[0], "information"});
  for (Eigen::Index j = 1; j < fit.theta.size(); ++j)
    b.rows.push_back({model, fit.names[static_cast<std::size_t>(j)], "log", fit.theta[j], se[j], "information"});
  return b;
}

struct IpOutcome {
  ModelBlock block;
  std::vector<std::vector<std::string>> lrt_rows;
  bool ok = true;
};

IpOutcome ip_block(const RunConfig& cfg, const Dataset& data, const ModelSpec& spec, const FitConfig& fcfg) {
  IpOutcome o;
  ModelBlock& b = o.block;
  b.model = "C";
  b.title = "IP-case-control: controls, incident and prevalent cases";
  const FitResult fit = fit_ipcc(data, spec, fcfg);
  b.loglik = fit.loglik;
  b.converged = fit.converged;
  b.diagnostic = fit.diagnostic;
  o.ok = fit.converged;

  const auto& L = fit.layout;
  const auto natural_names = L.names(data, spec, true);
  auto estimate = [&](Eigen::Index k) {
    const bool hazard = k >= L.hazard_at() && k < L.zeta_at();
    return hazard ? std::exp(fit.theta[k]) : fit.theta[k];
  };
  auto label = [&](Eigen::Index k) {
    if (L.has_alpha && k == L.alpha_at()) return std::string("alpha_star");
    if (L.has_nu && k == L.nu_at()) return std::string("nu_star");
    return natural_names[static_cast<std::size_t>(k)];
  };
  auto value = [&](Eigen::Index k) {
    if (L.has_alpha && k == L.alpha_at()) return fit.alpha_star();
    if (L.has_nu && k == L.nu_at()) return fit.nu_star();
    return estimate(k);
  };
  auto scale = [&](Eigen::Index k) { return k >= L.hazard_at() && k < L.zeta_at() ? "natural" : "log"; };

  if (cfg.sandwich) {
    Eigen::VectorXd se = Eigen::VectorXd::Constant(L.size(), kNaN);
    if (fit.converged) {
      try {
        const CovarianceEstimate cov = sandwich_covariance(fit, data, spec);
        const Eigen::VectorXd nat = cov.natural_sd(fit);
        for (std::size_t k = 0; k < cov.coordinates.size(); ++k) se[cov.coordinates[k]] = nat[static_cast<Eigen::Index>(k)];
      } catch (const SingularInformationError& e) {
        b.diagnostic += std::string("; sandwich: ") + e.what();
        o.ok = false;
      }
    }
    for (Eigen::Index k = 0; k < L.size(); ++k) b.rows.push_back({"C", label(k), scale(k), value(k), se[k], "sandwich"});
  }
  if (cfg.jackknife) {
    Eigen::VectorXd se = Eigen::VectorXd::Constant(L.size(), kNaN);
    if (fit.converged) {
      try {
        JackknifeOptions jo;
        jo.threads = static_cast<unsigned>(cfg.threads);
        const JackknifeResult jk = jackknife_se(data, spec, fcfg, fit, jo);
        se = jk.se;
      } catch (const JackknifeError& e) {
        b.diagnostic += std::string("; jackknife: ") + e.what();
        o.ok = false;
      }
    }
    for (Eigen::Index k = 0; k < L.size(); ++k) b.rows.push_back({"C", label(k), scale(k), value(k), se[k], "jackknife"});
  }

  for (const auto& test : cfg.lrt) {
    std::vector<FixedCoordinate> restriction;
    if (test == "beta")
      for (std::size_t j = 0; j < spec.incidence_covariates.size(); ++j) restriction.push_back({ParamBlock::Beta, j, 0.0});
    else if (L.n_zeta > 0)
      for (std::size_t j = 0; j < spec.survival_covariates.size(); ++j) restriction.push_back({ParamBlock::Zeta, j, 0.0});
    if (restriction.empty()) continue;
    const LrtResult r = lrt(data, spec, fcfg, restriction, fit);
    if (!r.converged) o.ok = false;
    o.lrt_rows.push_back({"C", "lrt_null_" + test, full(r.statistic), std::to_string(r.df), full(r.p_value),
                          full(r.loglik_full), full(r.loglik_restricted), r.converged ? "true" : "false"});
  }
  return o;
}

}  // namespace

int cmd_fit(const RunConfig& cfg, const std::string& out_dir, std::ostream& log, std::ostream& err) {
  Dataset data;
  try {
    data = read_dataset_csv(cfg.input);
  } catch (const CsvError& e) {
    err << "error: invalid input " << cfg.input << '\n';
    for (const auto& r : e.row_errors()) err << "  " << r << '\n';
    return 1;
  }
  ModelSpec spec;
  try {
    spec = to_model_spec(cfg, data);
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
  const GroupCounts counts = group_counts(data);
  ValidationReport report = validate_dataset(data, spec);
  bool wants_c = false, wants_a = false;
  for (const auto& m : cfg.models) {
    wants_c = wants_c || m == "C";
    wants_a = wants_a || m == "A";
  }
  if (wants_c && counts.n2 == 0)
    report.violations.push_back("model C needs prevalent cases but the input has none (n2 = 0); fit model A instead");
  if (wants_a && counts.n1 == 0) report.violations.push_back("model A needs incident cases but the input has none");
  if (!report.ok()) {
    err << "error: input rejected\n";
    for (const auto& v : report.violations) err << "  " << v << '\n';
    return 1;
  }

  const FitConfig fcfg = fit_config_of(cfg);
  const double n0 = static_cast<double>(counts.n0);
  std::vector<ModelBlock> blocks;
  std::vector<std::vector<std::string>> lrt_rows;
  bool all_ok = true;
  for (const auto& m : cfg.models) {
    try {
      if (m == "A") {
        blocks.push_back(logistic_block("A", "logistic: incident cases vs controls", incident_only(data), spec, fcfg,
                                        static_cast<double>(counts.n1), n0));
        all_ok = all_ok && blocks.back().converged;
      } else if (m == "B") {
        blocks.push_back(logistic_block("B", "logistic: incident and prevalent cases pooled vs controls",
                                        pool_cases(data), spec, fcfg, static_cast<double>(counts.n1 + counts.n2), n0));
        all_ok = all_ok && blocks.back().converged;
      } else {
        IpOutcome o = ip_block(cfg, data, spec, fcfg);
        all_ok = all_ok && o.ok;
        blocks.push_back(std::move(o.block));
        for (auto& r : o.lrt_rows) lrt_rows.push_back(std::move(r));
      }
    } catch (const std::exception& e) {
      ModelBlock b;
      b.model = m;
      b.title = "model " + m;
      b.diagnostic = e.what();
      blocks.push_back(b);
      all_ok = false;
    }
  }

  {
    std::ofstream out = open_output(out_dir, "fit_coefficients.csv", cfg);
    out << "model,parameter,scale,estimate,se,se_method,ci_lower,ci_upper\n";
    for (const auto& b : blocks)
      for (const auto& r : b.rows)
        out << r.model << ',' << r.parameter << ',' << r.scale << ',' << full(r.estimate) << ',' << full(r.se) << ','
            << r.method << ',' << full(r.estimate - kZ975 * r.se) << ',' << full(r.estimate + kZ975 * r.se) << '\n';
  }
  {
    std::ofstream out = open_output(out_dir, "fit_models.csv", cfg);
    out << "model,loglik,converged,diagnostic\n";
    for (const auto& b : blocks)
      out << b.model << ',' << full(b.loglik) << ',' << (b.converged ? "true" : "false") << ",\"" << b.diagnostic
          << "\"\n";
  }
  if (!lrt_rows.empty()) {
    std::ofstream out = open_output(out_dir, "fit_lrt.csv", cfg);
    out << "model,test,statistic,df,p_value,loglik_full,loglik_restricted,converged\n";
    for (const auto& r : lrt_rows) {
      for (std::size_t j = 0; j < r.size(); ++j) out << (j ? "," : "") << r[j];
      out << '\n';
    }
  }

  std::ostringstream text;
  text << "n0 = " << counts.n0 << ", n1 = " << counts.n1 << ", n2 = " << counts.n2 << "\n";
  for (const auto& b : blocks) {
    text << "\nModel " << b.model << " (" << b.title << ")\n";
    text << "  log-likelihood " << human(b.loglik) << ", " << (b.converged ? "converged" : "NOT converged");
    if (!b.diagnostic.empty()) text << " [" << b.diagnostic << "]";
    text << "\n";
    std::vector<std::vector<std::string>> rows{{"  parameter", "estimate", "SE", "method", "95% CI"}};
    for (const auto& r : b.rows)
      rows.push_back({"  " + r.parameter, human(r.estimate), human(r.se), r.method,
                      "(" + human(r.estimate - kZ975 * r.se) + ", " + human(r.estimate + kZ975 * r.se) + ")"});
    write_table(text, rows);
  }
  if (!lrt_rows.empty()) {
    text << "\nLikelihood ratio tests (model C)\n";
    std::vector<std::vector<std::string>> rows{{"  test", "statistic", "df", "p-value"}};
    for (const auto& r : lrt_rows) rows.push_back({"  " + r[1], human(std::stod(r[2])), r[3], human(std::stod(r[4]))});
    write_table(text, rows);
  }
  {
    std::ofstream out = open_output(out_dir, "fit_report.txt", cfg);
    out << text.str();
  }
  log << text.str();
  if (!all_ok) {
    err << "warning: at least one model did not converge\n";
    return 2;
  }
  return 0;
}

int cmd_simulate(const RunConfig& cfg, const std::string& out_dir, std::ostream& log, std::ostream& err) {
  SimScenario scn;
  try {
    scn = to_scenario(cfg);
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
  const SimSummary s = run_scenario(scn, static_cast<unsigned>(cfg.threads));
  {
    std::ofstream out = open_output(out_dir, "simulate_summary.csv", cfg);
    out << "scenario,parameter,truth,estimate,sd_emp,sd_asy,converged,replications\n";
    for (const auto& p : s.params)
      out << s.scenario << ',' << p.name << ',' << full(p.truth) << ',' << full(p.mean) << ',' << full(p.sd_emp) << ','
          << full(p.sd_asy) << ',' << s.converged << ',' << s.replications << '\n';
  }
  std::ostringstream text;
  text << "scenario " << s.scenario << ": n0 = " << scn.n0 << ", n1 = " << scn.n1 << ", n2 = " << scn.n2 << "\n";
  text << "converged " << s.converged << " of " << s.replications << " replications";
  if (s.oversample_warnings > 0) text << "; " << s.oversample_warnings << " low effective-sample-size warnings";
  text << "\n";
  if (!s.sd_emp_defined) text << "note: SD_emp undefined with fewer than two converged replications\n";
  if (!s.params.empty()) {
    std::vector<std::vector<std::string>> rows(5);
    rows[0].push_back("");
    rows[1].push_back("Truth");
    rows[2].push_back("Est");
    rows[3].push_back("SD_asy");
    rows[4].push_back("SD_emp");
    for (const auto& p : s.params) {
      rows[0].push_back(p.name);
      rows[1].push_back(human(p.truth));
      rows[2].push_back(human(p.mean));
      rows[3].push_back(human(p.sd_asy));
      rows[4].push_back(human(p.sd_emp));
    }
    write_table(text, rows);
  }
  {
    std::ofstream out = open_output(out_dir, "simulate_summary.txt", cfg);
    out << text.str();
  }
  log << text.str() << "runtime " << human(s.runtime_seconds) << " s\n";
  if (s.failed) {
    std::ofstream out = open_output(out_dir, "simulate_diagnostics.txt", cfg);
    for (const auto& d : s.diagnostics) out << d << '\n';
    err << "error: more than 10% of replications failed; see simulate_diagnostics.txt\n";
    return 2;
  }
  return 0;
}

int cmd_efficiency(const RunConfig& cfg, const std::string& out_dir, std::ostream& log, std::ostream& err) {
  SimScenario base;
  try {
    base = to_scenario(cfg);
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
  const auto threads = static_cast<unsigned>(cfg.threads);
  try {
    std::vector<SimScenario> variants;
    for (std::size_t k = 0; k < cfg.variant_n1.size(); ++k) {
      SimScenario v = base;
      v.n1 = cfg.variant_n1[k];
      v.n2 = cfg.variant_n2[k];
      v.name = base.name + "_n1_" + std::to_string(v.n1) + "_n2_" + std::to_string(v.n2);
      v.check();
      variants.push_back(v);
    }
    if (!variants.empty()) {
      const auto rows = efficiency_curve(base, variants, threads);
      std::ofstream out = open_output(out_dir, "efficiency.csv", cfg);
      out << "base,variant,coordinate,n1,n2,proportion_prevalent,variance_ratio\n";
      std::vector<std::vector<std::string>> table{{"variant", "coordinate", "n1", "n2", "ratio"}};
      for (const auto& r : rows) {
        const double prop = r.n1 + r.n2 > 0 ? static_cast<double>(r.n2) / static_cast<double>(r.n1 + r.n2) : kNaN;
        out << base.name << ',' << r.variant << ',' << r.coordinate << ',' << r.n1 << ',' << r.n2 << ',' << full(prop)
            << ',' << full(r.variance_ratio) << '\n';
        table.push_back({r.variant, r.coordinate, std::to_string(r.n1), std::to_string(r.n2), human(r.variance_ratio)});
      }
      write_table(log, table);
    }
    if (!cfg.added_incident.empty()) {
      std::vector<std::size_t> added(cfg.added_incident.begin(), cfg.added_incident.end());
      const auto rows = equivalence_search(base, added, cfg.n2_step, cfg.n2_max, threads);
      std::ofstream out = open_output(out_dir, "equivalence.csv", cfg);
      out << "base,added_incident,coordinate,n2,variance_ratio,solved\n";
      std::vector<std::vector<std::string>> table{{"added_incident", "coordinate", "n2", "ratio", "solved"}};
      for (const auto& r : rows) {
        out << base.name << ',' << r.added_incident << ',' << r.coordinate << ',' << r.n2 << ','
            << full(r.variance_ratio) << ',' << (r.solved ? "true" : "false") << '\n';
        table.push_back({std::to_string(r.added_incident), r.coordinate, std::to_string(r.n2), human(r.variance_ratio),
                         r.solved ? "yes" : "no"});
      }
      write_table(log, table);
    }
  } catch (const std::runtime_error& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}

int run_command(const RunConfig& cfg, const std::string& out_dir, std::ostream& log, std::ostream& err) {
  if (cfg.command == "fit") return cmd_fit(cfg, out_dir, log, err);
  if (cfg.command == "simulate") return cmd_simulate(cfg, out_dir, log, err);
  if (cfg.command == "efficiency") return cmd_efficiency(cfg, out_dir, log, err);
  err << "error: unknown command '" << cfg.command << "'\n";
  return 1;
}

}  // namespace ipcc
