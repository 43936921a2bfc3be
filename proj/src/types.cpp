#include "ipcc/types.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace ipcc {

const char* to_string(GroupLabel g) {
  switch (g) {
    case GroupLabel::Control: return "control";
    case GroupLabel::IncidentCase: return "incident";
    case GroupLabel::PrevalentCase: return "prevalent";
  }
  return "?";
}

const char* to_string(HazardKind k) {
  switch (k) {
    case HazardKind::Exponential: return "exponential";
    case HazardKind::Weibull: return "weibull";
    case HazardKind::PiecewiseConstant: return "piecewise";
  }
  return "?";
}

HazardKind hazard_kind_from_string(const std::string& s) {
  if (s == "exponential") return HazardKind::Exponential;
  if (s == "weibull") return HazardKind::Weibull;
  if (s == "piecewise") return HazardKind::PiecewiseConstant;
  throw std::invalid_argument("unknown hazard family '" + s + "'");
}

std::size_t HazardFamily::n_params() const {
  switch (kind) {
    case HazardKind::Exponential: return 1;
    case HazardKind::Weibull: return 2;
    case HazardKind::PiecewiseConstant: return breakpoints.size();
  }
  return 0;
}

std::vector<std::string> HazardFamily::param_names() const {
  switch (kind) {
    case HazardKind::Exponential: return {"rate"};
    case HazardKind::Weibull: return {"kappa1", "kappa2"};
    case HazardKind::PiecewiseConstant: {
      std::vector<std::string> names;
      for (std::size_t k = 0; k < breakpoints.size(); ++k)
        names.push_back("lambda0" + std::to_string(k + 1));
      return names;
    }
  }
  return {};
}

std::size_t Dataset::covariate_index(const std::string& name) const {
  auto it = std::find(covariate_names.begin(), covariate_names.end(), name);
  if (it == covariate_names.end()) throw std::out_of_range("no covariate named '" + name + "'");
  return static_cast<std::size_t>(it - covariate_names.begin());
}

GroupCounts group_counts(const Dataset& data) {
  GroupCounts c;
  for (const auto& s : data.subjects) {
    switch (s.group) {
      case GroupLabel::Control: ++c.n0; break;
      case GroupLabel::IncidentCase: ++c.n1; break;
      case GroupLabel::PrevalentCase: ++c.n2; break;
    }
  }
  return c;
}

void ModelSpec::check(std::size_t n_covariates) const {
  if (!(xi > 0.0) || !std::isfinite(xi)) throw std::invalid_argument("xi must be positive and finite");
  for (auto j : incidence_covariates)
    if (j >= n_covariates) throw std::invalid_argument("incidence covariate index out of range");
  for (auto j : survival_covariates)
    if (j >= n_covariates) throw std::invalid_argument("survival covariate index out of range");
  if (hazard_family.kind == HazardKind::PiecewiseConstant) {
    const auto& tau = hazard_family.breakpoints;
    if (tau.empty() || tau.front() != 0.0)
      throw std::invalid_argument("piecewise breakpoints must start at 0");
    for (std::size_t k = 1; k < tau.size(); ++k)
      if (!(tau[k] > tau[k - 1])) throw std::invalid_argument("piecewise breakpoints must be strictly increasing");
    if (!(tau.back() < xi)) throw std::invalid_argument("last piecewise breakpoint must lie below xi");
  }
}

void ParamVector::check() const {
  auto finite = [](const Eigen::VectorXd& v) { return v.allFinite(); };
  if (!std::isfinite(alpha) || !std::isfinite(nu) || !finite(beta) || !finite(zeta) || !finite(hazard_params))
    throw ParameterDomainError("parameter vector has non-finite entries");
  for (Eigen::Index k = 0; k < hazard_params.size(); ++k)
    if (!(hazard_params[k] > 0.0)) throw ParameterDomainError("hazard parameters must be strictly positive");
}

ValidationReport validate_dataset(const Dataset& data, const ModelSpec& spec) {
  ValidationReport report;
  auto add = [&](std::size_t row, const std::string& msg) {
    std::ostringstream os;
    os << "row " << row + 1 << ": " << msg;
    report.violations.push_back(os.str());
  };
  const std::size_t width = data.covariate_names.size();
  for (std::size_t i = 0; i < data.subjects.size(); ++i) {
    const auto& s = data.subjects[i];
    if (s.covariates.size() != width) add(i, "covariate count differs from header");
    for (double v : s.covariates)
      if (!std::isfinite(v)) {
        add(i, "non-finite covariate");
        break;
      }
    if (s.group == GroupLabel::PrevalentCase) {
      if (!s.backward_time) {
        add(i, "missing backward time on prevalent subject");
      } else {
        double a = *s.backward_time;
        if (!std::isfinite(a) || a < 0.0) add(i, "backward time must be non-negative");
        else if (a > spec.xi) add(i, "A exceeds xi");
      }
    } else if (s.backward_time) {
      add(i, "backward time on non-prevalent subject");
    }
  }
  auto counts = group_counts(data);
  if (counts.n0 == 0) report.violations.push_back("no controls");
  if (counts.n1 + counts.n2 == 0) report.violations.push_back("no cases");
  try {
    spec.check(width);
  } catch (const std::invalid_argument& e) {
    report.violations.push_back(std::string("model spec: ") + e.what());
  }
  return report;
}

Eigen::MatrixXd design_matrix(const Dataset& data, const std::vector<std::size_t>& columns) {
  Eigen::MatrixXd x(static_cast<Eigen::Index>(data.size()), static_cast<Eigen::Index>(columns.size()));
  for (std::size_t i = 0; i < data.size(); ++i)
    for (std::size_t j = 0; j < columns.size(); ++j)
      x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = data.subjects[i].covariates.at(columns[j]);
  return x;
}

}  // namespace ipcc
