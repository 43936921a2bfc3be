#pragma once

// Domain data model: subjects, datasets, model specifications and parameter
// vectors for case-control studies with incident and prevalent cases.

#include <array>
#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace ipcc {

enum class GroupLabel { Control = 0, IncidentCase = 1, PrevalentCase = 2 };

const char* to_string(GroupLabel g);

struct Subject {
  GroupLabel group = GroupLabel::Control;
  std::vector<double> covariates;
  std::optional<double> backward_time;  // prevalent cases only

  bool operator==(const Subject&) const = default;
};

struct GroupCounts {
  std::size_t n0 = 0;
  std::size_t n1 = 0;
  std::size_t n2 = 0;

  std::size_t total() const { return n0 + n1 + n2; }
  bool operator==(const GroupCounts&) const = default;
};

struct Dataset {
  std::vector<Subject> subjects;
  std::vector<std::string> covariate_names;

  std::size_t size() const { return subjects.size(); }
  std::size_t n_covariates() const { return covariate_names.size(); }
  // Index of a named covariate; throws std::out_of_range if absent.
  std::size_t covariate_index(const std::string& name) const;

  bool operator==(const Dataset&) const = default;
};

GroupCounts group_counts(const Dataset& data);

enum class HazardKind { Exponential, Weibull, PiecewiseConstant };

const char* to_string(HazardKind k);
HazardKind hazard_kind_from_string(const std::string& s);

// Baseline hazard family of the proportional-hazards survival model.
// Exponential: one rate parameter. Weibull: (shape, scale).
// PiecewiseConstant: one rate per interval [tau_k, tau_{k+1}), the last
// interval extending to infinity.
struct HazardFamily {
  HazardKind kind = HazardKind::Weibull;
  std::vector<double> breakpoints;

  static HazardFamily exponential() { return {HazardKind::Exponential, {}}; }
  static HazardFamily weibull() { return {HazardKind::Weibull, {}}; }
  static HazardFamily piecewise(std::vector<double> tau) {
    return {HazardKind::PiecewiseConstant, std::move(tau)};
  }

  std::size_t n_params() const;
  std::vector<std::string> param_names() const;

  bool operator==(const HazardFamily&) const = default;
};

struct ModelSpec {
  std::vector<std::size_t> incidence_covariates;
  std::vector<std::size_t> survival_covariates;
  HazardFamily hazard_family = HazardFamily::weibull();
  double xi = 1.0;

  // Checks breakpoints against xi and covariate indices against the
  // dataset width; throws std::invalid_argument.
  void check(std::size_t n_covariates) const;
};

class ParameterDomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

class EvaluationError : public std::runtime_error {
 public:
  EvaluationError(const std::string& what, std::size_t subject)
      : std::runtime_error(what + " (subject " + std::to_string(subject) + ")"),
        subject_(subject) {}
  std::size_t subject() const { return subject_; }

 private:
  std::size_t subject_;
};

struct ParamVector {
  double alpha = 0.0;
  double nu = 0.0;
  Eigen::VectorXd beta;
  Eigen::VectorXd hazard_params;  // natural scale, strictly positive
  Eigen::VectorXd zeta;

  // Throws ParameterDomainError on non-positive or non-finite hazard
  // parameters or non-finite entries elsewhere.
  void check() const;
};

struct ValidationReport {
  std::vector<std::string> violations;
  bool ok() const { return violations.empty(); }
};

ValidationReport validate_dataset(const Dataset& data, const ModelSpec& spec);

// Column selection for a design matrix; rows follow the dataset order.
Eigen::MatrixXd design_matrix(const Dataset& data, const std::vector<std::size_t>& columns);

}  // namespace ipcc
