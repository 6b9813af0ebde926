#pragma once

#include <string>
#include <vector>

#include "ogl/model.hpp"

namespace ogl {

/// Predictors and groups split against the support H of beta0.
struct SupportPartition {
  IndexSet H;
  IndexSet H_c;
  IndexSet G_H;   // groups inside H
  IndexSet G_Hc;  // groups inside H^c
  IndexSet G_Ho;  // groups meeting both
};

/// H = {i : |beta0_i| > zero_tol}.
SupportPartition partition_support(const Vector& beta0, const GroupCollection& groups, double zero_tol = 0.0);

/// Some subcollection covers exactly H while the rest covers exactly H^c;
/// equivalent to G_Ho being empty.
bool separation_of_support_holds(const Vector& beta0, const GroupCollection& groups, double zero_tol = 0.0);

enum class Violation {
  /// Restarts of the norm solver at beta0 disagree on the part norms.
  MassSplit,
  /// Same, at a random point near beta0.
  PerturbedMassSplit,
  /// A minimizing decomposition puts mass on a group straddling H.
  StraddlingMass,
  /// H is not an exact union of groups inside it, or is such a union in
  /// more than one way (some group inside H is redundant).
  UnionAmbiguity,
};

std::string to_string(Violation v);

struct AssumptionOptions {
  int starts = 8;
  int perturbations = 20;
  double radius = 1e-2;  // relative to ||beta0||
  std::uint64_t seed = 0;
  /// Part norms closer than tolerance * (1 + ||beta||) count as equal.
  double tolerance = 1e-4;
  double zero_tol = 0.0;
};

struct AssumptionVerdict {
  /// Probing can only refute the assumption; false means "consistent".
  bool violated = false;
  std::vector<Violation> reasons;
  std::vector<std::string> details;
};

/// Numerical falsifier for the unique-decomposition condition of the
/// adaptive estimator's asymptotics.
AssumptionVerdict check_assumption_correct(const Vector& beta0, const GroupCollection& groups,
                                           const AssumptionOptions& options = {});

/// lambda(n) = c * n^(-exponent).
struct LambdaRule {
  double c = 1.0;
  double exponent = 0.7;
  double at(Index n) const;
};

/// sqrt(n) lambda -> 0 and n^((gamma+1)/2) lambda -> infinity, i.e.
/// 1/2 < exponent < (gamma + 1)/2.
bool rate_conditions_hold(const LambdaRule& rule, double gamma);

enum class DesignCovariance { Identity, AR1 };

std::string to_string(DesignCovariance d);
DesignCovariance design_covariance_from_string(const std::string& s);

/// Population covariance of the design rows.
Matrix design_covariance(Index p, DesignCovariance kind, double ar_rho);

struct AsymptoticOptions {
  double sigma = 1.0;
  std::vector<Index> n_grid{250, 1000, 4000};
  double gamma = 1.0;
  LambdaRule rule;
  Index trials = 300;
  std::uint64_t seed = 0;
  DesignCovariance design = DesignCovariance::Identity;
  double ar_rho = 0.3;
  double tolerance = 1e-8;
  int jobs = 1;
};

struct AsymptoticTrial {
  Index n = 0;
  Index trial = 0;
  bool converged = false;
  bool support_match = false;
  bool false_positive = false;  // some coordinate in H^c selected
  double max_off_support = 0.0;
  /// max over straddling groups of n^(gamma/2) ||v_g^OLS||^gamma (0 if none).
  double straddle_statistic = 0.0;
  Vector scaled_error;  // sqrt(n) (beta_hat_H - beta0_H)
};

struct AsymptoticCell {
  Index n = 0;
  double lambda = 0.0;
  Index excluded = 0;
  double recovery_rate = 0.0;
  double false_positive_rate = 0.0;
  /// Centered sample covariance of sqrt(n)(beta_hat_H - beta0_H).
  Matrix empirical_covariance;
  /// sigma^2 M_H^{-1}.
  Matrix target_covariance;
  double frobenius_relative_error = 0.0;
  /// Quantiles 0.5, 0.9, 0.99, 1 of max |beta_hat_{H^c}|.
  std::vector<double> max_off_support_quantiles;
  double straddle_p95 = 0.0;
};

struct AsymptoticReport {
  SupportPartition partition;
  std::vector<AsymptoticCell> cells;
  std::vector<AsymptoticTrial> trials;
  /// Each cell's Frobenius error is at most 1.2 times the previous one.
  bool frobenius_non_increasing = false;
};

/// Adaptive overlapping-group fits over an n grid: rows drawn i.i.d. from
/// N(0, M), weights from adaptive_weights, lambda from the rule.
AsymptoticReport run_asymptotic_study(const GroupCollection& groups, const Vector& beta0,
                                      const AsymptoticOptions& options);

/// Quantile by linear interpolation between order statistics.
double quantile(std::vector<double> values, double q);

}  // namespace ogl
