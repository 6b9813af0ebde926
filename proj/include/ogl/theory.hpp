#pragma once

#include <optional>
#include <vector>

#include "ogl/model.hpp"

namespace ogl {

/// Constants of the finite-sample oracle inequality for a design and group
/// collection. Requires column-unit-diag normalization.
struct TheoryConstants {
  double A = 0.0;
  double sigma = 0.0;
  Index n = 0;
  Index M = 0;        // number of groups
  Index overlap = 0;  // overlap degree
  Index max_group = 0;
  Index min_group = 0;
  Index s = 0;

  /// rho_g = sqrt(lambda_max(X_g^T X_g / n)), the operator norm of the
  /// Cholesky factor of X_g^T X_g / n. Equal to 1 for orthonormal blocks.
  std::vector<double> rho_g;
  double rho_X = 0.0;  // smallest eigenvalue of X^T X / n

  /// 2 sigma sqrt(m G) / sqrt(n) * (1 + A log M / sqrt(m))^{1/2}, m = max |g|.
  double lambda_theorem = 0.0;
  /// min_g rho_g^-2 * min(A sqrt(min |g|) / 8, 8 log M).
  double q = 0.0;
  /// 2 sigma sqrt(G) / sqrt(n) * (m + A log M)^{1/2}.
  double lambda_alt = 0.0;
  /// min_g rho_g^-2 * min(A / 8, 8 log M / m).
  double q_alt = 0.0;
  /// Oracle-inequality lambda: lambda_theorem without the sqrt(G) factor.
  double lambda_oracle = 0.0;
  /// min(A sqrt(min |g|) / 8, 8 log M).
  double q_oracle = 0.0;
  /// sqrt(rho_X / (M G)).
  double kappa_upper = 0.0;
};

TheoryConstants compute_constants(const ProblemInstance& instance, const GroupCollection& groups, double A,
                                  double sigma, Index s);

/// Fixed-design family for the finite-sample checks: Gaussian X with columns
/// scaled to diag(X^T X / n) = 1, N(0,1) signal on the first k groups, noise
/// level sigma.
ProblemInstance theorem_instance(const GroupCollection& groups, Index n, Index k, double sigma, std::uint64_t seed);

/// 1 - M^{1-q}.
double nominal_rate(Index M, double q);

/// 64 sigma^2 / (kappa^2 n) * (m + A sqrt(m) log M).
double prediction_bound(const TheoryConstants& c, double kappa);
/// 32 sigma / (kappa sqrt(n)) * (m + A sqrt(m) log M)^{1/2}.
double estimation_bound(const TheoryConstants& c, double kappa);

struct KappaOptions {
  int samples = 2000;
  /// Local random-search steps applied to the best sampled direction.
  int refine_steps = 3000;
  std::uint64_t seed = 0;
  int jobs = 1;
};

struct KappaEstimate {
  /// Smallest ratio ||X Delta|| / (sqrt(n) sum_{g in J} ||v_g||) found; an
  /// upper estimate of kappa(s).
  double kappa_hat = 0.0;
  Vector witness;   // Delta attaining kappa_hat
  IndexSet witness_groups;
  double kappa_upper = 0.0;
  bool below_upper = false;  // kappa_hat <= kappa_upper + 1e-8
  int feasible_samples = 0;
};

/// Monte Carlo search over cone-feasible directions Delta: random group sets
/// J with |J| = s, Gaussian parts on J, Gaussian parts off J rescaled so that
/// their norm sum is u * 3 * (sum on J), u ~ U(0,1). Each Delta is scored with
/// its norm-minimizing decomposition, taking J as its s largest parts and
/// discarding directions outside the cone. The best direction is then
/// refined by a shrinking random local search.
KappaEstimate estimate_kappa(const ProblemInstance& instance, const GroupCollection& groups, Index s,
                             const KappaOptions& options = {});

enum class LambdaChoice { Theorem, Alternative };

struct BoundTrial {
  bool converged = false;
  double prediction_lhs = 0.0;
  double estimation_lhs = 0.0;
  bool prediction_holds = false;
  bool estimation_holds = false;
};

struct BoundReport {
  LambdaChoice choice = LambdaChoice::Theorem;
  double lambda = 0.0;
  double q = 0.0;
  double kappa = 0.0;
  Index s = 0;
  double prediction_rhs = 0.0;
  double estimation_rhs = 0.0;
  Index trials = 0;
  Index excluded = 0;
  double prediction_hold_rate = 0.0;
  double estimation_hold_rate = 0.0;
  /// Fraction of included trials where both inequalities hold.
  double empirical_hold_rate = 0.0;
  double nominal_rate = 0.0;
  /// False when more than 5% of trials were excluded.
  bool valid = true;
  std::vector<BoundTrial> records;
};

struct Theorem1Options {
  double A = 9.0;
  Index trials = 200;
  std::uint64_t seed = 0;
  LambdaChoice choice = LambdaChoice::Theorem;
  /// Sparsity level; defaults to M(beta0).
  std::optional<Index> s;
  /// Restricted-eigenvalue constant; estimated with estimate_kappa when absent.
  std::optional<double> kappa;
  KappaOptions kappa_options;
  double tolerance = 1e-8;
  int jobs = 1;
};

/// Fixed design X (column-unit-diag) and signal beta0 from `instance`; every
/// trial draws fresh noise of level sigma, fits at the chosen lambda and
/// checks the prediction and estimation bounds.
BoundReport verify_theorem1(const ProblemInstance& instance, const GroupCollection& groups,
                            const Theorem1Options& options);

struct OracleTrial {
  bool converged = false;
  double lhs = 0.0;
  double rhs = 0.0;
  bool holds = false;
};

struct OracleReport {
  double lambda = 0.0;
  double q = 0.0;
  double nominal_rate = 0.0;
  Index trials = 0;
  Index excluded = 0;
  double hold_rate = 0.0;
  bool valid = true;
  IndexSet support_groups;  // J(beta0)
  /// sqrt(m) log M + m against log p; the structured penalty has the
  /// predictive edge over the lasso when the former is smaller.
  double budget_lhs = 0.0;
  double budget_rhs = 0.0;
  bool predictive_advantage = false;
  std::vector<OracleTrial> records;
};

/// Per trial: (1/n)||X(bh - b0)||^2 + lambda ||bh - b0||_G
///   <= 4 lambda sum_{g in J(b0)} ||v_g^{bh - b0}||,
/// at lambda_oracle, with J(b0) the active groups of beta0's
/// norm-minimizing decomposition.
OracleReport verify_oracle_inequality(const ProblemInstance& instance, const GroupCollection& groups,
                                      const Theorem1Options& options);

/// exp(-min(x, x^2 / D) / 8), an upper bound on P(chi2_D >= D + x).
double chi2_tail_bound(Index D, double x);

/// Monte Carlo frequency of chi2_D > D + x.
double chi2_tail_frequency(Index D, double x, Index samples, std::uint64_t seed);

struct HolderCheck {
  double lhs = 0.0;
  double rhs = 0.0;
  bool holds = false;
};

/// alpha^T beta <= sqrt(G) max_g ||alpha_g|| ||beta||_{2,1,G}.
HolderCheck holder_extension_check(const Vector& alpha, const Vector& beta, const GroupCollection& groups);

}  // namespace ogl
