#pragma once

#include <optional>
#include <vector>

#include "ogl/model.hpp"

namespace ogl {

/// X_tilde = [X_g]_{g in G}: each group's columns copied side by side, so the
/// overlapping problem becomes a disjoint group lasso on latent coefficients.
struct DuplicatedDesign {
  Matrix X_tilde;
  std::vector<Index> block_start;  // first column of each group's block
  std::vector<Index> block_size;
  std::vector<Index> source;       // duplicated column -> original predictor

  Index columns() const { return X_tilde.cols(); }
  /// Sums latent blocks back into a length-p coefficient vector.
  Vector collapse(const Vector& latent, Index p) const;
  /// Latent blocks as a per-group decomposition of the collapsed vector.
  Decomposition decomposition(const Vector& latent, Index p) const;
};

DuplicatedDesign duplicate_design(const ProblemInstance& instance, const GroupCollection& groups);
DuplicatedDesign duplicate_design(const Matrix& X, const GroupCollection& groups);

struct SolverConfig {
  double tolerance = 1e-8;
  int max_iters = 100000;  // block-coordinate sweeps
  double lambda = 0.0;
  /// Per-group multipliers; +inf freezes a group at zero, 0 leaves it
  /// unpenalized.
  std::optional<std::vector<double>> weights;
  /// Latent coefficients (length sum_g |g|) to start from.
  std::optional<Vector> warm_start;
  /// Record the objective after every sweep in FitDiagnostics::objective_trace.
  bool trace = false;
};

struct FitDiagnostics {
  Vector latent;                       // duplicated coefficients at exit
  std::vector<double> objective_trace;
};

/// Minimizes (1/n)||y - X_tilde w||^2 + 2 lambda sum_g lambda_g ||w_g|| by
/// cyclic block coordinate descent with exact block minimization. Stops when
/// the largest block KKT residual falls to `tolerance`.
FitResult fit(const ProblemInstance& instance, const GroupCollection& groups, const SolverConfig& config,
              FitDiagnostics* diagnostics = nullptr);

/// (1/n)||y - X sum_g v_g||^2 + 2 lambda sum_g lambda_g ||v_g|| for a given
/// decomposition; frozen groups must carry no mass.
double objective(const ProblemInstance& instance, const Decomposition& decomposition, double lambda,
                 const std::optional<std::vector<double>>& weights = std::nullopt);

/// (1/n)||y - X beta||^2 + 2 lambda ||beta||_{2,1,G}, the overlap norm
/// computed by overlap_norm.
double penalized_objective(const ProblemInstance& instance, const GroupCollection& groups, const Vector& beta,
                           double lambda);

struct KktReport {
  double max_residual = 0.0;
  std::vector<double> residual;  // per group
};

/// First-order optimality of a fit in duplicated coordinates:
/// active blocks  ||(1/n) X_g^T r - lambda lambda_g v_g / ||v_g|| ||,
/// inactive blocks max(0, ||(1/n) X_g^T r|| - lambda lambda_g),
/// frozen groups report 0.
KktReport kkt_check(const ProblemInstance& instance, const GroupCollection& groups, const FitResult& fit);

/// Smallest lambda at which the zero vector is optimal: max_g ||X_g^T y|| / (n lambda_g).
double lambda_max(const ProblemInstance& instance, const GroupCollection& groups,
                  const std::optional<std::vector<double>>& weights = std::nullopt);

/// Warm-started fits over a strictly descending lambda grid.
std::vector<FitResult> fit_path(const ProblemInstance& instance, const GroupCollection& groups,
                                const std::vector<double>& lambdas, const SolverConfig& config);

/// `count` log-spaced values from lambda_max down to ratio * lambda_max.
std::vector<double> lambda_grid(double lambda_max, int count, double ratio);

struct AdaptiveWeights {
  std::vector<double> weights;  // +inf for groups with a zero OLS part
  Vector beta_ols;
  Decomposition ols_decomposition;
};

/// lambda_g = 1 / ||v_g^OLS||^gamma from a norm-minimizing decomposition of
/// the least-squares fit.
AdaptiveWeights adaptive_weights(const ProblemInstance& instance, const GroupCollection& groups, double gamma);

}  // namespace ogl
