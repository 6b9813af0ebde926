#pragma once

#include <optional>
#include <vector>

#include "ogl/model.hpp"

namespace ogl {

struct NormOptions {
  double tolerance = 1e-8;
  int max_iters = 100000;
  /// Starting group scales (one per group, nonnegative). Different starts
  /// may land on different minimizing decompositions when the minimizer is
  /// not unique.
  std::optional<std::vector<double>> start;
  /// Groups forced to carry no mass.
  std::vector<bool> frozen;
};

struct NormResult {
  double value = 0.0;
  Decomposition decomposition;
  bool converged = false;
  double tolerance = 0.0;
  /// Certified lower bound on the norm from a feasible dual point.
  double dual_bound = 0.0;
  int iterations = 0;
};

/// ||beta||_{2,1,G}: the smallest sum_g ||v_g|| over decompositions of beta.
///
/// The minimization over duplicated coordinates is carried out on its
/// variational form
///
///   min_{eta >= 0}  1/2 sum_g eta_g + 1/2 sum_i beta_i^2 / S_i(eta),
///   S_i(eta) = sum_{g contains i} eta_g,
///
/// whose minimizer gives the decomposition v_g = eta_g * alpha restricted to
/// g, with alpha_i = beta_i / S_i. Every iterate is an exact decomposition, so
/// value is always an upper bound. alpha, rescaled so max_g ||alpha_g|| <= 1,
/// is dual feasible and alpha^T beta is a lower bound; iteration stops once
/// the gap is below tolerance * max(1, value). Projected Newton steps with a
/// majorize-minimize fallback.
NormResult overlap_norm(const Vector& beta, const GroupCollection& groups, const NormOptions& options = {});

struct StructuredSparsity {
  IndexSet active;    // J_v for the computed decomposition
  Index count = 0;    // M_v
  Index minimal = 0;  // M(beta) estimate after pruning (an upper bound in general)
  IndexSet minimal_active;
  NormResult norm;
};

/// J_v, M_v and M(beta). M(beta) is estimated by trying to freeze each active
/// group (smallest part first) and keeping the freeze when the norm does not
/// grow beyond tolerance.
StructuredSparsity structured_sparsity(const Vector& beta, const GroupCollection& groups,
                                       const NormOptions& options = {});

struct DirectionReport {
  std::vector<bool> holds;
  bool all_hold = true;
};

/// Per-group check that two minimizing decompositions either have a zero
/// part or share the unit direction.
DirectionReport check_direction_uniqueness(const Decomposition& a, const Decomposition& b, double tolerance);

}  // namespace ogl
