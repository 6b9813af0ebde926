#pragma once

#include <optional>
#include <string>
#include <vector>

#include "ogl/common.hpp"

namespace ogl {

/// Collection of predictor groups over {0..p-1}.
///
/// Groups are stored sorted. Construction enforces that every group is
/// nonempty, within range, distinct from every other group, and that the
/// union of all groups covers every predictor.
class GroupCollection {
 public:
  GroupCollection(std::vector<IndexSet> groups, Index p);

  /// Builds from 1-based index lists, the convention used by every file
  /// format and the CLI.
  static GroupCollection from_one_based(const std::vector<std::vector<Index>>& groups, Index p);
  std::vector<std::vector<Index>> to_one_based() const;

  static GroupCollection singletons(Index p);

  Index p() const { return p_; }
  Index size() const { return static_cast<Index>(groups_.size()); }
  const IndexSet& operator[](Index g) const { return groups_[static_cast<std::size_t>(g)]; }
  const std::vector<IndexSet>& groups() const { return groups_; }

  /// Number of groups containing predictor i.
  Index membership(Index i) const { return membership_[static_cast<std::size_t>(i)]; }
  const std::vector<Index>& memberships() const { return membership_; }

  /// Largest membership count over predictors.
  Index overlap_degree() const { return overlap_degree_; }
  Index max_group_size() const;
  Index min_group_size() const;
  /// Sum of group sizes, the column count of the duplicated design.
  Index total_size() const;
  bool is_partition() const { return overlap_degree_ == 1; }

  /// Groups containing predictor i.
  const std::vector<Index>& groups_of(Index i) const { return owners_[static_cast<std::size_t>(i)]; }

  /// Restriction of a length-p vector to the members of group g.
  Vector restrict(const Vector& v, Index g) const;

 private:
  std::vector<IndexSet> groups_;
  Index p_;
  std::vector<Index> membership_;
  std::vector<std::vector<Index>> owners_;
  Index overlap_degree_ = 0;
};

enum class Normalization { ColumnUnitDiag, RowUnitNorm, None };

std::string to_string(Normalization n);
Normalization normalization_from_string(const std::string& s);

/// Linear model data y = X beta0 + eps.
struct ProblemInstance {
  Matrix X;
  Vector y;
  std::optional<Vector> beta0;
  std::optional<double> sigma;
  Normalization normalization = Normalization::None;

  Index n() const { return X.rows(); }
  Index p() const { return X.cols(); }

  /// Checks dimensions and the declared normalization (1e-10).
  void validate() const;
};

/// Latent decomposition {v_g} with supp(v_g) inside g and sum_g v_g = beta.
struct Decomposition {
  std::vector<Vector> parts;  // one length-p vector per group, in group order

  Index groups() const { return static_cast<Index>(parts.size()); }
  Vector sum(Index p) const;
  std::vector<double> part_norms() const;
  /// Groups whose part norm exceeds `threshold`.
  IndexSet active_set(double threshold) const;
  Index active_count(double threshold) const { return static_cast<Index>(active_set(threshold).size()); }
  /// Sum of part norms.
  double penalty() const;
};

/// Scale-aware zero threshold for group parts: 1e-8 (1 + ||beta||).
double active_threshold(const Vector& beta);

struct FitResult {
  Vector beta_hat;
  Decomposition decomposition;
  double lambda = 0.0;
  // Per-group adaptive weights; +inf marks a group frozen at zero.
  std::optional<std::vector<double>> weights;
  std::optional<double> gamma;
  int iterations = 0;
  double objective = 0.0;
  double kkt_residual = 0.0;
  bool converged = false;
};

/// Groups of `group_size` consecutive predictors whose starts advance by
/// group_size + 1 - overlap, kept while the group fits inside {1..p}. Any
/// predictors past the last full group form one shorter final group.
GroupCollection make_contiguous_groups(Index p, Index group_size, Index overlap);

/// Standard normal design with unit-norm rows, signal on the union of the
/// first `k_active` groups (N(0,1) entries), Gaussian noise of level sigma.
/// Draw order: X row by row, then signal, then noise.
ProblemInstance generate_instance(Index p, Index n, const GroupCollection& groups, Index k_active,
                                  double sigma, std::uint64_t seed);

/// Union of the first k groups, 0-based and sorted.
IndexSet leading_support(const GroupCollection& groups, Index k);

/// Rescales columns so that diag(X^T X / n) = 1.
Matrix normalize_columns(const Matrix& X);
/// Rescales rows to unit Euclidean norm.
Matrix normalize_rows(const Matrix& X);

/// Fresh noise draw for a fixed design and signal.
Vector draw_response(const Matrix& X, const Vector& beta0, double sigma, Rng& rng);

/// Least squares through a thin SVD. Throws NumericalError when the smallest
/// singular value of X is below 1e-10 times the largest.
Vector ols_fit(const ProblemInstance& instance);
Vector ols_fit(const Matrix& X, const Vector& y);

/// ||beta0 - beta_hat|| / ||beta0||.
double recovery_error(const Vector& beta_hat, const Vector& beta0);

}  // namespace ogl
