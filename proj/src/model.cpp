#include "ogl/model.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace ogl {

GroupCollection::GroupCollection(std::vector<IndexSet> groups, Index p) : groups_(std::move(groups)), p_(p) {
  require(p_ >= 1, "group collection: p must be at least 1");
  require(!groups_.empty(), "group collection: at least one group is required");
  membership_.assign(static_cast<std::size_t>(p_), 0);
  owners_.assign(static_cast<std::size_t>(p_), {});
  std::set<IndexSet> seen;
  for (std::size_t g = 0; g < groups_.size(); ++g) {
    auto& grp = groups_[g];
    require(!grp.empty(), "group collection: group " + std::to_string(g + 1) + " is empty");
    std::sort(grp.begin(), grp.end());
    require(std::adjacent_find(grp.begin(), grp.end()) == grp.end(),
            "group collection: group " + std::to_string(g + 1) + " repeats an index");
    require(grp.front() >= 0 && grp.back() < p_,
            "group collection: group " + std::to_string(g + 1) + " has an index outside 1.." + std::to_string(p_));
    require(seen.insert(grp).second, "group collection: group " + std::to_string(g + 1) + " duplicates an earlier group");
    for (Index i : grp) {
      ++membership_[static_cast<std::size_t>(i)];
      owners_[static_cast<std::size_t>(i)].push_back(static_cast<Index>(g));
    }
  }
  for (Index i = 0; i < p_; ++i) {
    require(membership_[static_cast<std::size_t>(i)] > 0,
            "group collection: predictor " + std::to_string(i + 1) + " is not covered by any group");
  }
  overlap_degree_ = *std::max_element(membership_.begin(), membership_.end());
}

GroupCollection GroupCollection::from_one_based(const std::vector<std::vector<Index>>& groups, Index p) {
  std::vector<IndexSet> zero_based;
  zero_based.reserve(groups.size());
  for (const auto& g : groups) {
    IndexSet s;
    s.reserve(g.size());
    for (Index i : g) s.push_back(i - 1);
    zero_based.push_back(std::move(s));
  }
  return GroupCollection(std::move(zero_based), p);
}

std::vector<std::vector<Index>> GroupCollection::to_one_based() const {
  std::vector<std::vector<Index>> out;
  out.reserve(groups_.size());
  for (const auto& g : groups_) {
    std::vector<Index> s;
    s.reserve(g.size());
    for (Index i : g) s.push_back(i + 1);
    out.push_back(std::move(s));
  }
  return out;
}

GroupCollection GroupCollection::singletons(Index p) {
  std::vector<IndexSet> groups;
  groups.reserve(static_cast<std::size_t>(p));
  for (Index i = 0; i < p; ++i) groups.push_back({i});
  return GroupCollection(std::move(groups), p);
}

Index GroupCollection::max_group_size() const {
  Index m = 0;
  for (const auto& g : groups_) m = std::max(m, static_cast<Index>(g.size()));
  return m;
}

Index GroupCollection::min_group_size() const {
  Index m = p_;
  for (const auto& g : groups_) m = std::min(m, static_cast<Index>(g.size()));
  return m;
}

Index GroupCollection::total_size() const {
  Index t = 0;
  for (const auto& g : groups_) t += static_cast<Index>(g.size());
  return t;
}

Vector GroupCollection::restrict(const Vector& v, Index g) const {
  const auto& grp = (*this)[g];
  Vector out(static_cast<Index>(grp.size()));
  for (std::size_t k = 0; k < grp.size(); ++k) out[static_cast<Index>(k)] = v[grp[k]];
  return out;
}

std::string to_string(Normalization n) {
  switch (n) {
    case Normalization::ColumnUnitDiag: return "column-unit-diag";
    case Normalization::RowUnitNorm: return "row-unit-norm";
    case Normalization::None: return "none";
  }
  return "none";
}

Normalization normalization_from_string(const std::string& s) {
  if (s == "column-unit-diag") return Normalization::ColumnUnitDiag;
  if (s == "row-unit-norm") return Normalization::RowUnitNorm;
  if (s == "none") return Normalization::None;
  throw ValidationError("unknown normalization '" + s + "'");
}

void ProblemInstance::validate() const {
  require(n() >= 1 && p() >= 1, "instance: X must have at least one row and one column");
  require(y.size() == n(), "instance: y has length " + std::to_string(y.size()) + ", expected " + std::to_string(n()));
  if (beta0) {
    require(beta0->size() == p(), "instance: beta0 has length " + std::to_string(beta0->size()) + ", expected " +
                                      std::to_string(p()));
  }
  if (sigma) require(*sigma >= 0.0 && std::isfinite(*sigma), "instance: sigma must be finite and nonnegative");
  require(X.allFinite() && y.allFinite(), "instance: X and y must be finite");
  constexpr double tol = 1e-10;
  if (normalization == Normalization::ColumnUnitDiag) {
    const double nn = static_cast<double>(n());
    for (Index j = 0; j < p(); ++j) {
      require(std::abs(X.col(j).squaredNorm() / nn - 1.0) <= tol,
              "instance: column " + std::to_string(j + 1) + " violates diag(X^T X / n) = 1");
    }
  } else if (normalization == Normalization::RowUnitNorm) {
    for (Index i = 0; i < n(); ++i) {
      require(std::abs(X.row(i).norm() - 1.0) <= tol, "instance: row " + std::to_string(i + 1) + " is not unit norm");
    }
  }
}

Vector Decomposition::sum(Index p) const {
  Vector s = Vector::Zero(p);
  for (const auto& v : parts) s += v;
  return s;
}

std::vector<double> Decomposition::part_norms() const {
  std::vector<double> out;
  out.reserve(parts.size());
  for (const auto& v : parts) out.push_back(v.norm());
  return out;
}

IndexSet Decomposition::active_set(double threshold) const {
  IndexSet out;
  for (std::size_t g = 0; g < parts.size(); ++g) {
    if (parts[g].norm() > threshold) out.push_back(static_cast<Index>(g));
  }
  return out;
}

double Decomposition::penalty() const {
  double s = 0.0;
  for (const auto& v : parts) s += v.norm();
  return s;
}

double active_threshold(const Vector& beta) { return 1e-8 * (1.0 + beta.norm()); }

GroupCollection make_contiguous_groups(Index p, Index group_size, Index overlap) {
  require(group_size >= 1, "contiguous groups: group size must be at least 1");
  require(overlap >= 1 && overlap <= group_size,
          "contiguous groups: overlap must lie in [1, group size], got " + std::to_string(overlap));
  require(p >= group_size, "contiguous groups: p (" + std::to_string(p) + ") is smaller than the group size");
  const Index stride = group_size + 1 - overlap;
  std::vector<IndexSet> groups;
  for (Index start = 0; start + group_size <= p; start += stride) {
    IndexSet g(static_cast<std::size_t>(group_size));
    for (Index k = 0; k < group_size; ++k) g[static_cast<std::size_t>(k)] = start + k;
    groups.push_back(std::move(g));
  }
  // The tail past the last full group is covered by a shorter final group so
  // the collection still spans {1..p}.
  const Index covered = groups.back().back() + 1;
  if (covered < p) {
    IndexSet tail;
    for (Index i = covered; i < p; ++i) tail.push_back(i);
    groups.push_back(std::move(tail));
  }
  return GroupCollection(std::move(groups), p);
}

IndexSet leading_support(const GroupCollection& groups, Index k) {
  std::set<Index> s;
  for (Index g = 0; g < k; ++g) s.insert(groups[g].begin(), groups[g].end());
  return {s.begin(), s.end()};
}

Matrix normalize_columns(const Matrix& X) {
  Matrix out = X;
  const double sqrt_n = std::sqrt(static_cast<double>(X.rows()));
  for (Index j = 0; j < X.cols(); ++j) {
    const double norm = X.col(j).norm();
    if (norm > 0.0) out.col(j) *= sqrt_n / norm;
  }
  return out;
}

Matrix normalize_rows(const Matrix& X) {
  Matrix out = X;
  for (Index i = 0; i < X.rows(); ++i) {
    const double norm = X.row(i).norm();
    if (norm > 0.0) out.row(i) /= norm;
  }
  return out;
}

Vector draw_response(const Matrix& X, const Vector& beta0, double sigma, Rng& rng) {
  Vector y = X * beta0;
  if (sigma > 0.0) y += sigma * standard_normal(X.rows(), rng);
  return y;
}

ProblemInstance generate_instance(Index p, Index n, const GroupCollection& groups, Index k_active, double sigma,
                                  std::uint64_t seed) {
  require(groups.p() == p, "generate_instance: groups are defined over a different p");
  require(n >= 1, "generate_instance: n must be at least 1");
  require(k_active >= 0 && k_active <= groups.size(),
          "generate_instance: k_active (" + std::to_string(k_active) + ") exceeds the number of groups (" +
              std::to_string(groups.size()) + ")");
  require(sigma >= 0.0 && std::isfinite(sigma), "generate_instance: sigma must be finite and nonnegative");

  Rng rng = make_rng(seed);
  std::normal_distribution<double> z(0.0, 1.0);
  Matrix X(n, p);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < p; ++j) X(i, j) = z(rng);

  ProblemInstance inst;
  inst.X = normalize_rows(X);
  Vector beta0 = Vector::Zero(p);
  for (Index i : leading_support(groups, k_active)) beta0[i] = z(rng);
  inst.y = draw_response(inst.X, beta0, sigma, rng);
  inst.beta0 = std::move(beta0);
  inst.sigma = sigma;
  inst.normalization = Normalization::RowUnitNorm;
  return inst;
}

Vector ols_fit(const Matrix& X, const Vector& y) {
  require(X.rows() == y.size(), "ols: X and y have inconsistent row counts");
  require(X.rows() >= X.cols(), "ols: X^T X is singular because n < p");
  Eigen::BDCSVD<Matrix> svd(X, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const auto& s = svd.singularValues();
  if (s.size() == 0 || s[s.size() - 1] < 1e-10 * s[0]) {
    throw NumericalError("ols: X^T X is numerically singular (singular value ratio below 1e-10)");
  }
  return svd.matrixV() * (s.cwiseInverse().asDiagonal() * (svd.matrixU().transpose() * y));
}

Vector ols_fit(const ProblemInstance& instance) {
  instance.validate();
  return ols_fit(instance.X, instance.y);
}

double recovery_error(const Vector& beta_hat, const Vector& beta0) {
  require(beta_hat.size() == beta0.size(), "recovery_error: length mismatch");
  const double denom = beta0.norm();
  require(denom > 0.0, "recovery_error: beta0 is the zero vector");
  return (beta0 - beta_hat).norm() / denom;
}

}  // namespace ogl
