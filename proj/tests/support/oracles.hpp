#pragma once

// Reference implementations used only by the test suites. Each one takes a
// different route from the library code it checks.

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <vector>

#include "ogl/model.hpp"

namespace ogl::testing {

/// Brute-force overlap norm: grid search over how each shared coordinate is
/// split between its groups, then pattern-search refinement. At most six free
/// split coordinates.
inline double overlap_norm_oracle(const Vector& beta, const GroupCollection& groups, int grid_steps) {
  require(grid_steps >= 2, "oracle: need at least two grid steps");
  struct Shared {
    Index coord;
    std::vector<Index> owners;
  };
  std::vector<Shared> shared;
  Index free_dims = 0;
  for (Index i = 0; i < groups.p(); ++i) {
    if (groups.membership(i) > 1 && beta[i] != 0.0) {
      shared.push_back({i, groups.groups_of(i)});
      free_dims += groups.membership(i) - 1;
    }
  }
  require(free_dims <= 6, "oracle: more than six free duplicated coordinates");

  // Owner of each unshared nonzero coordinate takes all of it.
  auto evaluate = [&](const std::vector<double>& t) {
    std::vector<double> sq(static_cast<std::size_t>(groups.size()), 0.0);
    for (Index i = 0; i < groups.p(); ++i) {
      if (groups.membership(i) == 1 && beta[i] != 0.0) sq[static_cast<std::size_t>(groups.groups_of(i)[0])] += beta[i] * beta[i];
    }
    std::size_t k = 0;
    for (const auto& s : shared) {
      double rest = 1.0;
      for (std::size_t o = 0; o + 1 < s.owners.size(); ++o) {
        const double part = t[k++] * beta[s.coord];
        rest -= t[k - 1];
        sq[static_cast<std::size_t>(s.owners[o])] += part * part;
      }
      const double last = rest * beta[s.coord];
      sq[static_cast<std::size_t>(s.owners.back())] += last * last;
    }
    double total = 0.0;
    for (double v : sq) total += std::sqrt(v);
    return total;
  };

  const std::size_t d = static_cast<std::size_t>(free_dims);
  std::vector<double> t(d, 0.0);
  if (d == 0) return evaluate(t);

  auto grid_search = [&](const std::vector<double>& center, double half, int steps, std::vector<double>& best) {
    double best_val = std::numeric_limits<double>::infinity();
    std::vector<int> idx(d, 0);
    std::vector<double> x(d);
    while (true) {
      for (std::size_t j = 0; j < d; ++j)
        x[j] = center[j] - half + 2.0 * half * static_cast<double>(idx[j]) / static_cast<double>(steps - 1);
      const double v = evaluate(x);
      if (v < best_val) {
        best_val = v;
        best = x;
      }
      std::size_t j = 0;
      while (j < d && ++idx[j] == steps) idx[j++] = 0;
      if (j == d) break;
    }
    return best_val;
  };

  std::vector<double> center(d, 0.5);
  std::vector<double> best(d, 0.5);
  double value = grid_search(center, 0.5, grid_steps, best);
  double half = 1.0 / static_cast<double>(grid_steps - 1);
  // Pattern search: the window only shrinks once the center beats its own
  // grid and a set of random directions, which lets it slide along kinks.
  std::mt19937_64 rng(12345);
  std::normal_distribution<double> normal;
  auto random_directions = [&](const std::vector<double>& c, double h, std::vector<double>& out) {
    double best_val = std::numeric_limits<double>::infinity();
    std::vector<double> x(d), dir(d);
    for (int k = 0; k < 64; ++k) {
      double len = 0.0;
      for (auto& v : dir) {
        v = normal(rng);
        len += v * v;
      }
      len = std::sqrt(len);
      for (std::size_t j = 0; j < d; ++j) x[j] = c[j] + h * dir[j] / len;
      const double v = evaluate(x);
      if (v < best_val) {
        best_val = v;
        out = x;
      }
    }
    return best_val;
  };
  for (int level = 0; level < 20000 && half > 1e-13; ++level) {
    center = best;
    double v = grid_search(center, half, 5, best);
    std::vector<double> alt;
    const double w = random_directions(center, half, alt);
    if (w < v) {
      v = w;
      best = alt;
    }
    if (v < value) {
      value = v;
    } else {
      best = center;
      half *= 0.7;
    }
  }
  return value;
}

/// Cyclic coordinate descent for (1/n)||y - X b||^2 + 2 lambda ||b||_1.
inline Vector lasso_cd_oracle(const Matrix& X, const Vector& y, double lambda, int max_sweeps = 200000) {
  const double n = static_cast<double>(X.rows());
  Vector b = Vector::Zero(X.cols());
  Vector r = y;
  Vector a(X.cols());
  for (Index j = 0; j < X.cols(); ++j) a[j] = X.col(j).squaredNorm() / n;
  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    double change = 0.0;
    for (Index j = 0; j < X.cols(); ++j) {
      const double z = X.col(j).dot(r) / n + a[j] * b[j];
      const double next = (z > lambda ? z - lambda : (z < -lambda ? z + lambda : 0.0)) / a[j];
      const double delta = next - b[j];
      if (delta != 0.0) {
        r -= delta * X.col(j);
        b[j] = next;
        change = std::max(change, std::abs(delta));
      }
    }
    if (change < 1e-15) break;
  }
  return b;
}

/// Group soft-thresholding block descent for disjoint groups whose blocks
/// satisfy X_g^T X_g / n = I.
inline Vector group_lasso_orthonormal_oracle(const Matrix& X, const Vector& y, const GroupCollection& groups,
                                             double lambda, int max_sweeps = 200000) {
  require(groups.is_partition(), "oracle: groups must be disjoint");
  const double n = static_cast<double>(X.rows());
  Vector b = Vector::Zero(X.cols());
  Vector r = y;
  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    double change = 0.0;
    for (Index g = 0; g < groups.size(); ++g) {
      const auto& idx = groups[g];
      Vector z(static_cast<Index>(idx.size()));
      for (std::size_t k = 0; k < idx.size(); ++k) z[static_cast<Index>(k)] = X.col(idx[k]).dot(r) / n + b[idx[k]];
      const double zn = z.norm();
      const Vector next = zn > lambda ? Vector((1.0 - lambda / zn) * z) : Vector(Vector::Zero(z.size()));
      for (std::size_t k = 0; k < idx.size(); ++k) {
        const double delta = next[static_cast<Index>(k)] - b[idx[k]];
        if (delta != 0.0) {
          r -= delta * X.col(idx[k]);
          b[idx[k]] = next[static_cast<Index>(k)];
          change = std::max(change, std::abs(delta));
        }
      }
    }
    if (change < 1e-15) break;
  }
  return b;
}

/// Least squares through the normal equations and a Cholesky factorization.
inline Vector normal_equations_ols(const Matrix& X, const Vector& y) {
  const Matrix gram = X.transpose() * X;
  return gram.llt().solve(X.transpose() * y);
}

/// Replaces each block of columns by an orthonormal basis scaled so that
/// X_g^T X_g / n = I.
inline Matrix orthonormalize_blocks(const Matrix& X, const GroupCollection& groups) {
  require(groups.is_partition(), "orthonormalize_blocks: groups must be disjoint");
  Matrix out = X;
  const double sqrt_n = std::sqrt(static_cast<double>(X.rows()));
  for (Index g = 0; g < groups.size(); ++g) {
    const auto& idx = groups[g];
    Matrix block(X.rows(), static_cast<Index>(idx.size()));
    for (std::size_t k = 0; k < idx.size(); ++k) block.col(static_cast<Index>(k)) = X.col(idx[k]);
    Eigen::HouseholderQR<Matrix> qr(block);
    const Matrix q = qr.householderQ() * Matrix::Identity(X.rows(), block.cols());
    for (std::size_t k = 0; k < idx.size(); ++k) out.col(idx[k]) = sqrt_n * q.col(static_cast<Index>(k));
  }
  return out;
}

}  // namespace ogl::testing
