#include "ogl/solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "ogl/overlap_norm.hpp"

namespace ogl {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Eigendecomposition of X_g^T X_g / n, reused by every update of the block.
struct BlockCache {
  Matrix basis;
  Vector eig;
};

BlockCache make_cache(const Eigen::Ref<const Matrix>& Xg, double n) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(Xg.transpose() * Xg / n);
  BlockCache c{es.eigenvectors(), es.eigenvalues().cwiseMax(0.0)};
  return c;
}

// argmin_w  w^T A w - 2 b^T w + 2 t ||w||
Vector block_solve(const BlockCache& cache, const Vector& b, double t) {
  const Index k = b.size();
  if (t == kInf) return Vector::Zero(k);
  const Vector c = cache.basis.transpose() * b;
  const Vector& lam = cache.eig;
  const double cutoff = 1e-12 * std::max(1.0, lam.maxCoeff());
  if (t == 0.0) {
    Vector z(k);
    for (Index i = 0; i < k; ++i) z[i] = lam[i] > cutoff ? c[i] / lam[i] : 0.0;
    return cache.basis * z;
  }
  const double cn = c.norm();
  if (cn <= t) return Vector::Zero(k);

  // Stationarity gives w = (A + mu I)^{-1} b with mu ||w|| = t; phi is
  // increasing in mu and brackets its root between lo and hi.
  auto phi = [&](double mu, double* dphi) {
    double sq = 0.0;
    double d = 0.0;
    for (Index i = 0; i < k; ++i) {
      const double den = lam[i] + mu;
      const double u = mu * c[i] / den;
      sq += u * u;
      d += u * c[i] * lam[i] / (den * den);
    }
    const double norm = std::sqrt(sq);
    if (dphi) *dphi = norm > 0.0 ? d / norm : 0.0;
    return norm - t;
  };
  double lo = t * lam.minCoeff() / (cn - t);
  double hi = t * lam.maxCoeff() / (cn - t);
  double mu = 0.5 * (lo + hi);
  if (hi - lo > 1e-15 * hi) {
    for (int it = 0; it < 200; ++it) {
      double d = 0.0;
      const double val = phi(mu, &d);
      if (val > 0.0) {
        hi = mu;
      } else {
        lo = mu;
      }
      double next = (d > 0.0) ? mu - val / d : 0.5 * (lo + hi);
      if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
      if (std::abs(next - mu) <= 1e-15 * std::max(1e-300, mu) || hi - lo <= 1e-15 * hi) {
        mu = next;
        break;
      }
      mu = next;
    }
  }
  Vector z(k);
  for (Index i = 0; i < k; ++i) z[i] = c[i] / (lam[i] + mu);
  return cache.basis * z;
}

std::vector<double> resolve_weights(const GroupCollection& groups, const std::optional<std::vector<double>>& weights) {
  if (!weights) return std::vector<double>(static_cast<std::size_t>(groups.size()), 1.0);
  require(static_cast<Index>(weights->size()) == groups.size(),
          "solver: expected " + std::to_string(groups.size()) + " weights, got " + std::to_string(weights->size()));
  for (double w : *weights) require(w >= 0.0 && !std::isnan(w), "solver: weights must be nonnegative");
  return *weights;
}

}  // namespace

Vector DuplicatedDesign::collapse(const Vector& latent, Index p) const {
  Vector beta = Vector::Zero(p);
  for (Index d = 0; d < latent.size(); ++d) beta[source[static_cast<std::size_t>(d)]] += latent[d];
  return beta;
}

Decomposition DuplicatedDesign::decomposition(const Vector& latent, Index p) const {
  Decomposition dec;
  dec.parts.assign(block_start.size(), Vector::Zero(p));
  for (std::size_t g = 0; g < block_start.size(); ++g) {
    for (Index k = 0; k < block_size[g]; ++k) {
      const Index d = block_start[g] + k;
      dec.parts[g][source[static_cast<std::size_t>(d)]] = latent[d];
    }
  }
  return dec;
}

DuplicatedDesign duplicate_design(const Matrix& X, const GroupCollection& groups) {
  require(X.cols() == groups.p(), "duplicate_design: groups cover " + std::to_string(groups.p()) +
                                      " predictors but X has " + std::to_string(X.cols()) + " columns");
  DuplicatedDesign dd;
  dd.X_tilde.resize(X.rows(), groups.total_size());
  Index col = 0;
  for (Index g = 0; g < groups.size(); ++g) {
    dd.block_start.push_back(col);
    dd.block_size.push_back(static_cast<Index>(groups[g].size()));
    for (Index i : groups[g]) {
      dd.X_tilde.col(col) = X.col(i);
      dd.source.push_back(i);
      ++col;
    }
  }
  return dd;
}

DuplicatedDesign duplicate_design(const ProblemInstance& instance, const GroupCollection& groups) {
  return duplicate_design(instance.X, groups);
}

double objective(const ProblemInstance& instance, const Decomposition& decomposition, double lambda,
                 const std::optional<std::vector<double>>& weights) {
  const Vector beta = decomposition.sum(instance.p());
  const double loss = (instance.y - instance.X * beta).squaredNorm() / static_cast<double>(instance.n());
  double pen = 0.0;
  for (std::size_t g = 0; g < decomposition.parts.size(); ++g) {
    const double w = weights ? (*weights)[g] : 1.0;
    const double norm = decomposition.parts[g].norm();
    if (norm == 0.0) continue;
    pen += (w == kInf ? kInf : w * norm);
  }
  return loss + 2.0 * lambda * pen;
}

double penalized_objective(const ProblemInstance& instance, const GroupCollection& groups, const Vector& beta,
                           double lambda) {
  const double loss = (instance.y - instance.X * beta).squaredNorm() / static_cast<double>(instance.n());
  return loss + 2.0 * lambda * overlap_norm(beta, groups).value;
}

FitResult fit(const ProblemInstance& instance, const GroupCollection& groups, const SolverConfig& config,
              FitDiagnostics* diagnostics) {
  instance.validate();
  require(config.lambda >= 0.0 && std::isfinite(config.lambda), "fit: lambda must be finite and nonnegative");
  require(config.tolerance > 0.0, "fit: tolerance must be positive");
  require(config.max_iters >= 1, "fit: max_iters must be at least 1");
  const std::vector<double> weights = resolve_weights(groups, config.weights);

  const DuplicatedDesign dd = duplicate_design(instance, groups);
  const Index m = groups.size();
  const double n = static_cast<double>(instance.n());

  std::vector<BlockCache> cache;
  cache.reserve(static_cast<std::size_t>(m));
  for (Index g = 0; g < m; ++g)
    cache.push_back(make_cache(dd.X_tilde.middleCols(dd.block_start[static_cast<std::size_t>(g)],
                                                     dd.block_size[static_cast<std::size_t>(g)]),
                               n));

  Vector w = Vector::Zero(dd.columns());
  if (config.warm_start) {
    require(config.warm_start->size() == dd.columns(), "fit: warm start has the wrong length");
    w = *config.warm_start;
  }
  auto penalty_of = [&](Index g) { return config.lambda * weights[static_cast<std::size_t>(g)]; };
  auto frozen = [&](Index g) { return weights[static_cast<std::size_t>(g)] == kInf; };
  for (Index g = 0; g < m; ++g)
    if (frozen(g)) w.segment(dd.block_start[static_cast<std::size_t>(g)], dd.block_size[static_cast<std::size_t>(g)]).setZero();

  Vector r = instance.y - dd.X_tilde * w;

  auto block = [&](Index g) {
    return std::pair{dd.block_start[static_cast<std::size_t>(g)], dd.block_size[static_cast<std::size_t>(g)]};
  };
  auto current_objective = [&]() {
    double pen = 0.0;
    for (Index g = 0; g < m; ++g) {
      if (frozen(g)) continue;
      const auto [s, k] = block(g);
      pen += weights[static_cast<std::size_t>(g)] * w.segment(s, k).norm();
    }
    return r.squaredNorm() / n + 2.0 * config.lambda * pen;
  };
  auto block_kkt = [&](Index g) {
    if (frozen(g)) return 0.0;
    const auto [s, k] = block(g);
    const Vector grad = dd.X_tilde.middleCols(s, k).transpose() * r / n;
    const double t = penalty_of(g);
    const double wn = w.segment(s, k).norm();
    if (wn > 0.0) return (grad - t * w.segment(s, k) / wn).norm();
    return std::max(0.0, grad.norm() - t);
  };
  auto update = [&](Index g) {
    if (frozen(g)) return;
    const auto [s, k] = block(g);
    const auto Xg = dd.X_tilde.middleCols(s, k);
    const Vector wg = w.segment(s, k);
    const Vector b = Xg.transpose() * r / n + cache[static_cast<std::size_t>(g)].basis *
                                                  (cache[static_cast<std::size_t>(g)].eig.asDiagonal() *
                                                   (cache[static_cast<std::size_t>(g)].basis.transpose() * wg));
    const Vector next = block_solve(cache[static_cast<std::size_t>(g)], b, penalty_of(g));
    const Vector delta = next - wg;
    if (delta.squaredNorm() > 0.0) {
      r.noalias() -= Xg * delta;
      w.segment(s, k) = next;
    }
  };

  std::vector<double> trace;
  if (config.trace) trace.push_back(current_objective());

  FitResult res;
  int sweeps = 0;
  double kkt = kInf;
  bool converged = false;
  while (sweeps < config.max_iters) {
    for (Index g = 0; g < m; ++g) update(g);
    ++sweeps;
    if (config.trace) trace.push_back(current_objective());
    kkt = 0.0;
    for (Index g = 0; g < m; ++g) kkt = std::max(kkt, block_kkt(g));
    if (kkt <= config.tolerance) {
      converged = true;
      break;
    }
    // Inner passes over the currently nonzero blocks only.
    std::vector<Index> active;
    for (Index g = 0; g < m; ++g) {
      const auto [s, k] = block(g);
      if (!frozen(g) && w.segment(s, k).squaredNorm() > 0.0) active.push_back(g);
    }
    if (active.empty() || active.size() == static_cast<std::size_t>(m)) continue;
    while (sweeps < config.max_iters) {
      for (Index g : active) update(g);
      ++sweeps;
      if (config.trace) trace.push_back(current_objective());
      double inner = 0.0;
      for (Index g : active) inner = std::max(inner, block_kkt(g));
      if (inner <= 0.5 * config.tolerance) break;
    }
  }
  // Residual drift from incremental updates is removed before reporting.
  r = instance.y - dd.X_tilde * w;
  kkt = 0.0;
  for (Index g = 0; g < m; ++g) kkt = std::max(kkt, block_kkt(g));

  res.beta_hat = dd.collapse(w, instance.p());
  res.decomposition = dd.decomposition(w, instance.p());
  res.lambda = config.lambda;
  res.weights = config.weights;
  res.iterations = sweeps;
  res.objective = current_objective();
  res.kkt_residual = kkt;
  res.converged = converged && kkt <= config.tolerance * 10.0;
  if (diagnostics) {
    diagnostics->latent = w;
    diagnostics->objective_trace = std::move(trace);
  }
  return res;
}

KktReport kkt_check(const ProblemInstance& instance, const GroupCollection& groups, const FitResult& fit) {
  const std::vector<double> weights = resolve_weights(groups, fit.weights);
  require(fit.beta_hat.size() == instance.p(), "kkt_check: fit does not match the instance");
  require(fit.decomposition.groups() == groups.size(), "kkt_check: fit does not match the groups");
  const double n = static_cast<double>(instance.n());
  const Vector r = instance.y - instance.X * fit.beta_hat;
  KktReport rep;
  rep.residual.assign(static_cast<std::size_t>(groups.size()), 0.0);
  for (Index g = 0; g < groups.size(); ++g) {
    const double wgt = weights[static_cast<std::size_t>(g)];
    if (wgt == kInf) continue;
    const auto& idx = groups[g];
    Vector grad(static_cast<Index>(idx.size()));
    for (std::size_t k = 0; k < idx.size(); ++k) grad[static_cast<Index>(k)] = instance.X.col(idx[k]).dot(r) / n;
    const Vector vg = groups.restrict(fit.decomposition.parts[static_cast<std::size_t>(g)], g);
    const double t = fit.lambda * wgt;
    const double vn = vg.norm();
    const double res = vn > 0.0 ? (grad - t * vg / vn).norm() : std::max(0.0, grad.norm() - t);
    rep.residual[static_cast<std::size_t>(g)] = res;
    rep.max_residual = std::max(rep.max_residual, res);
  }
  return rep;
}

double lambda_max(const ProblemInstance& instance, const GroupCollection& groups,
                  const std::optional<std::vector<double>>& weights) {
  const std::vector<double> w = resolve_weights(groups, weights);
  const double n = static_cast<double>(instance.n());
  const Vector score = instance.X.transpose() * instance.y / n;
  double best = 0.0;
  for (Index g = 0; g < groups.size(); ++g) {
    const double wg = w[static_cast<std::size_t>(g)];
    if (wg == kInf) continue;
    const double s = groups.restrict(score, g).norm();
    if (wg == 0.0) {
      if (s > 0.0) return kInf;
      continue;
    }
    best = std::max(best, s / wg);
  }
  return best;
}

std::vector<FitResult> fit_path(const ProblemInstance& instance, const GroupCollection& groups,
                                const std::vector<double>& lambdas, const SolverConfig& config) {
  require(!lambdas.empty(), "fit_path: lambda grid is empty");
  for (std::size_t k = 0; k < lambdas.size(); ++k) {
    require(lambdas[k] >= 0.0 && std::isfinite(lambdas[k]), "fit_path: lambdas must be finite and nonnegative");
    if (k > 0) require(lambdas[k] < lambdas[k - 1], "fit_path: lambdas must be strictly descending");
  }
  std::vector<FitResult> out;
  out.reserve(lambdas.size());
  SolverConfig cfg = config;
  FitDiagnostics diag;
  for (double lam : lambdas) {
    cfg.lambda = lam;
    out.push_back(fit(instance, groups, cfg, &diag));
    cfg.warm_start = diag.latent;
  }
  return out;
}

std::vector<double> lambda_grid(double lambda_max, int count, double ratio) {
  require(count >= 1, "lambda_grid: count must be at least 1");
  require(lambda_max > 0.0 && std::isfinite(lambda_max), "lambda_grid: lambda_max must be positive and finite");
  require(ratio > 0.0 && ratio < 1.0, "lambda_grid: ratio must lie in (0, 1)");
  std::vector<double> grid(static_cast<std::size_t>(count));
  if (count == 1) {
    grid[0] = lambda_max;
    return grid;
  }
  const double step = std::log(ratio) / static_cast<double>(count - 1);
  for (int k = 0; k < count; ++k) grid[static_cast<std::size_t>(k)] = lambda_max * std::exp(step * k);
  return grid;
}

AdaptiveWeights adaptive_weights(const ProblemInstance& instance, const GroupCollection& groups, double gamma) {
  require(gamma > 0.0 && std::isfinite(gamma), "adaptive_weights: gamma must be positive");
  AdaptiveWeights aw;
  aw.beta_ols = ols_fit(instance);
  const NormResult nr = overlap_norm(aw.beta_ols, groups);
  aw.ols_decomposition = nr.decomposition;
  const double thr = active_threshold(aw.beta_ols);
  aw.weights.reserve(static_cast<std::size_t>(groups.size()));
  for (const auto& v : nr.decomposition.parts) {
    const double norm = v.norm();
    aw.weights.push_back(norm > thr ? 1.0 / std::pow(norm, gamma) : kInf);
  }
  return aw;
}

}  // namespace ogl
