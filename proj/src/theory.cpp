#include "ogl/theory.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "ogl/overlap_norm.hpp"
#include "ogl/parallel.hpp"
#include "ogl/solver.hpp"

namespace ogl {

namespace {

double smallest_eigenvalue(const Matrix& gram) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(gram, Eigen::EigenvaluesOnly);
  return es.eigenvalues()[0];
}

double largest_eigenvalue(const Matrix& gram) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(gram, Eigen::EigenvaluesOnly);
  return es.eigenvalues()[gram.rows() - 1];
}

Matrix group_columns(const Matrix& X, const IndexSet& g) {
  Matrix out(X.rows(), static_cast<Index>(g.size()));
  for (std::size_t k = 0; k < g.size(); ++k) out.col(static_cast<Index>(k)) = X.col(g[k]);
  return out;
}

double bound_core(const TheoryConstants& c) {
  const double m = static_cast<double>(c.max_group);
  return m + c.A * std::sqrt(m) * std::log(static_cast<double>(c.M));
}

struct Score {
  bool feasible = false;
  double ratio = std::numeric_limits<double>::infinity();
  IndexSet J;
};

// Ratio of a direction under its own norm-minimizing decomposition, with J
// taken as the s largest parts (the choice that minimizes the ratio).
Score score_direction(const Matrix& X, const GroupCollection& groups, Index s, const Vector& delta) {
  Score out;
  if (delta.isZero(0.0)) return out;
  const auto norm = overlap_norm(delta, groups);
  const auto parts = norm.decomposition.part_norms();
  std::vector<Index> order(parts.size());
  std::iota(order.begin(), order.end(), Index{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](Index a, Index b) { return parts[static_cast<std::size_t>(a)] > parts[static_cast<std::size_t>(b)]; });
  double inside = 0.0;
  double outside = 0.0;
  for (std::size_t k = 0; k < order.size(); ++k) {
    const double v = parts[static_cast<std::size_t>(order[k])];
    if (static_cast<Index>(k) < s) {
      inside += v;
      out.J.push_back(order[k]);
    } else {
      outside += v;
    }
  }
  std::sort(out.J.begin(), out.J.end());
  if (inside <= 0.0 || outside > 3.0 * inside * (1.0 + 1e-12)) return out;
  out.feasible = true;
  out.ratio = (X * delta).norm() / (std::sqrt(static_cast<double>(X.rows())) * inside);
  return out;
}

Vector sample_cone_direction(const GroupCollection& groups, Index s, Rng& rng) {
  const Index M = groups.size();
  std::vector<Index> ids(static_cast<std::size_t>(M));
  std::iota(ids.begin(), ids.end(), Index{0});
  std::shuffle(ids.begin(), ids.end(), rng);
  const Index p = groups.p();
  Vector inside = Vector::Zero(p);
  Vector outside = Vector::Zero(p);
  double inside_sum = 0.0;
  double outside_sum = 0.0;
  for (Index k = 0; k < M; ++k) {
    const IndexSet& g = groups[ids[static_cast<std::size_t>(k)]];
    const Vector z = standard_normal(static_cast<Index>(g.size()), rng);
    Vector& target = k < s ? inside : outside;
    for (std::size_t j = 0; j < g.size(); ++j) target[g[j]] += z[static_cast<Index>(j)];
    (k < s ? inside_sum : outside_sum) += z.norm();
  }
  const double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
  if (outside_sum > 0.0) outside *= u * 3.0 * inside_sum / outside_sum;
  return inside + outside;
}

}  // namespace

TheoryConstants compute_constants(const ProblemInstance& instance, const GroupCollection& groups, double A,
                                  double sigma, Index s) {
  require(A > 8.0, "theory: A must exceed 8");
  require(sigma > 0.0, "theory: sigma must be positive");
  require(instance.p() == groups.p(), "theory: design and groups disagree on p");
  require(s >= 1 && s <= groups.size(), "theory: s must lie in [1, number of groups]");
  const double n = static_cast<double>(instance.n());
  for (Index j = 0; j < instance.p(); ++j) {
    const double d = instance.X.col(j).squaredNorm() / n;
    require(std::abs(d - 1.0) <= 1e-6, "theory: design columns must satisfy diag(X^T X / n) = 1");
  }

  TheoryConstants c;
  c.A = A;
  c.sigma = sigma;
  c.n = instance.n();
  c.M = groups.size();
  c.overlap = groups.overlap_degree();
  c.max_group = groups.max_group_size();
  c.min_group = groups.min_group_size();
  c.s = s;

  double min_inv_rho2 = std::numeric_limits<double>::infinity();
  for (Index g = 0; g < groups.size(); ++g) {
    const Matrix Xg = group_columns(instance.X, groups[g]);
    const double rho = std::sqrt(std::max(0.0, largest_eigenvalue(Xg.transpose() * Xg / n)));
    c.rho_g.push_back(rho);
    min_inv_rho2 = std::min(min_inv_rho2, 1.0 / (rho * rho));
  }
  c.rho_X = smallest_eigenvalue(instance.X.transpose() * instance.X / n);

  const double m = static_cast<double>(c.max_group);
  const double G = static_cast<double>(c.overlap);
  const double logM = std::log(static_cast<double>(c.M));
  const double sqrt_n = std::sqrt(n);
  c.lambda_theorem = 2.0 * sigma * std::sqrt(m * G) / sqrt_n * std::sqrt(1.0 + A * logM / std::sqrt(m));
  c.lambda_oracle = 2.0 * sigma * std::sqrt(m) / sqrt_n * std::sqrt(1.0 + A * logM / std::sqrt(m));
  c.lambda_alt = 2.0 * sigma * std::sqrt(G) / sqrt_n * std::sqrt(m + A * logM);
  c.q_oracle = std::min(A * std::sqrt(static_cast<double>(c.min_group)) / 8.0, 8.0 * logM);
  c.q = min_inv_rho2 * c.q_oracle;
  c.q_alt = min_inv_rho2 * std::min(A / 8.0, 8.0 * logM / m);
  c.kappa_upper = std::sqrt(std::max(0.0, c.rho_X) / (static_cast<double>(c.M) * G));
  return c;
}

ProblemInstance theorem_instance(const GroupCollection& groups, Index n, Index k, double sigma, std::uint64_t seed) {
  require(n >= 1, "theorem_instance: n must be positive");
  require(k >= 0 && k <= groups.size(), "theorem_instance: k must lie in [0, number of groups]");
  require(sigma >= 0.0, "theorem_instance: sigma must be nonnegative");
  Rng rng = make_rng(seed);
  const Index p = groups.p();
  Matrix X(n, p);
  for (Index i = 0; i < n; ++i) X.row(i) = standard_normal(p, rng).transpose();
  ProblemInstance inst;
  inst.X = normalize_columns(X);
  Vector beta0 = Vector::Zero(p);
  for (Index i : leading_support(groups, k)) beta0[i] = standard_normal(1, rng)[0];
  inst.y = draw_response(inst.X, beta0, sigma, rng);
  inst.beta0 = beta0;
  inst.sigma = sigma;
  inst.normalization = Normalization::ColumnUnitDiag;
  return inst;
}

double nominal_rate(Index M, double q) { return 1.0 - std::pow(static_cast<double>(M), 1.0 - q); }

double prediction_bound(const TheoryConstants& c, double kappa) {
  require(kappa > 0.0, "theory: kappa must be positive");
  return 64.0 * c.sigma * c.sigma / (kappa * kappa * static_cast<double>(c.n)) * bound_core(c);
}

double estimation_bound(const TheoryConstants& c, double kappa) {
  require(kappa > 0.0, "theory: kappa must be positive");
  return 32.0 * c.sigma / (kappa * std::sqrt(static_cast<double>(c.n))) * std::sqrt(bound_core(c));
}

KappaEstimate estimate_kappa(const ProblemInstance& instance, const GroupCollection& groups, Index s,
                             const KappaOptions& options) {
  require(instance.p() == groups.p(), "estimate_kappa: design and groups disagree on p");
  require(s >= 1 && s <= groups.size(), "estimate_kappa: s must lie in [1, number of groups]");
  require(options.samples >= 1, "estimate_kappa: need at least one sample");
  const Matrix& X = instance.X;

  std::vector<Score> scores(static_cast<std::size_t>(options.samples));
  std::vector<Vector> directions(scores.size());
  parallel_for(scores.size(), options.jobs, [&](std::size_t k) {
    Rng rng = make_rng(options.seed, 0, k);
    directions[k] = sample_cone_direction(groups, s, rng);
    scores[k] = score_direction(X, groups, s, directions[k]);
  });

  KappaEstimate out;
  std::size_t best = scores.size();
  for (std::size_t k = 0; k < scores.size(); ++k) {
    if (!scores[k].feasible) continue;
    ++out.feasible_samples;
    if (best == scores.size() || scores[k].ratio < scores[best].ratio) best = k;
  }
  if (best == scores.size()) throw NumericalError("estimate_kappa: no cone-feasible direction was sampled");

  Vector delta = directions[best];
  Score current = scores[best];
  Rng rng = make_rng(options.seed, 1);
  const double sqrt_p = std::sqrt(static_cast<double>(groups.p()));
  double step = 0.3;
  int failures = 0;
  for (int it = 0; it < options.refine_steps && step > 1e-7; ++it) {
    const Vector trial = delta + step * delta.norm() / sqrt_p * standard_normal(groups.p(), rng);
    const Score sc = score_direction(X, groups, s, trial);
    if (sc.feasible && sc.ratio < current.ratio) {
      delta = trial / trial.norm();
      current = sc;
      failures = 0;
    } else if (++failures >= 40) {
      step *= 0.7;
      failures = 0;
    }
  }

  const double rho_X = smallest_eigenvalue(X.transpose() * X / static_cast<double>(instance.n()));
  out.kappa_upper = std::sqrt(std::max(0.0, rho_X) / static_cast<double>(groups.size() * groups.overlap_degree()));
  out.kappa_hat = current.ratio;
  out.witness = delta;
  out.witness_groups = current.J;
  out.below_upper = out.kappa_hat <= out.kappa_upper + 1e-8;
  return out;
}

namespace {

struct TrialSetup {
  TheoryConstants constants;
  Vector beta0;
  double sigma = 0.0;
  Index s = 0;
};

TrialSetup prepare(const ProblemInstance& instance, const GroupCollection& groups, const Theorem1Options& options) {
  require(instance.beta0.has_value(), "verify: instance needs a known beta0");
  require(instance.sigma.has_value() && *instance.sigma > 0.0, "verify: instance needs a positive sigma");
  require(options.trials >= 1, "verify: need at least one trial");
  TrialSetup t;
  t.beta0 = *instance.beta0;
  t.sigma = *instance.sigma;
  if (options.s) {
    t.s = *options.s;
  } else {
    t.s = std::max<Index>(1, structured_sparsity(t.beta0, groups).minimal);
  }
  t.constants = compute_constants(instance, groups, options.A, t.sigma, t.s);
  return t;
}

// Fits one fresh-noise replicate; returns nullopt on non-convergence.
std::optional<Vector> replicate(const ProblemInstance& instance, const GroupCollection& groups, const TrialSetup& t,
                                double lambda, const Theorem1Options& options, std::uint64_t stream, std::size_t k) {
  Rng rng = make_rng(options.seed, stream, k);
  ProblemInstance trial;
  trial.X = instance.X;
  trial.y = draw_response(instance.X, t.beta0, t.sigma, rng);
  SolverConfig cfg;
  cfg.lambda = lambda;
  cfg.tolerance = options.tolerance;
  const FitResult r = fit(trial, groups, cfg);
  if (!r.converged) return std::nullopt;
  return r.beta_hat;
}

}  // namespace

BoundReport verify_theorem1(const ProblemInstance& instance, const GroupCollection& groups,
                            const Theorem1Options& options) {
  const TrialSetup t = prepare(instance, groups, options);
  const TheoryConstants& c = t.constants;

  BoundReport rep;
  rep.choice = options.choice;
  rep.s = t.s;
  rep.lambda = options.choice == LambdaChoice::Theorem ? c.lambda_theorem : c.lambda_alt;
  rep.q = options.choice == LambdaChoice::Theorem ? c.q : c.q_alt;
  rep.nominal_rate = nominal_rate(c.M, rep.q);
  if (options.kappa) {
    require(*options.kappa > 0.0, "verify: kappa must be positive");
    rep.kappa = *options.kappa;
  } else {
    KappaOptions ko = options.kappa_options;
    ko.jobs = options.jobs;
    rep.kappa = estimate_kappa(instance, groups, t.s, ko).kappa_hat;
  }
  rep.prediction_rhs = prediction_bound(c, rep.kappa);
  rep.estimation_rhs = estimation_bound(c, rep.kappa);
  rep.trials = options.trials;

  rep.records.resize(static_cast<std::size_t>(options.trials));
  parallel_for(rep.records.size(), options.jobs, [&](std::size_t k) {
    BoundTrial& rec = rep.records[k];
    const auto beta_hat = replicate(instance, groups, t, rep.lambda, options, 2, k);
    if (!beta_hat) return;
    rec.converged = true;
    const Vector delta = *beta_hat - t.beta0;
    rec.prediction_lhs = (instance.X * delta).squaredNorm() / static_cast<double>(instance.n());
    rec.estimation_lhs = overlap_norm(delta, groups).value;
    rec.prediction_holds = rec.prediction_lhs <= rep.prediction_rhs + 1e-12;
    rec.estimation_holds = rec.estimation_lhs <= rep.estimation_rhs + 1e-12;
  });

  Index used = 0;
  Index pred = 0;
  Index est = 0;
  Index both = 0;
  for (const auto& rec : rep.records) {
    if (!rec.converged) {
      ++rep.excluded;
      continue;
    }
    ++used;
    pred += rec.prediction_holds;
    est += rec.estimation_holds;
    both += rec.prediction_holds && rec.estimation_holds;
  }
  if (used > 0) {
    rep.prediction_hold_rate = static_cast<double>(pred) / static_cast<double>(used);
    rep.estimation_hold_rate = static_cast<double>(est) / static_cast<double>(used);
    rep.empirical_hold_rate = static_cast<double>(both) / static_cast<double>(used);
  }
  rep.valid = static_cast<double>(rep.excluded) <= 0.05 * static_cast<double>(rep.trials);
  return rep;
}

OracleReport verify_oracle_inequality(const ProblemInstance& instance, const GroupCollection& groups,
                                      const Theorem1Options& options) {
  const TrialSetup t = prepare(instance, groups, options);
  const TheoryConstants& c = t.constants;

  OracleReport rep;
  rep.lambda = c.lambda_oracle;
  rep.q = c.q_oracle;
  rep.nominal_rate = nominal_rate(c.M, rep.q);
  rep.trials = options.trials;
  const auto b0 = overlap_norm(t.beta0, groups);
  rep.support_groups = b0.decomposition.active_set(active_threshold(t.beta0));
  const double m = static_cast<double>(c.max_group);
  rep.budget_lhs = std::sqrt(m) * std::log(static_cast<double>(c.M)) + m;
  rep.budget_rhs = std::log(static_cast<double>(groups.p()));
  rep.predictive_advantage = rep.budget_lhs < rep.budget_rhs;

  rep.records.resize(static_cast<std::size_t>(options.trials));
  parallel_for(rep.records.size(), options.jobs, [&](std::size_t k) {
    OracleTrial& rec = rep.records[k];
    const auto beta_hat = replicate(instance, groups, t, rep.lambda, options, 3, k);
    if (!beta_hat) return;
    rec.converged = true;
    const Vector delta = *beta_hat - t.beta0;
    const auto dn = overlap_norm(delta, groups);
    double on_support = 0.0;
    const auto parts = dn.decomposition.part_norms();
    for (Index g : rep.support_groups) on_support += parts[static_cast<std::size_t>(g)];
    rec.lhs = (instance.X * delta).squaredNorm() / static_cast<double>(instance.n()) + rep.lambda * dn.value;
    rec.rhs = 4.0 * rep.lambda * on_support;
    rec.holds = rec.lhs <= rec.rhs + 1e-12;
  });

  Index used = 0;
  Index held = 0;
  for (const auto& rec : rep.records) {
    if (!rec.converged) {
      ++rep.excluded;
      continue;
    }
    ++used;
    held += rec.holds;
  }
  if (used > 0) rep.hold_rate = static_cast<double>(held) / static_cast<double>(used);
  rep.valid = static_cast<double>(rep.excluded) <= 0.05 * static_cast<double>(rep.trials);
  return rep;
}

double chi2_tail_bound(Index D, double x) {
  require(D >= 1, "chi2_tail_bound: D must be at least 1");
  require(x > 0.0, "chi2_tail_bound: x must be positive");
  return std::exp(-std::min(x, x * x / static_cast<double>(D)) / 8.0);
}

double chi2_tail_frequency(Index D, double x, Index samples, std::uint64_t seed) {
  require(D >= 1 && samples >= 1, "chi2_tail_frequency: D and samples must be positive");
  Rng rng = make_rng(seed, static_cast<std::uint64_t>(D));
  std::chi_squared_distribution<double> chi2(static_cast<double>(D));
  const double threshold = static_cast<double>(D) + x;
  Index hits = 0;
  for (Index k = 0; k < samples; ++k) hits += chi2(rng) > threshold;
  return static_cast<double>(hits) / static_cast<double>(samples);
}

HolderCheck holder_extension_check(const Vector& alpha, const Vector& beta, const GroupCollection& groups) {
  require(alpha.size() == groups.p() && beta.size() == groups.p(), "holder check: vectors must have length p");
  HolderCheck h;
  h.lhs = alpha.dot(beta);
  double max_part = 0.0;
  for (Index g = 0; g < groups.size(); ++g) max_part = std::max(max_part, groups.restrict(alpha, g).norm());
  h.rhs = std::sqrt(static_cast<double>(groups.overlap_degree())) * max_part * overlap_norm(beta, groups).value;
  h.holds = h.lhs <= h.rhs + 1e-8;
  return h;
}

}  // namespace ogl
