#include "ogl/asymptotics.hpp"

#include <Eigen/Cholesky>
#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include "ogl/overlap_norm.hpp"
#include "ogl/parallel.hpp"
#include "ogl/solver.hpp"

namespace ogl {

SupportPartition partition_support(const Vector& beta0, const GroupCollection& groups, double zero_tol) {
  require(beta0.size() == groups.p(), "partition_support: beta0 must have length p");
  require(zero_tol >= 0.0, "partition_support: zero_tol must be nonnegative");
  SupportPartition sp;
  std::vector<bool> in_h(static_cast<std::size_t>(groups.p()), false);
  for (Index i = 0; i < groups.p(); ++i) {
    in_h[static_cast<std::size_t>(i)] = std::abs(beta0[i]) > zero_tol;
    (in_h[static_cast<std::size_t>(i)] ? sp.H : sp.H_c).push_back(i);
  }
  for (Index g = 0; g < groups.size(); ++g) {
    Index inside = 0;
    for (Index i : groups[g]) inside += in_h[static_cast<std::size_t>(i)];
    if (inside == static_cast<Index>(groups[g].size())) {
      sp.G_H.push_back(g);
    } else if (inside == 0) {
      sp.G_Hc.push_back(g);
    } else {
      sp.G_Ho.push_back(g);
    }
  }
  return sp;
}

bool separation_of_support_holds(const Vector& beta0, const GroupCollection& groups, double zero_tol) {
  // Groups cover {1..p}, so with no straddling group G_H covers H exactly.
  return partition_support(beta0, groups, zero_tol).G_Ho.empty();
}

std::string to_string(Violation v) {
  switch (v) {
    case Violation::MassSplit:
      return "mass-split";
    case Violation::PerturbedMassSplit:
      return "perturbed-mass-split";
    case Violation::StraddlingMass:
      return "straddling-mass";
    case Violation::UnionAmbiguity:
      return "union-ambiguity";
  }
  return "unknown";
}

namespace {

struct Probe {
  bool split = false;
  std::vector<Decomposition> minimizers;
  std::string detail;
};

// Solves the norm from the default start and `starts` random ones, then
// compares part norms pairwise.
Probe probe_uniqueness(const Vector& b, const GroupCollection& groups, int starts, double tolerance, Rng& rng) {
  Probe out;
  NormOptions base;
  base.tolerance = 1e-10;
  out.minimizers.push_back(overlap_norm(b, groups, base).decomposition);
  const double scale = std::max(b.norm(), 1e-12);
  std::uniform_real_distribution<double> u(0.01, 2.0);
  for (int k = 0; k < starts; ++k) {
    NormOptions opts = base;
    std::vector<double> eta(static_cast<std::size_t>(groups.size()));
    for (auto& e : eta) e = u(rng) * scale;
    opts.start = eta;
    out.minimizers.push_back(overlap_norm(b, groups, opts).decomposition);
  }
  const double allowed = tolerance * (1.0 + b.norm());
  const auto ref = out.minimizers.front().part_norms();
  for (std::size_t k = 1; k < out.minimizers.size() && !out.split; ++k) {
    const auto other = out.minimizers[k].part_norms();
    for (std::size_t g = 0; g < ref.size(); ++g) {
      if (std::abs(ref[g] - other[g]) > allowed) {
        out.split = true;
        std::ostringstream msg;
        msg << "group " << g + 1 << " part norm " << ref[g] << " vs " << other[g] << " across restarts";
        out.detail = msg.str();
        break;
      }
    }
  }
  return out;
}

}  // namespace

AssumptionVerdict check_assumption_correct(const Vector& beta0, const GroupCollection& groups,
                                           const AssumptionOptions& options) {
  require(beta0.size() == groups.p(), "check_assumption_correct: beta0 must have length p");
  require(options.radius > 0.0, "check_assumption_correct: radius must be positive");
  AssumptionVerdict verdict;
  auto flag = [&](Violation v, std::string detail) {
    if (std::find(verdict.reasons.begin(), verdict.reasons.end(), v) != verdict.reasons.end()) return;
    verdict.violated = true;
    verdict.reasons.push_back(v);
    verdict.details.push_back(to_string(v) + ": " + detail);
  };

  const SupportPartition sp = partition_support(beta0, groups, options.zero_tol);
  Rng rng = make_rng(options.seed);

  const Probe at_beta = probe_uniqueness(beta0, groups, options.starts, options.tolerance, rng);
  if (at_beta.split) flag(Violation::MassSplit, at_beta.detail);

  const double allowed = options.tolerance * (1.0 + beta0.norm());
  for (const auto& d : at_beta.minimizers) {
    const auto norms = d.part_norms();
    for (Index g : sp.G_Ho) {
      if (norms[static_cast<std::size_t>(g)] > allowed) {
        std::ostringstream msg;
        msg << "straddling group " << g + 1 << " carries part norm " << norms[static_cast<std::size_t>(g)];
        flag(Violation::StraddlingMass, msg.str());
      }
    }
  }

  const double radius = options.radius * std::max(beta0.norm(), 1.0);
  for (int k = 0; k < options.perturbations; ++k) {
    Vector dir = standard_normal(groups.p(), rng);
    const double r = radius * std::uniform_real_distribution<double>(0.0, 1.0)(rng);
    const Vector b = beta0 + r * dir / dir.norm();
    const Probe near = probe_uniqueness(b, groups, options.starts, options.tolerance, rng);
    if (near.split) {
      flag(Violation::PerturbedMassSplit, near.detail);
      break;
    }
  }

  if (!sp.H.empty()) {
    std::vector<int> cover(static_cast<std::size_t>(groups.p()), 0);
    for (Index g : sp.G_H)
      for (Index i : groups[g]) ++cover[static_cast<std::size_t>(i)];
    for (Index i : sp.H) {
      if (cover[static_cast<std::size_t>(i)] == 0) {
        flag(Violation::UnionAmbiguity,
             "predictor " + std::to_string(i + 1) + " of the support lies in no group inside the support");
        break;
      }
    }
    for (Index g : sp.G_H) {
      bool redundant = true;
      for (Index i : groups[g]) redundant = redundant && cover[static_cast<std::size_t>(i)] > 1;
      if (redundant) {
        flag(Violation::UnionAmbiguity, "group " + std::to_string(g + 1) +
                                            " is covered by other groups inside the support, so the support is "
                                            "a union of groups in more than one way");
        break;
      }
    }
  }
  return verdict;
}

double LambdaRule::at(Index n) const { return c * std::pow(static_cast<double>(n), -exponent); }

bool rate_conditions_hold(const LambdaRule& rule, double gamma) {
  return rule.c > 0.0 && gamma > 0.0 && rule.exponent > 0.5 && rule.exponent < (gamma + 1.0) / 2.0;
}

std::string to_string(DesignCovariance d) { return d == DesignCovariance::Identity ? "identity" : "ar1"; }

DesignCovariance design_covariance_from_string(const std::string& s) {
  if (s == "identity") return DesignCovariance::Identity;
  if (s == "ar1") return DesignCovariance::AR1;
  throw ValidationError("unknown design covariance '" + s + "' (expected identity or ar1)");
}

Matrix design_covariance(Index p, DesignCovariance kind, double ar_rho) {
  if (kind == DesignCovariance::Identity) return Matrix::Identity(p, p);
  require(std::abs(ar_rho) < 1.0, "design covariance: AR(1) correlation must lie in (-1, 1)");
  Matrix m(p, p);
  for (Index i = 0; i < p; ++i)
    for (Index j = 0; j < p; ++j) m(i, j) = std::pow(ar_rho, static_cast<double>(std::abs(i - j)));
  return m;
}

double quantile(std::vector<double> values, double q) {
  require(!values.empty(), "quantile: no values");
  require(q >= 0.0 && q <= 1.0, "quantile: q must lie in [0, 1]");
  std::sort(values.begin(), values.end());
  const double pos = q * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (pos - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

AsymptoticReport run_asymptotic_study(const GroupCollection& groups, const Vector& beta0,
                                      const AsymptoticOptions& options) {
  require(beta0.size() == groups.p(), "asymptotic study: beta0 must have length p");
  require(options.sigma > 0.0, "asymptotic study: sigma must be positive");
  require(options.trials >= 2, "asymptotic study: need at least two trials");
  require(!options.n_grid.empty(), "asymptotic study: empty n grid");
  for (Index n : options.n_grid) require(n > groups.p(), "asymptotic study: every n must exceed p");
  if (!rate_conditions_hold(options.rule, options.gamma)) {
    std::ostringstream msg;
    msg << "asymptotic study: lambda = c n^-" << options.rule.exponent << " violates the rate conditions for gamma "
        << options.gamma << " (need 1/2 < exponent < (gamma + 1)/2)";
    throw ValidationError(msg.str());
  }

  const Index p = groups.p();
  AsymptoticReport rep;
  rep.partition = partition_support(beta0, groups);
  const IndexSet& H = rep.partition.H;
  const Index h = static_cast<Index>(H.size());
  const Matrix cov = design_covariance(p, options.design, options.ar_rho);
  const Matrix chol = Eigen::LLT<Matrix>(cov).matrixL();

  Matrix M_H(h, h);
  for (Index a = 0; a < h; ++a)
    for (Index b = 0; b < h; ++b) M_H(a, b) = cov(H[static_cast<std::size_t>(a)], H[static_cast<std::size_t>(b)]);
  const Matrix target = h > 0 ? Matrix(options.sigma * options.sigma * M_H.inverse()) : Matrix(0, 0);

  const std::size_t per_cell = static_cast<std::size_t>(options.trials);
  rep.trials.resize(options.n_grid.size() * per_cell);
  parallel_for(rep.trials.size(), options.jobs, [&](std::size_t idx) {
    const std::size_t cell = idx / per_cell;
    const Index n = options.n_grid[cell];
    AsymptoticTrial& tr = rep.trials[idx];
    tr.n = n;
    tr.trial = static_cast<Index>(idx % per_cell);
    Rng rng = make_rng(options.seed, static_cast<std::uint64_t>(n), static_cast<std::uint64_t>(tr.trial));
    ProblemInstance inst;
    inst.X.resize(n, p);
    for (Index i = 0; i < n; ++i) inst.X.row(i) = (chol * standard_normal(p, rng)).transpose();
    inst.y = draw_response(inst.X, beta0, options.sigma, rng);

    const AdaptiveWeights aw = adaptive_weights(inst, groups, options.gamma);
    for (Index g : rep.partition.G_Ho) {
      const double v = aw.ols_decomposition.parts[static_cast<std::size_t>(g)].norm();
      tr.straddle_statistic = std::max(tr.straddle_statistic, std::pow(std::sqrt(static_cast<double>(n)) * v, options.gamma));
    }

    SolverConfig cfg;
    cfg.lambda = options.rule.at(n);
    cfg.tolerance = options.tolerance;
    cfg.weights = aw.weights;
    const FitResult r = fit(inst, groups, cfg);
    tr.converged = r.converged;
    if (!r.converged) return;

    const double zero_tol = 1e-6 * r.beta_hat.cwiseAbs().maxCoeff() + 1e-12;
    bool match = true;
    for (Index i = 0; i < p; ++i) {
      const bool selected = std::abs(r.beta_hat[i]) > zero_tol;
      const bool truth = std::abs(beta0[i]) > 0.0;
      match = match && selected == truth;
      if (!truth) {
        tr.max_off_support = std::max(tr.max_off_support, std::abs(r.beta_hat[i]));
        tr.false_positive = tr.false_positive || selected;
      }
    }
    tr.support_match = match;
    tr.scaled_error.resize(h);
    for (Index a = 0; a < h; ++a) {
      const Index i = H[static_cast<std::size_t>(a)];
      tr.scaled_error[a] = std::sqrt(static_cast<double>(n)) * (r.beta_hat[i] - beta0[i]);
    }
  });

  for (std::size_t cell = 0; cell < options.n_grid.size(); ++cell) {
    AsymptoticCell c;
    c.n = options.n_grid[cell];
    c.lambda = options.rule.at(c.n);
    c.target_covariance = target;
    std::vector<const AsymptoticTrial*> used;
    std::vector<double> straddle;
    for (std::size_t k = 0; k < per_cell; ++k) {
      const AsymptoticTrial& tr = rep.trials[cell * per_cell + k];
      straddle.push_back(tr.straddle_statistic);
      if (tr.converged) {
        used.push_back(&tr);
      } else {
        ++c.excluded;
      }
    }
    c.straddle_p95 = quantile(straddle, 0.95);
    if (used.size() < 2) throw NumericalError("asymptotic study: fewer than two converged trials at n = " +
                                              std::to_string(c.n));
    const double count = static_cast<double>(used.size());
    std::vector<double> off;
    Vector mean = Vector::Zero(h);
    for (const auto* tr : used) {
      c.recovery_rate += tr->support_match;
      c.false_positive_rate += tr->false_positive;
      off.push_back(tr->max_off_support);
      mean += tr->scaled_error;
    }
    c.recovery_rate /= count;
    c.false_positive_rate /= count;
    mean /= count;
    c.empirical_covariance = Matrix::Zero(h, h);
    for (const auto* tr : used) {
      const Vector d = tr->scaled_error - mean;
      c.empirical_covariance += d * d.transpose();
    }
    c.empirical_covariance /= count - 1.0;
    c.empirical_covariance = 0.5 * (c.empirical_covariance + c.empirical_covariance.transpose()).eval();
    if (h > 0) c.frobenius_relative_error = (c.empirical_covariance - target).norm() / target.norm();
    for (double q : {0.5, 0.9, 0.99, 1.0}) c.max_off_support_quantiles.push_back(quantile(off, q));
    rep.cells.push_back(std::move(c));
  }
  rep.frobenius_non_increasing = true;
  for (std::size_t k = 1; k < rep.cells.size(); ++k)
    rep.frobenius_non_increasing = rep.frobenius_non_increasing &&
                                   rep.cells[k].frobenius_relative_error <=
                                       1.2 * rep.cells[k - 1].frobenius_relative_error;
  return rep;
}

}  // namespace ogl
