#include "ogl/overlap_norm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace ogl {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Variational objective and its derivatives in the group scales eta.
class ScaleProblem {
 public:
  ScaleProblem(const Vector& beta, const GroupCollection& groups, std::vector<bool> fixed)
      : beta_(beta), groups_(groups), fixed_(std::move(fixed)) {
    nonzero_.reserve(static_cast<std::size_t>(beta.size()));
    for (Index i = 0; i < beta.size(); ++i)
      if (beta[i] != 0.0) nonzero_.push_back(i);
  }

  Index groups() const { return groups_.size(); }
  bool fixed(Index g) const { return fixed_[static_cast<std::size_t>(g)]; }

  Vector coverage(const Vector& eta) const {
    Vector s = Vector::Zero(beta_.size());
    for (Index g = 0; g < groups_.size(); ++g) {
      if (eta[g] == 0.0) continue;
      for (Index i : groups_[g]) s[i] += eta[g];
    }
    return s;
  }

  double value(const Vector& eta) const {
    const Vector s = coverage(eta);
    double f = eta.sum();
    for (Index i : nonzero_) {
      if (s[i] <= 0.0) return kInf;
      f += beta_[i] * beta_[i] / s[i];
    }
    return 0.5 * f;
  }

  // alpha_i = beta_i / S_i, zero where beta_i = 0.
  Vector dual_point(const Vector& s) const {
    Vector alpha = Vector::Zero(beta_.size());
    for (Index i : nonzero_) alpha[i] = beta_[i] / s[i];
    return alpha;
  }

  double group_norm_sq(const Vector& alpha, Index g) const {
    double acc = 0.0;
    for (Index i : groups_[g]) acc += alpha[i] * alpha[i];
    return acc;
  }

  Vector gradient(const Vector& alpha) const {
    Vector grad(groups_.size());
    for (Index g = 0; g < groups_.size(); ++g) grad[g] = 0.5 * (1.0 - group_norm_sq(alpha, g));
    return grad;
  }

  Matrix hessian(const Vector& s, const std::vector<Index>& free) const {
    const Index m = static_cast<Index>(free.size());
    Vector w = Vector::Zero(beta_.size());
    for (Index i : nonzero_) w[i] = beta_[i] * beta_[i] / (s[i] * s[i] * s[i]);
    Matrix h = Matrix::Zero(m, m);
    for (Index a = 0; a < m; ++a) {
      const auto& ga = groups_[free[static_cast<std::size_t>(a)]];
      for (Index b = a; b < m; ++b) {
        const auto& gb = groups_[free[static_cast<std::size_t>(b)]];
        double acc = 0.0;
        auto ia = ga.begin();
        auto ib = gb.begin();
        while (ia != ga.end() && ib != gb.end()) {
          if (*ia < *ib) {
            ++ia;
          } else if (*ib < *ia) {
            ++ib;
          } else {
            acc += w[*ia];
            ++ia;
            ++ib;
          }
        }
        h(a, b) = acc;
        h(b, a) = acc;
      }
    }
    return h;
  }

  bool feasible() const {
    for (Index i : nonzero_) {
      bool covered = false;
      for (Index g : groups_.groups_of(i)) covered = covered || !fixed(g);
      if (!covered) return false;
    }
    return true;
  }

 private:
  const Vector& beta_;
  const GroupCollection& groups_;
  std::vector<bool> fixed_;
  std::vector<Index> nonzero_;
};

struct Certificate {
  double primal;
  double dual;
};

Certificate certify(const ScaleProblem& prob, const Vector& eta, const Vector& alpha, const Vector& beta) {
  double primal = 0.0;
  double max_sq = 0.0;
  for (Index g = 0; g < prob.groups(); ++g) {
    if (prob.fixed(g)) continue;
    const double sq = prob.group_norm_sq(alpha, g);
    primal += eta[g] * std::sqrt(sq);
    max_sq = std::max(max_sq, sq);
  }
  const double scale = std::max(1.0, std::sqrt(max_sq));
  return {primal, alpha.dot(beta) / scale};
}

Decomposition assemble(const GroupCollection& groups, const Vector& eta, const Vector& alpha) {
  Decomposition d;
  d.parts.assign(static_cast<std::size_t>(groups.size()), Vector::Zero(groups.p()));
  for (Index g = 0; g < groups.size(); ++g) {
    if (eta[g] == 0.0) continue;
    auto& v = d.parts[static_cast<std::size_t>(g)];
    for (Index i : groups[g]) v[i] = eta[g] * alpha[i];
  }
  return d;
}

}  // namespace

NormResult overlap_norm(const Vector& beta, const GroupCollection& groups, const NormOptions& options) {
  require(beta.size() == groups.p(), "overlap_norm: beta has length " + std::to_string(beta.size()) +
                                         " but the groups cover " + std::to_string(groups.p()) + " predictors");
  require(options.tolerance > 0.0, "overlap_norm: tolerance must be positive");
  require(beta.allFinite(), "overlap_norm: beta must be finite");
  const Index m = groups.size();
  std::vector<bool> fixed = options.frozen;
  if (fixed.empty()) fixed.assign(static_cast<std::size_t>(m), false);
  require(static_cast<Index>(fixed.size()) == m, "overlap_norm: frozen mask has the wrong length");

  NormResult result;
  result.tolerance = options.tolerance;
  result.decomposition.parts.assign(static_cast<std::size_t>(m), Vector::Zero(groups.p()));

  // Groups that see only zeros of beta carry no mass in any minimizer.
  for (Index g = 0; g < m; ++g) {
    bool any = false;
    for (Index i : groups[g]) any = any || beta[i] != 0.0;
    if (!any) fixed[static_cast<std::size_t>(g)] = true;
  }
  if (beta.isZero(0.0)) {
    result.converged = true;
    return result;
  }

  ScaleProblem prob(beta, groups, fixed);
  if (!prob.feasible()) {
    result.value = kInf;
    result.converged = false;
    return result;
  }

  Vector eta(m);
  if (options.start) {
    require(static_cast<Index>(options.start->size()) == m, "overlap_norm: start has the wrong length");
    for (Index g = 0; g < m; ++g) {
      const double e = (*options.start)[static_cast<std::size_t>(g)];
      require(e >= 0.0 && std::isfinite(e), "overlap_norm: start scales must be finite and nonnegative");
      eta[g] = e;
    }
  } else {
    for (Index g = 0; g < m; ++g) eta[g] = groups.restrict(beta, g).norm() / static_cast<double>(groups.overlap_degree());
  }
  for (Index g = 0; g < m; ++g)
    if (prob.fixed(g)) eta[g] = 0.0;
  if (!std::isfinite(prob.value(eta))) {
    // A custom start left some nonzero coordinate uncovered.
    for (Index g = 0; g < m; ++g)
      if (!prob.fixed(g) && eta[g] == 0.0) eta[g] = groups.restrict(beta, g).norm() / static_cast<double>(groups.size());
  }

  double f = prob.value(eta);
  Vector s = prob.coverage(eta);
  Vector alpha = prob.dual_point(s);
  Certificate cert = certify(prob, eta, alpha, beta);

  int it = 0;
  for (; it < options.max_iters; ++it) {
    if (cert.primal - cert.dual <= options.tolerance * std::max(1.0, cert.primal)) {
      result.converged = true;
      break;
    }
    const Vector grad = prob.gradient(alpha);

    // Projected Newton on groups that are positive or want to grow.
    std::vector<Index> free;
    std::vector<Index> pinned;
    double proj_grad = 0.0;
    for (Index g = 0; g < m; ++g) {
      if (prob.fixed(g)) continue;
      proj_grad = std::max(proj_grad, std::abs(eta[g] - std::max(0.0, eta[g] - grad[g])));
    }
    const double eps = std::min(1e-3 * eta.maxCoeff(), proj_grad);
    for (Index g = 0; g < m; ++g) {
      if (prob.fixed(g)) continue;
      if (eta[g] <= eps && grad[g] > 0.0) {
        pinned.push_back(g);
      } else {
        free.push_back(g);
      }
    }

    bool accepted = false;
    if (!free.empty()) {
      Matrix h = prob.hessian(s, free);
      Vector gf(static_cast<Index>(free.size()));
      for (std::size_t k = 0; k < free.size(); ++k) gf[static_cast<Index>(k)] = grad[free[k]];
      double shift = 1e-12 * std::max(1e-300, h.diagonal().maxCoeff());
      Vector dir;
      for (int attempt = 0; attempt < 8; ++attempt) {
        Matrix hs = h;
        hs.diagonal().array() += shift;
        Eigen::LLT<Matrix> llt(hs);
        if (llt.info() == Eigen::Success) {
          dir = -llt.solve(gf);
          if (dir.allFinite()) break;
        }
        shift *= 100.0;
        dir.resize(0);
      }
      if (dir.size() > 0) {
        double t = 1.0;
        for (int ls = 0; ls < 60; ++ls, t *= 0.5) {
          Vector trial = eta;
          for (std::size_t k = 0; k < free.size(); ++k)
            trial[free[k]] = std::max(0.0, eta[free[k]] + t * dir[static_cast<Index>(k)]);
          for (Index g : pinned) trial[g] = std::max(0.0, eta[g] - t * eta[g]);
          const double ft = prob.value(trial);
          const double decrease = grad.dot(trial - eta);
          if (std::isfinite(ft) && ft <= f + 1e-4 * std::min(0.0, decrease) && ft < f) {
            eta = trial;
            f = ft;
            accepted = true;
            break;
          }
        }
      }
    }
    if (!accepted) {
      // Majorize-minimize: eta_g <- ||v_g||, never increases the objective.
      Vector trial = eta;
      for (Index g = 0; g < m; ++g)
        if (!prob.fixed(g)) trial[g] = eta[g] * std::sqrt(prob.group_norm_sq(alpha, g));
      const double ft = prob.value(trial);
      if (!(ft < f)) {
        s = prob.coverage(eta);
        alpha = prob.dual_point(s);
        cert = certify(prob, eta, alpha, beta);
        result.converged = cert.primal - cert.dual <= options.tolerance * std::max(1.0, cert.primal);
        break;
      }
      eta = trial;
      f = ft;
    }
    s = prob.coverage(eta);
    alpha = prob.dual_point(s);
    cert = certify(prob, eta, alpha, beta);
  }

  result.iterations = it;
  result.value = cert.primal;
  result.dual_bound = cert.dual;
  result.decomposition = assemble(groups, eta, alpha);
  return result;
}

StructuredSparsity structured_sparsity(const Vector& beta, const GroupCollection& groups, const NormOptions& options) {
  StructuredSparsity out;
  out.norm = overlap_norm(beta, groups, options);
  const double thr = active_threshold(beta);
  out.active = out.norm.decomposition.active_set(thr);
  out.count = static_cast<Index>(out.active.size());

  std::vector<bool> frozen(static_cast<std::size_t>(groups.size()), false);
  for (Index g = 0; g < groups.size(); ++g) frozen[static_cast<std::size_t>(g)] = true;
  for (Index g : out.active) frozen[static_cast<std::size_t>(g)] = false;

  const auto norms = out.norm.decomposition.part_norms();
  IndexSet order = out.active;
  std::stable_sort(order.begin(), order.end(),
                   [&](Index a, Index b) { return norms[static_cast<std::size_t>(a)] < norms[static_cast<std::size_t>(b)]; });

  const double base = out.norm.value;
  const double slack = 10.0 * options.tolerance * std::max(1.0, base);
  IndexSet kept = out.active;
  for (Index g : order) {
    NormOptions trial = options;
    trial.start.reset();
    trial.frozen = frozen;
    trial.frozen[static_cast<std::size_t>(g)] = true;
    const NormResult r = overlap_norm(beta, groups, trial);
    if (std::isfinite(r.value) && r.value <= base + slack) {
      frozen[static_cast<std::size_t>(g)] = true;
    }
  }
  for (Index g : out.active)
    if (!frozen[static_cast<std::size_t>(g)]) out.minimal_active.push_back(g);
  out.minimal = static_cast<Index>(out.minimal_active.size());
  return out;
}

DirectionReport check_direction_uniqueness(const Decomposition& a, const Decomposition& b, double tolerance) {
  require(a.groups() == b.groups(), "direction check: decompositions have different group counts");
  require(tolerance > 0.0, "direction check: tolerance must be positive");
  if (a.groups() > 0) {
    const Index p = a.parts.front().size();
    const Vector sa = a.sum(p);
    const Vector sb = b.sum(p);
    require((sa - sb).norm() <= 1e-6 * (1.0 + sa.norm()), "direction check: decompositions sum to different vectors");
  }
  DirectionReport report;
  report.holds.resize(static_cast<std::size_t>(a.groups()));
  for (Index g = 0; g < a.groups(); ++g) {
    const Vector& va = a.parts[static_cast<std::size_t>(g)];
    const Vector& vb = b.parts[static_cast<std::size_t>(g)];
    const double na = va.norm();
    const double nb = vb.norm();
    bool ok = na <= tolerance || nb <= tolerance || (va / na - vb / nb).norm() <= tolerance;
    report.holds[static_cast<std::size_t>(g)] = ok;
    report.all_hold = report.all_hold && ok;
  }
  return report;
}

}  // namespace ogl
