// Acceptance run: one PASS/FAIL line per criterion, pinned tolerances and
// seeds. Exit status is the number of failed criteria.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <unistd.h>

#include "ogl/asymptotics.hpp"
#include "ogl/cli.hpp"
#include "ogl/experiments.hpp"
#include "ogl/io.hpp"
#include "ogl/overlap_norm.hpp"
#include "ogl/parallel.hpp"
#include "ogl/solver.hpp"
#include "ogl/theory.hpp"
#include "support/generators.hpp"
#include "support/oracles.hpp"

using namespace ogl;
namespace fs = std::filesystem;

namespace {

constexpr std::uint64_t kSeed = 1;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double x) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), f, x);
  return buf;
}

int jobs() { return default_jobs(); }

ProblemInstance gaussian(Index n, Index p, std::uint64_t seed, double sigma, Index support) {
  Rng rng = make_rng(seed, 77);
  ProblemInstance inst;
  inst.X.resize(n, p);
  for (Index j = 0; j < p; ++j) inst.X.col(j) = standard_normal(n, rng);
  Vector b = Vector::Zero(p);
  for (Index i = 0; i < std::min(support, p); ++i) b[i] = (i % 2 == 0 ? 1.0 : -1.0) * (1.0 + 0.25 * static_cast<double>(i));
  inst.y = inst.X * b + sigma * standard_normal(n, rng);
  inst.beta0 = b;
  return inst;
}

// 1. Overlap norm against the brute-force oracle.
Outcome criterion1() {
  Rng rng = make_rng(kSeed, 1);
  int checked = 0;
  int redrawn = 0;
  double worst = 0.0;
  while (checked < 100) {
    const GroupCollection g = testing::random_groups(rng, 6, 4);
    const Vector b = testing::random_sparse_vector(rng, g.p());
    Index shared = 0;
    for (Index i = 0; i < g.p(); ++i)
      if (b[i] != 0.0) shared += g.membership(i) - 1;
    if (shared > 6) {
      ++redrawn;
      continue;
    }
    worst = std::max(worst, std::abs(overlap_norm(b, g).value - testing::overlap_norm_oracle(b, g, 11)));
    ++checked;
  }
  const auto chain = GroupCollection::from_one_based({{1, 2}, {2, 3}}, 3);
  const double err5 = std::abs(overlap_norm(Vector::Ones(3), chain).value - std::sqrt(5.0));
  return {worst <= 1e-4 && err5 <= 1e-6,
          "max |norm - oracle| = " + fmt("%.3e", worst) + " over 100 instances (" + std::to_string(redrawn) +
              " redrawn), |value - sqrt5| = " + fmt("%.3e", err5)};
}

// 2. Lasso and group-lasso reductions.
Outcome criterion2(double& worst_kkt, double tol) {
  double lasso_err = 0.0;
  double group_err = 0.0;
  for (std::uint64_t k = 0; k < 20; ++k) {
    const ProblemInstance inst = gaussian(30, 10, 100 + k, 0.3, 4);
    const auto singles = GroupCollection::singletons(10);
    const auto grid = lambda_grid(lambda_max(inst, singles), 10, 1e-3);
    SolverConfig cfg;
    cfg.tolerance = tol;
    for (const auto& r : fit_path(inst, singles, grid, cfg)) {
      lasso_err = std::max(lasso_err, (r.beta_hat - testing::lasso_cd_oracle(inst.X, inst.y, r.lambda)).norm());
      if (r.converged) worst_kkt = std::max(worst_kkt, r.kkt_residual);
    }
    const auto blocks = make_contiguous_groups(12, 3, 1);
    ProblemInstance ortho = gaussian(36, 12, 200 + k, 0.3, 5);
    ortho.X = testing::orthonormalize_blocks(ortho.X, blocks);
    const auto ggrid = lambda_grid(lambda_max(ortho, blocks), 10, 1e-3);
    for (const auto& r : fit_path(ortho, blocks, ggrid, cfg)) {
      group_err = std::max(group_err, (r.beta_hat - testing::group_lasso_orthonormal_oracle(ortho.X, ortho.y, blocks,
                                                                                            r.lambda))
                                          .norm());
      if (r.converged) worst_kkt = std::max(worst_kkt, r.kkt_residual);
    }
  }
  return {lasso_err <= 1e-6 && group_err <= 1e-6,
          "lasso max err " + fmt("%.3e", lasso_err) + ", group lasso max err " + fmt("%.3e", group_err)};
}

// 3. KKT, OLS limit and the zero threshold.
Outcome criterion3(double worst_kkt, double tol) {
  double ols_err = 0.0;
  bool zero_ok = true;
  for (std::uint64_t k = 0; k < 10; ++k) {
    const ProblemInstance inst = gaussian(40, 12, 300 + k, 0.5, 6);
    const auto groups = make_contiguous_groups(12, 4, 2);
    SolverConfig cfg;
    cfg.tolerance = tol;
    cfg.lambda = 0.0;
    const FitResult r0 = fit(inst, groups, cfg);
    ols_err = std::max(ols_err, (r0.beta_hat - testing::normal_equations_ols(inst.X, inst.y)).norm());
    if (r0.converged) worst_kkt = std::max(worst_kkt, r0.kkt_residual);
    const double lmax = lambda_max(inst, groups);
    for (double f : {0.5, 0.1, 0.01}) {
      cfg.lambda = f * lmax;
      const FitResult r = fit(inst, groups, cfg);
      if (r.converged) worst_kkt = std::max(worst_kkt, r.kkt_residual);
    }
    cfg.lambda = lmax * (1.0 + 1e-9);
    zero_ok = zero_ok && fit(inst, groups, cfg).beta_hat.isZero(0.0);
  }
  return {worst_kkt <= 10.0 * tol && ols_err <= 1e-6 && zero_ok,
          "max KKT residual " + fmt("%.3e", worst_kkt) + " (limit " + fmt("%.0e", 10.0 * tol) + "), OLS err " +
              fmt("%.3e", ols_err) + ", zero above threshold: " + (zero_ok ? "yes" : "no")};
}

// 4. Finite-sample bounds at desk scale.
Outcome criterion4() {
  const auto groups = make_contiguous_groups(64, 8, 2);
  const ProblemInstance inst = theorem_instance(groups, 128, 2, 0.1, kSeed);
  Theorem1Options o;
  o.trials = 200;
  o.seed = kSeed;
  o.jobs = jobs();
  o.kappa_options.jobs = jobs();
  const auto rep = verify_theorem1(inst, groups, o);
  o.choice = LambdaChoice::Alternative;
  const auto alt = verify_theorem1(inst, groups, o);
  const bool pass = rep.valid && rep.empirical_hold_rate >= rep.nominal_rate && alt.valid &&
                    alt.empirical_hold_rate >= alt.nominal_rate;
  return {pass, "hold rate " + fmt("%.3f", rep.empirical_hold_rate) + " vs nominal " + fmt("%.4f", rep.nominal_rate) +
                    " (kappa " + fmt("%.4f", rep.kappa) + ", excluded " + std::to_string(rep.excluded) +
                    "); alternate lambda " + fmt("%.3f", alt.empirical_hold_rate) + " vs " +
                    fmt("%.4f", alt.nominal_rate)};
}

// 5. Tail bound and Hoelder extension.
Outcome criterion5() {
  int chi_viol = 0;
  for (Index D : {1, 2, 4, 8, 16})
    for (double m : {0.5, 1.0, 2.0, 4.0}) {
      const double x = m * static_cast<double>(D);
      chi_viol += chi2_tail_frequency(D, x, 1000000, kSeed) > chi2_tail_bound(D, x);
    }
  Rng rng = make_rng(kSeed, 5);
  int holder_viol = 0;
  for (int k = 0; k < 1000; ++k) {
    const GroupCollection g = testing::random_groups(rng, 8, 6);
    const Vector a = standard_normal(g.p(), rng);
    const Vector b = standard_normal(g.p(), rng);
    holder_viol += !holder_extension_check(a, b, g).holds;
  }
  return {chi_viol == 0 && holder_viol == 0, "chi2 violations " + std::to_string(chi_viol) + "/20, Hoelder violations " +
                                                 std::to_string(holder_viol) + "/1000"};
}

// 6. Restricted eigenvalue estimate.
Outcome criterion6() {
  const Index p = 8;
  ProblemInstance id;
  id.X = std::sqrt(static_cast<double>(p)) * Matrix::Identity(p, p);
  id.y = Vector::Zero(p);
  const auto singles = GroupCollection::singletons(p);
  bool converge_ok = true;
  std::string d = "identity:";
  for (Index s : {1, 2, 4}) {
    KappaOptions ko;
    ko.seed = kSeed;
    ko.jobs = jobs();
    const auto k = estimate_kappa(id, singles, s, ko);
    const double target = 1.0 / std::sqrt(static_cast<double>(s));
    converge_ok = converge_ok && k.kappa_hat >= target - 1e-9 && k.kappa_hat <= 1.05 * target;
    d += " s=" + std::to_string(s) + " ratio " + fmt("%.4f", k.kappa_hat / target);
  }
  int below = 0;
  int total = 0;
  double worst_gap = -1e300;
  Rng rng = make_rng(kSeed, 6);
  for (int t = 0; t < 6; ++t) {
    const GroupCollection g = testing::random_groups(rng, 6, 4);
    ProblemInstance inst;
    inst.X.resize(3 * g.p(), g.p());
    for (Index j = 0; j < g.p(); ++j) inst.X.col(j) = standard_normal(3 * g.p(), rng);
    inst.X = normalize_columns(inst.X);
    inst.y = Vector::Zero(3 * g.p());
    for (Index s = 1; s <= g.size(); ++s) {
      KappaOptions ko;
      ko.seed = kSeed;
      ko.samples = 500;
      ko.refine_steps = 1000;
      ko.jobs = jobs();
      const auto k = estimate_kappa(inst, g, s, ko);
      below += k.below_upper;
      ++total;
      worst_gap = std::max(worst_gap, k.kappa_hat - k.kappa_upper);
    }
  }
  d += "; kappa_hat <= kappa_upper on " + std::to_string(below) + "/" + std::to_string(total) +
       " designs (max kappa_hat - kappa_upper " + fmt("%.3e", worst_gap) + ")";
  return {converge_ok && below == total, d};
}

// 7. Simulation study at desk scale.
Outcome criterion7() {
  ExperimentConfig c;
  c.scale = 0.25;
  c.trials = 20;
  c.sigma = 0.01;
  c.seed = kSeed;
  c.jobs = jobs();
  const auto ov = run_overlap_study(c);
  auto diff_se = [](const EstimatorSummary& a, const EstimatorSummary& b) {
    return std::sqrt(a.se_error * a.se_error + b.se_error * b.se_error);
  };
  const auto& base = ov.cells[0].overlap_lasso;
  bool a_ok = true;
  std::string d = "overlap means:";
  for (const auto& cell : ov.cells) d += " " + fmt("%.4f", cell.overlap_lasso.mean_error);
  for (std::size_t k : {1u, 2u, 3u}) {
    const auto& o = ov.cells[k].overlap_lasso;
    a_ok = a_ok && o.mean_error - base.mean_error >= diff_se(o, base);
  }
  const auto& five = ov.cells[4].overlap_lasso;
  const double gap5 = std::abs(five.mean_error - base.mean_error);
  const bool b_ok = gap5 <= 2.0 * diff_se(five, base);

  c.study = Study::SampleSize;
  const auto ss = run_sample_size_study(c);
  std::vector<double> lasso;
  std::vector<double> overlap;
  for (const auto& cell : ss.cells) {
    lasso.push_back(cell.lasso.mean_error);
    overlap.push_back(cell.overlap_lasso.mean_error);
  }
  const std::size_t pl = plateau_index(lasso, 0.10);
  const std::size_t po = plateau_index(overlap, 0.10);
  const bool c_ok = po + 1 <= pl;
  d += std::string("; (a) ") + (a_ok ? "ok" : "no") + ", (b) |d5| = " + fmt("%.4f", gap5) + " vs 2se " +
       fmt("%.4f", 2.0 * diff_se(five, base)) + (b_ok ? " ok" : " no") + ", (c) plateau n: overlap " +
       std::to_string(ss.cells[po].n) + ", lasso " + std::to_string(ss.cells[pl].n) + (c_ok ? " ok" : " no");
  return {a_ok && b_ok && c_ok, d};
}

// 8. Adaptive estimator asymptotics.
Outcome criterion8() {
  const auto g = make_contiguous_groups(10, 2, 1);
  Vector b = Vector::Zero(10);
  b.head(4) << 1.0, -0.8, 0.6, 1.2;
  AsymptoticOptions o;
  o.seed = kSeed;
  o.jobs = jobs();
  const auto rep = run_asymptotic_study(g, b, o);
  const auto& last = rep.cells.back();
  Vector w = Vector::Zero(10);
  w.head(3) << 1.0, -0.8, 0.6;
  const auto wrong = run_asymptotic_study(g, w, o);
  double min_fp = 1.0;
  for (const auto& cell : wrong.cells) min_fp = std::min(min_fp, cell.false_positive_rate);
  std::string frob;
  for (const auto& cell : rep.cells) frob += " " + fmt("%.4f", cell.frobenius_relative_error);
  const bool pass = last.recovery_rate >= 0.9 && last.frobenius_relative_error <= 0.15 &&
                    rep.frobenius_non_increasing && min_fp >= 0.2;
  return {pass, "recovery at n=4000 " + fmt("%.3f", last.recovery_rate) + ", Frobenius errors" + frob +
                    ", wrong-group false-positive rate (min over n) " + fmt("%.3f", min_fp)};
}

// 9. Pathology detection.
Outcome criterion9() {
  AssumptionOptions ao;
  ao.seed = kSeed;
  const auto nested = GroupCollection::from_one_based({{1, 2}, {3, 4}, {1, 2, 3, 4}, {5}}, 5);
  Vector nb(5);
  nb << 1.3, 1.3, 0.0, 0.0, -0.7;
  const auto v1 = check_assumption_correct(nb, nested, ao);
  const auto tri = GroupCollection::from_one_based({{1, 2}, {2, 3}, {1, 3}}, 3);
  const auto v2 = check_assumption_correct(Vector::Constant(3, 1.3), tri, ao);
  const auto disjoint = make_contiguous_groups(10, 2, 1);
  Vector db = Vector::Zero(10);
  db.head(4) << 1.0, -0.8, 0.6, 1.2;
  const auto v3 = check_assumption_correct(db, disjoint, ao);
  Vector db2 = Vector::Zero(10);
  db2.segment(4, 4) << 0.3, 2.0, -1.0, 0.5;
  const auto v4 = check_assumption_correct(db2, disjoint, ao);
  auto reasons = [](const AssumptionVerdict& v) {
    std::string s;
    for (auto r : v.reasons) s += (s.empty() ? "" : "+") + to_string(r);
    return s.empty() ? std::string("none") : s;
  };
  return {v1.violated && v2.violated && !v3.violated && !v4.violated,
          "nested " + std::string(v1.violated ? "violated" : "consistent") + " (" + reasons(v1) + "), triangle " +
              (v2.violated ? "violated" : "consistent") + " (" + reasons(v2) + "), disjoint " +
              (v3.violated || v4.violated ? "violated" : "consistent")};
}

struct Captured {
  int code;
  std::string out;
};

Captured call_cli(std::vector<std::string> args) {
  args.insert(args.begin(), "ogl");
  std::vector<char*> argv;
  for (auto& a : args) argv.push_back(a.data());
  std::ostringstream out;
  std::ostringstream err;
  auto* o = std::cout.rdbuf(out.rdbuf());
  auto* e = std::cerr.rdbuf(err.rdbuf());
  const int code = cli::dispatch(static_cast<int>(argv.size()), argv.data());
  std::cout.rdbuf(o);
  std::cerr.rdbuf(e);
  return {code, out.str()};
}

bool same_tree(const fs::path& a, const fs::path& b, int& files) {
  for (const auto& entry : fs::directory_iterator(a)) {
    const fs::path other = b / entry.path().filename();
    if (!fs::exists(other)) return false;
    if (io::read_text(entry.path().string()) != io::read_text(other.string())) return false;
    ++files;
  }
  return true;
}

// 10. Reproducibility and job-count independence.
Outcome criterion10() {
  const fs::path root = fs::temp_directory_path() / ("ogl_acceptance_" + std::to_string(::getpid()));
  fs::remove_all(root);
  ::unsetenv("OGL_OUTPUT_DIR");
  const std::vector<std::vector<std::string>> runs{
      {"simulate", "--scale", "0.125", "--trials", "3", "--grid-points", "15"},
      {"simulate", "--experiment", "sample-size", "--scale", "0.125", "--trials", "3", "--grid-points", "15"},
      {"verify", "theorem1", "--trials", "30", "--kappa-samples", "300", "--refine-steps", "300"},
      {"verify", "oracle", "--trials", "30", "--kappa-samples", "300", "--refine-steps", "300"},
      {"verify", "kappa", "--s", "2", "--kappa-samples", "300", "--refine-steps", "300"},
      {"asymptotics", "--trials", "20", "--n-grid", "250,1000"},
      {"fit", "--path", "8", "--csv"},
  };
  bool ok = true;
  int files = 0;
  std::string why;
  // Instance for the fit run.
  call_cli({"--seed", "3", "generate", "--p", "32", "--n", "24", "--overlap", "3", "--out", (root / "gen").string()});
  for (std::size_t r = 0; r < runs.size(); ++r) {
    std::vector<std::string> base{"--seed", "11"};
    base.insert(base.end(), runs[r].begin(), runs[r].end());
    if (runs[r][0] == "fit") {
      base.insert(base.end(), {"--instance", (root / "gen/instance.json").string(), "--groups",
                               (root / "gen/groups.json").string()});
    }
    const fs::path a = root / ("a" + std::to_string(r));
    const fs::path b = root / ("b" + std::to_string(r));
    const fs::path c = root / ("c" + std::to_string(r));
    auto with = [&](const std::string& j, const fs::path& out) {
      auto v = base;
      v.insert(v.end(), {"--jobs", j, "--out", out.string()});
      return v;
    };
    const auto ra = call_cli(with("1", a));
    const auto rb = call_cli(with("1", b));
    const auto rc = call_cli(with("4", c));
    if (ra.code != 0 || rb.code != 0 || rc.code != 0 || ra.out != rb.out || ra.out != rc.out ||
        !same_tree(a, b, files) || !same_tree(a, c, files)) {
      ok = false;
      why += " run " + std::to_string(r) + " differs;";
    }
    const auto rr = call_cli({"--replay", (a / "manifest.json").string(), "--out", (root / "replay").string()});
    if (rr.code != 0 || rr.out != ra.out) {
      ok = false;
      why += " replay " + std::to_string(r) + " differs;";
    }
  }
  fs::remove_all(root);
  return {ok, std::to_string(runs.size()) + " configurations, " + std::to_string(files) +
                  " file comparisons across repeat and --jobs 1/4, manifest replay" + (ok ? "" : ":" + why)};
}

}  // namespace

int main() {
  int failed = 0;
  double worst_kkt = 0.0;
  const double tol = 1e-8;
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"1 norm oracle equivalence", criterion1},
      {"2 lasso and group-lasso reductions", [&] { return criterion2(worst_kkt, tol); }},
      {"3 optimality conditions", [&] { return criterion3(worst_kkt, tol); }},
      {"4 finite-sample bounds Monte Carlo", criterion4},
      {"5 tail and Hoelder inequalities", criterion5},
      {"6 restricted eigenvalue sanity", criterion6},
      {"7 simulation study at desk scale", criterion7},
      {"8 adaptive estimator asymptotics", criterion8},
      {"9 pathology detection", criterion9},
      {"10 reproducibility", criterion10},
  };
  const std::vector<double> limits{30, 0, 0, 300, 0, 0, 600, 0, 0, 0};
  for (std::size_t k = 0; k < criteria.size(); ++k) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[k].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (limits[k] > 0 && secs > limits[k]) {
      o.pass = false;
      o.detail += "; runtime limit " + fmt("%.0f", limits[k]) + " s exceeded";
    }
    failed += !o.pass;
    std::printf("%s criterion %s: %s [%.1f s]\n", o.pass ? "PASS" : "FAIL", criteria[k].first.c_str(),
                o.detail.c_str(), secs);
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed;
}
