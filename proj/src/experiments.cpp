#include "ogl/experiments.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>

#include "ogl/parallel.hpp"

namespace ogl {

std::string to_string(Study s) { return s == Study::Overlap ? "overlap" : "sample-size"; }

Study study_from_string(const std::string& s) {
  if (s == "overlap") return Study::Overlap;
  if (s == "sample-size") return Study::SampleSize;
  throw ValidationError("unknown experiment '" + s + "' (expected overlap or sample-size)");
}

std::string to_string(LambdaSelection s) { return s == LambdaSelection::OracleRecovery ? "oracle" : "holdout"; }

LambdaSelection lambda_selection_from_string(const std::string& s) {
  if (s == "oracle") return LambdaSelection::OracleRecovery;
  if (s == "holdout") return LambdaSelection::Holdout;
  throw ValidationError("unknown lambda rule '" + s + "' (expected oracle or holdout)");
}

Index active_group_count(Index group_size, Index overlap, double scale) {
  require(scale > 0.0, "active_group_count: scale must be positive");
  const double raw = (64.0 * scale - static_cast<double>(group_size)) / static_cast<double>(group_size + overlap);
  return std::max<Index>(1, static_cast<Index>(std::ceil(raw)) + 1);
}

std::vector<double> default_grid(const ProblemInstance& instance, const GroupCollection& groups, int points,
                                 double ratio) {
  return lambda_grid(lambda_max(instance, groups), points, ratio);
}

namespace {

ProblemInstance take_rows(const ProblemInstance& inst, Index first, Index count) {
  ProblemInstance out;
  out.X = inst.X.middleRows(first, count);
  out.y = inst.y.segment(first, count);
  out.beta0 = inst.beta0;
  out.sigma = inst.sigma;
  return out;
}

}  // namespace

SelectedFit select_lambda(const ProblemInstance& instance, const GroupCollection& groups, LambdaSelection rule,
                          const std::vector<double>& grid, const SolverConfig& base) {
  require(!grid.empty(), "select_lambda: empty grid");
  SelectedFit out;
  if (rule == LambdaSelection::OracleRecovery) {
    require(instance.beta0.has_value(), "select_lambda: the oracle rule needs a known beta0");
    const auto path = fit_path(instance, groups, grid, base);
    std::size_t best = 0;
    double best_err = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < path.size(); ++k) {
      const double e = recovery_error(path[k].beta_hat, *instance.beta0);
      if (e < best_err) {
        best_err = e;
        best = k;
      }
    }
    out.lambda = grid[best];
    out.fit = path[best];
    return out;
  }
  const Index n = instance.n();
  const Index train = static_cast<Index>(std::floor(0.8 * static_cast<double>(n)));
  require(train >= 1 && train < n, "select_lambda: too few rows for a holdout split");
  const ProblemInstance fit_part = take_rows(instance, 0, train);
  const ProblemInstance valid_part = take_rows(instance, train, n - train);
  const auto path = fit_path(fit_part, groups, grid, base);
  std::size_t best = 0;
  double best_err = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < path.size(); ++k) {
    const double e = (valid_part.y - valid_part.X * path[k].beta_hat).squaredNorm();
    if (e < best_err) {
      best_err = e;
      best = k;
    }
  }
  out.lambda = grid[best];
  SolverConfig cfg = base;
  cfg.lambda = out.lambda;
  out.fit = fit(instance, groups, cfg);
  return out;
}

std::size_t plateau_index(const std::vector<double>& mean_errors, double slack) {
  require(!mean_errors.empty(), "plateau_index: no cells");
  const double target = mean_errors.back() + slack;
  for (std::size_t k = 0; k < mean_errors.size(); ++k)
    if (mean_errors[k] <= target) return k;
  return mean_errors.size() - 1;
}

namespace {

struct CellSpec {
  Index overlap;
  Index n;
};

Index scaled(Index value, double scale) {
  return std::max<Index>(1, static_cast<Index>(std::llround(scale * static_cast<double>(value))));
}

EstimatorSummary summarize(const std::vector<double>& errors, const std::vector<double>& supports,
                           const std::vector<double>& lambdas, Index excluded, double seconds, bool timing) {
  EstimatorSummary s;
  s.excluded = excluded;
  if (timing) s.runtime_seconds = seconds;
  if (errors.empty()) return s;
  const double count = static_cast<double>(errors.size());
  for (std::size_t k = 0; k < errors.size(); ++k) {
    s.mean_error += errors[k] / count;
    s.mean_support += supports[k] / count;
    s.mean_lambda += lambdas[k] / count;
  }
  if (errors.size() > 1) {
    double var = 0.0;
    for (double e : errors) var += (e - s.mean_error) * (e - s.mean_error);
    var /= count - 1.0;
    s.se_error = std::sqrt(var / count);
  }
  return s;
}

ExperimentResult run_cells(const ExperimentConfig& config, const std::vector<CellSpec>& specs) {
  require(config.trials >= 1, "experiment: need at least one trial per cell");
  require(config.scale > 0.0, "experiment: scale must be positive");
  require(config.sigma >= 0.0, "experiment: sigma must be nonnegative");
  ExperimentResult res;
  res.config = config;
  const Index p = scaled(config.p, config.scale);

  std::vector<GroupCollection> overlap_groups;
  for (const auto& spec : specs) {
    ExperimentCell cell;
    cell.overlap = spec.overlap;
    cell.n = spec.n;
    cell.p = p;
    overlap_groups.push_back(make_contiguous_groups(p, config.group_size, spec.overlap));
    cell.groups = overlap_groups.back().size();
    cell.k = std::min(active_group_count(config.group_size, spec.overlap, config.scale), cell.groups);
    cell.support = static_cast<Index>(leading_support(overlap_groups.back(), cell.k).size());
    res.cells.push_back(cell);
  }
  const GroupCollection singles = GroupCollection::singletons(p);

  const std::size_t per_cell = static_cast<std::size_t>(config.trials);
  res.trials.resize(specs.size() * per_cell);
  parallel_for(res.trials.size(), config.jobs, [&](std::size_t idx) {
    ExperimentTrial& tr = res.trials[idx];
    tr.cell = idx / per_cell;
    tr.trial = static_cast<Index>(idx % per_cell);
    const ExperimentCell& cell = res.cells[tr.cell];
    const GroupCollection& groups = overlap_groups[tr.cell];
    const std::uint64_t seed_key = static_cast<std::uint64_t>(cell.overlap) * 100000u + static_cast<std::uint64_t>(cell.n);
    Rng seeder = make_rng(config.seed, seed_key, static_cast<std::uint64_t>(tr.trial));
    const ProblemInstance inst = generate_instance(p, cell.n, groups, cell.k, config.sigma, seeder());

    SolverConfig base;
    base.tolerance = config.tolerance;
    auto run = [&](const GroupCollection& g, bool& converged, double& err, double& lam, Index& support,
                   double& seconds) {
      const auto start = std::chrono::steady_clock::now();
      const auto grid = default_grid(inst, g, config.grid_points, config.grid_ratio);
      const SelectedFit sel = select_lambda(inst, g, config.selection, grid, base);
      seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
      converged = sel.fit.converged;
      err = recovery_error(sel.fit.beta_hat, *inst.beta0);
      lam = sel.lambda;
      const double thr = 1e-6 * sel.fit.beta_hat.cwiseAbs().maxCoeff() + 1e-12;
      support = static_cast<Index>((sel.fit.beta_hat.array().abs() > thr).count());
    };
    run(singles, tr.lasso_converged, tr.lasso_error, tr.lasso_lambda, tr.lasso_support, tr.lasso_seconds);
    run(groups, tr.overlap_converged, tr.overlap_error, tr.overlap_lambda, tr.overlap_support, tr.overlap_seconds);
  });

  for (std::size_t c = 0; c < res.cells.size(); ++c) {
    std::vector<double> le, ls, ll, oe, os, ol;
    Index lx = 0;
    Index ox = 0;
    double lsec = 0.0;
    double osec = 0.0;
    for (std::size_t k = 0; k < per_cell; ++k) {
      const ExperimentTrial& tr = res.trials[c * per_cell + k];
      lsec += tr.lasso_seconds;
      osec += tr.overlap_seconds;
      if (tr.lasso_converged) {
        le.push_back(tr.lasso_error);
        ls.push_back(static_cast<double>(tr.lasso_support));
        ll.push_back(tr.lasso_lambda);
      } else {
        ++lx;
      }
      if (tr.overlap_converged) {
        oe.push_back(tr.overlap_error);
        os.push_back(static_cast<double>(tr.overlap_support));
        ol.push_back(tr.overlap_lambda);
      } else {
        ++ox;
      }
    }
    res.cells[c].lasso = summarize(le, ls, ll, lx, lsec, config.record_timing);
    res.cells[c].overlap_lasso = summarize(oe, os, ol, ox, osec, config.record_timing);
  }
  return res;
}

}  // namespace

ExperimentResult run_overlap_study(const ExperimentConfig& config) {
  require(!config.overlaps.empty(), "overlap study: empty overlap grid");
  ExperimentConfig c = config;
  c.study = Study::Overlap;
  std::vector<CellSpec> specs;
  for (Index o : c.overlaps) specs.push_back({o, scaled(c.n, c.scale)});
  return run_cells(c, specs);
}

ExperimentResult run_sample_size_study(const ExperimentConfig& config) {
  require(!config.log2_steps.empty(), "sample-size study: empty n grid");
  ExperimentConfig c = config;
  c.study = Study::SampleSize;
  std::vector<CellSpec> specs;
  for (int j : c.log2_steps) {
    require(j >= 0 && j < 30, "sample-size study: log2 steps must lie in [0, 30)");
    specs.push_back({c.sample_size_overlap, scaled(c.base_n << j, c.scale)});
  }
  return run_cells(c, specs);
}

ExperimentResult run_study(const ExperimentConfig& config) {
  return config.study == Study::Overlap ? run_overlap_study(config) : run_sample_size_study(config);
}

}  // namespace ogl
