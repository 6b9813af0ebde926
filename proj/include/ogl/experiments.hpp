#pragma once

#include <optional>
#include <string>
#include <vector>

#include "ogl/model.hpp"
#include "ogl/solver.hpp"

namespace ogl {

enum class Study { Overlap, SampleSize };
enum class LambdaSelection { OracleRecovery, Holdout };

std::string to_string(Study s);
Study study_from_string(const std::string& s);
std::string to_string(LambdaSelection s);
LambdaSelection lambda_selection_from_string(const std::string& s);

struct ExperimentConfig {
  Study study = Study::Overlap;
  /// Full-scale sizes; the run uses round(scale * value).
  Index p = 512;
  Index n = 192;
  Index base_n = 48;  // sample-size study: n = base_n * 2^j
  std::vector<Index> overlaps{1, 2, 3, 4, 5, 6, 7, 8};
  std::vector<int> log2_steps{0, 1, 2, 3, 4};
  Index sample_size_overlap = 4;
  Index group_size = 8;
  double sigma = 0.01;
  Index trials = 20;
  std::uint64_t seed = 0;
  LambdaSelection selection = LambdaSelection::OracleRecovery;
  double scale = 1.0;
  int grid_points = 50;
  double grid_ratio = 1e-4;
  double tolerance = 1e-6;
  int jobs = 1;
  bool record_timing = false;
};

/// ceil((64 scale - size) / (size + overlap)) + 1, at least 1.
Index active_group_count(Index group_size, Index overlap, double scale);

struct SelectedFit {
  double lambda = 0.0;
  FitResult fit;
};

/// Oracle rule: the grid point with the smallest recovery error (needs
/// beta0). Holdout rule: the path is fit on the first 80% of rows, the grid
/// point with the smallest validation error on the rest is refit on all rows.
/// The grid must be strictly descending.
SelectedFit select_lambda(const ProblemInstance& instance, const GroupCollection& groups, LambdaSelection rule,
                          const std::vector<double>& grid, const SolverConfig& base = {});

/// 50-point default grid from lambda_max to 1e-4 lambda_max.
std::vector<double> default_grid(const ProblemInstance& instance, const GroupCollection& groups, int points = 50,
                                 double ratio = 1e-4);

struct EstimatorSummary {
  double mean_error = 0.0;
  double se_error = 0.0;  // standard error of the mean
  double mean_support = 0.0;
  double mean_lambda = 0.0;
  Index excluded = 0;
  std::optional<double> runtime_seconds;
};

struct ExperimentCell {
  Index overlap = 0;
  Index n = 0;
  Index p = 0;
  Index groups = 0;
  Index k = 0;
  Index support = 0;
  EstimatorSummary lasso;
  EstimatorSummary overlap_lasso;
};

struct ExperimentTrial {
  std::size_t cell = 0;
  Index trial = 0;
  bool lasso_converged = false;
  bool overlap_converged = false;
  double lasso_error = 0.0;
  double overlap_error = 0.0;
  double lasso_lambda = 0.0;
  double overlap_lambda = 0.0;
  Index lasso_support = 0;
  Index overlap_support = 0;
  double lasso_seconds = 0.0;
  double overlap_seconds = 0.0;
};

struct ExperimentResult {
  ExperimentConfig config;
  std::vector<ExperimentCell> cells;
  std::vector<ExperimentTrial> trials;
};

/// Overlap sweep at fixed n.
ExperimentResult run_overlap_study(const ExperimentConfig& config);
/// Sample-size sweep at a fixed overlap.
ExperimentResult run_sample_size_study(const ExperimentConfig& config);
ExperimentResult run_study(const ExperimentConfig& config);

/// First grid index whose mean error is within `slack` of the last cell's.
std::size_t plateau_index(const std::vector<double>& mean_errors, double slack);

}  // namespace ogl
