#include "ogl/cli.hpp"

#include <CLI11.hpp>
#include <cmath>
#include <cstdlib>
#include <iostream>
#include <map>
#include <set>
#include <sstream>

#include "ogl/asymptotics.hpp"
#include "ogl/experiments.hpp"
#include "ogl/io.hpp"
#include "ogl/overlap_norm.hpp"
#include "ogl/solver.hpp"
#include "ogl/theory.hpp"

namespace ogl::cli {

namespace {

using io::Json;

struct Runtime {
  int jobs = 0;
  std::string out_dir;
};

struct Output {
  std::string name;  // base name of the main result file
  Json result;
  std::map<std::string, std::string> files;
  int status = kExitOk;
};

// ---------------------------------------------------------------- helpers

template <class T>
T get(const Json& c, const std::string& key) {
  if (!c.contains(key)) throw ValidationError("config is missing '" + key + "'");
  try {
    return c.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ValidationError("config field '" + key + "' has the wrong type");
  }
}

template <class T>
std::optional<T> get_optional(const Json& c, const std::string& key) {
  if (!c.contains(key) || c.at(key).is_null()) return std::nullopt;
  return get<T>(c, key);
}

template <class T>
Json optional_json(const std::optional<T>& v) {
  return v ? Json(*v) : Json(nullptr);
}

std::string join_csv(const std::vector<std::string>& cells) {
  std::string out;
  for (std::size_t k = 0; k < cells.size(); ++k) {
    if (k > 0) out += ',';
    out += cells[k];
  }
  return out + "\n";
}

std::string num(double x) { return io::format_double(x); }
std::string num(Index x) { return std::to_string(x); }
std::string flag(bool b) { return b ? "1" : "0"; }

Json one_based(const IndexSet& s) {
  Json arr = Json::array();
  for (Index i : s) arr.push_back(i + 1);
  return arr;
}

Json matrix_json(const Matrix& m) {
  Json rows = Json::array();
  for (Index i = 0; i < m.rows(); ++i) {
    Json row = Json::array();
    for (Index c = 0; c < m.cols(); ++c) row.push_back(m(i, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

// Family used by the theorem, oracle and kappa checks: either files or a
// generated column-normalized design.
struct Family {
  ProblemInstance instance;
  std::optional<GroupCollection> groups;
};

Family load_family(const Json& c) {
  Family f;
  const auto instance_path = get_optional<std::string>(c, "instance");
  const auto groups_path = get_optional<std::string>(c, "groups");
  if (instance_path || groups_path) {
    require(instance_path && groups_path, "pass both --instance and --groups, or neither");
    f.instance = io::instance_from_json(io::read_json(*instance_path));
    f.groups = io::groups_from_json(io::read_json(*groups_path));
    require(f.groups->p() == f.instance.p(), "groups and instance disagree on p");
    return f;
  }
  f.groups = make_contiguous_groups(get<Index>(c, "p"), get<Index>(c, "group_size"), get<Index>(c, "overlap"));
  f.instance = theorem_instance(*f.groups, get<Index>(c, "n"), get<Index>(c, "k"), get<double>(c, "sigma"),
                                get<std::uint64_t>(c, "seed"));
  return f;
}

GroupCollection random_collection(Rng& rng, Index max_p, Index max_groups) {
  std::uniform_int_distribution<Index> pick_p(2, max_p);
  std::uniform_int_distribution<Index> pick_m(1, max_groups);
  std::bernoulli_distribution coin(0.5);
  while (true) {
    const Index p = pick_p(rng);
    const Index m = pick_m(rng);
    std::set<IndexSet> distinct;
    for (Index g = 0; g < m; ++g) {
      IndexSet s;
      for (Index i = 0; i < p; ++i)
        if (coin(rng)) s.push_back(i);
      if (s.empty()) s.push_back(std::uniform_int_distribution<Index>(0, p - 1)(rng));
      distinct.insert(s);
    }
    std::vector<IndexSet> groups(distinct.begin(), distinct.end());
    std::vector<bool> covered(static_cast<std::size_t>(p), false);
    for (const auto& g : groups)
      for (Index i : g) covered[static_cast<std::size_t>(i)] = true;
    IndexSet& last = groups.back();
    for (Index i = 0; i < p; ++i)
      if (!covered[static_cast<std::size_t>(i)]) last.push_back(i);
    std::sort(last.begin(), last.end());
    if (std::set<IndexSet>(groups.begin(), groups.end()).size() != groups.size()) continue;
    return GroupCollection(std::move(groups), p);
  }
}

Json fit_json(const FitResult& r, const GroupCollection& groups) {
  Json j;
  j["lambda"] = r.lambda;
  j["converged"] = r.converged;
  j["iterations"] = r.iterations;
  j["objective"] = r.objective;
  j["kkt_residual"] = r.kkt_residual;
  j["beta_hat"] = io::vector_to_json(r.beta_hat);
  j["active_groups"] = one_based(r.decomposition.active_set(active_threshold(r.beta_hat)));
  j["decomposition"] = io::decomposition_to_json(r.decomposition, groups);
  if (r.weights) j["weights"] = io::weights_to_json(*r.weights);
  if (r.gamma) j["gamma"] = *r.gamma;
  return j;
}

// ---------------------------------------------------------------- norm

Output run_norm(const Json& c, const Runtime&) {
  const GroupCollection groups = io::groups_from_json(io::read_json(get<std::string>(c, "groups")));
  const Vector beta = io::vector_from_json(io::read_json(get<std::string>(c, "beta")), "beta");
  require(beta.size() == groups.p(), "beta has length " + std::to_string(beta.size()) + " but the groups cover " +
                                         std::to_string(groups.p()) + " predictors");
  NormOptions opts;
  opts.tolerance = get<double>(c, "tolerance");
  opts.max_iters = get<int>(c, "max_iters");
  const StructuredSparsity ss = structured_sparsity(beta, groups, opts);
  const NormResult& r = ss.norm;

  Output out;
  out.name = "norm";
  out.result["value"] = r.value;
  out.result["dual_bound"] = r.dual_bound;
  out.result["converged"] = r.converged;
  out.result["iterations"] = r.iterations;
  out.result["active_groups"] = one_based(ss.active);
  out.result["active_count"] = ss.count;
  out.result["minimal_active_count"] = ss.minimal;
  out.result["decomposition"] = io::decomposition_to_json(r.decomposition, groups);
  out.status = r.converged ? kExitOk : kExitNumerical;
  return out;
}

// ---------------------------------------------------------------- fit

Output run_fit(const Json& c, const Runtime&) {
  const ProblemInstance inst = io::instance_from_json(io::read_json(get<std::string>(c, "instance")));
  const GroupCollection groups = io::groups_from_json(io::read_json(get<std::string>(c, "groups")));
  require(groups.p() == inst.p(), "groups and instance disagree on p");
  const auto lambda = get_optional<double>(c, "lambda");
  const auto path = get_optional<int>(c, "path");
  require(lambda.has_value() != path.has_value(), "pass exactly one of --lambda or --path");

  SolverConfig cfg;
  cfg.tolerance = get<double>(c, "tolerance");
  cfg.max_iters = get<int>(c, "max_iters");
  std::optional<double> gamma;
  if (get<bool>(c, "adaptive")) {
    gamma = get<double>(c, "gamma");
    cfg.weights = adaptive_weights(inst, groups, *gamma).weights;
  }

  std::vector<double> grid;
  if (lambda) {
    grid.push_back(*lambda);
  } else {
    grid = lambda_grid(lambda_max(inst, groups, cfg.weights), *path, get<double>(c, "lambda_ratio"));
  }
  std::vector<FitResult> fits = fit_path(inst, groups, grid, cfg);

  Output out;
  out.name = "fit";
  bool converged = true;
  Json arr = Json::array();
  std::string coef = "lambda";
  for (Index i = 0; i < inst.p(); ++i) coef += ",beta" + std::to_string(i + 1);
  coef += "\n";
  for (auto& r : fits) {
    r.gamma = gamma;
    converged = converged && r.converged;
    arr.push_back(fit_json(r, groups));
    coef += num(r.lambda);
    for (Index i = 0; i < inst.p(); ++i) coef += "," + num(r.beta_hat[i]);
    coef += "\n";
  }
  out.result = lambda ? arr.front() : Json{{"path", arr}};
  if (get<bool>(c, "csv")) out.files["coefficients.csv"] = coef;
  out.status = converged ? kExitOk : kExitNumerical;
  return out;
}

// ---------------------------------------------------------------- verify

Theorem1Options theorem_options(const Json& c, const Runtime& rt) {
  Theorem1Options o;
  o.A = get<double>(c, "A");
  o.trials = get<Index>(c, "trials");
  o.seed = get<std::uint64_t>(c, "seed");
  const std::string choice = get<std::string>(c, "lambda_choice");
  require(choice == "theorem" || choice == "alt", "--lambda must be theorem or alt");
  o.choice = choice == "theorem" ? LambdaChoice::Theorem : LambdaChoice::Alternative;
  o.s = get_optional<Index>(c, "s");
  o.kappa = get_optional<double>(c, "kappa");
  o.kappa_options.samples = get<int>(c, "kappa_samples");
  o.kappa_options.refine_steps = get<int>(c, "refine_steps");
  o.kappa_options.seed = o.seed;
  o.jobs = rt.jobs;
  return o;
}

Output run_verify_theorem1(const Json& c, const Runtime& rt) {
  const Family f = load_family(c);
  const BoundReport rep = verify_theorem1(f.instance, *f.groups, theorem_options(c, rt));
  Output out;
  out.name = "theorem1";
  Json& r = out.result;
  r["lambda_choice"] = rep.choice == LambdaChoice::Theorem ? "theorem" : "alt";
  r["lambda"] = rep.lambda;
  r["q"] = rep.q;
  r["kappa"] = rep.kappa;
  r["s"] = rep.s;
  r["prediction_rhs"] = rep.prediction_rhs;
  r["estimation_rhs"] = rep.estimation_rhs;
  r["trials"] = rep.trials;
  r["excluded"] = rep.excluded;
  r["prediction_hold_rate"] = rep.prediction_hold_rate;
  r["estimation_hold_rate"] = rep.estimation_hold_rate;
  r["empirical_hold_rate"] = rep.empirical_hold_rate;
  r["nominal_rate"] = rep.nominal_rate;
  r["meets_nominal"] = rep.empirical_hold_rate >= rep.nominal_rate;
  r["valid"] = rep.valid;
  std::string csv = "trial,converged,prediction_lhs,prediction_rhs,estimation_lhs,estimation_rhs,prediction_holds,"
                    "estimation_holds\n";
  for (std::size_t k = 0; k < rep.records.size(); ++k) {
    const auto& t = rep.records[k];
    csv += join_csv({std::to_string(k + 1), flag(t.converged), num(t.prediction_lhs), num(rep.prediction_rhs),
                     num(t.estimation_lhs), num(rep.estimation_rhs), flag(t.prediction_holds),
                     flag(t.estimation_holds)});
  }
  out.files["theorem1_trials.csv"] = csv;
  out.status = rep.valid ? kExitOk : kExitNumerical;
  return out;
}

Output run_verify_oracle(const Json& c, const Runtime& rt) {
  const Family f = load_family(c);
  const OracleReport rep = verify_oracle_inequality(f.instance, *f.groups, theorem_options(c, rt));
  Output out;
  out.name = "oracle";
  Json& r = out.result;
  r["lambda"] = rep.lambda;
  r["q"] = rep.q;
  r["nominal_rate"] = rep.nominal_rate;
  r["trials"] = rep.trials;
  r["excluded"] = rep.excluded;
  r["hold_rate"] = rep.hold_rate;
  r["meets_nominal"] = rep.hold_rate >= rep.nominal_rate;
  r["valid"] = rep.valid;
  r["support_groups"] = one_based(rep.support_groups);
  r["lasso_budget"] = {{"structured", rep.budget_lhs}, {"log_p", rep.budget_rhs},
                       {"predictive_advantage", rep.predictive_advantage}};
  std::string csv = "trial,converged,lhs,rhs,holds\n";
  for (std::size_t k = 0; k < rep.records.size(); ++k) {
    const auto& t = rep.records[k];
    csv += join_csv({std::to_string(k + 1), flag(t.converged), num(t.lhs), num(t.rhs), flag(t.holds)});
  }
  out.files["oracle_trials.csv"] = csv;
  out.status = rep.valid ? kExitOk : kExitNumerical;
  return out;
}

Output run_verify_kappa(const Json& c, const Runtime& rt) {
  const Family f = load_family(c);
  KappaOptions ko;
  ko.samples = get<int>(c, "kappa_samples");
  ko.refine_steps = get<int>(c, "refine_steps");
  ko.seed = get<std::uint64_t>(c, "seed");
  ko.jobs = rt.jobs;
  const Index s = get_optional<Index>(c, "s").value_or(1);
  const KappaEstimate k = estimate_kappa(f.instance, *f.groups, s, ko);
  Output out;
  out.name = "kappa";
  out.result["s"] = s;
  out.result["kappa_hat"] = k.kappa_hat;
  out.result["kappa_upper"] = k.kappa_upper;
  out.result["below_upper"] = k.below_upper;
  out.result["feasible_samples"] = k.feasible_samples;
  out.result["witness_groups"] = one_based(k.witness_groups);
  out.result["witness"] = io::vector_to_json(k.witness);
  return out;
}

Output run_verify_chi2(const Json& c, const Runtime&) {
  const auto dims = get<std::vector<Index>>(c, "dims");
  const auto mults = get<std::vector<double>>(c, "multipliers");
  const Index samples = get<Index>(c, "samples");
  const auto seed = get<std::uint64_t>(c, "seed");
  Output out;
  out.name = "chi2";
  Json rows = Json::array();
  Index violations = 0;
  std::string csv = "D,x,bound,frequency,holds\n";
  for (Index D : dims) {
    for (double m : mults) {
      const double x = m * static_cast<double>(D);
      const double bound = chi2_tail_bound(D, x);
      const double freq = chi2_tail_frequency(D, x, samples, seed);
      const bool holds = freq <= bound;
      violations += !holds;
      rows.push_back({{"D", D}, {"x", x}, {"bound", bound}, {"frequency", freq}, {"holds", holds}});
      csv += join_csv({num(D), num(x), num(bound), num(freq), flag(holds)});
    }
  }
  out.result["samples"] = samples;
  out.result["violations"] = violations;
  out.result["grid"] = rows;
  out.files["chi2.csv"] = csv;
  return out;
}

Output run_verify_holder(const Json& c, const Runtime&) {
  const Index draws = get<Index>(c, "draws");
  const Index max_p = get<Index>(c, "max_p");
  const Index max_groups = get<Index>(c, "max_groups");
  require(draws >= 1 && max_p >= 2 && max_groups >= 1, "holder: draws >= 1, max-p >= 2, max-groups >= 1");
  const auto seed = get<std::uint64_t>(c, "seed");
  Index violations = 0;
  double worst = -std::numeric_limits<double>::infinity();
  std::string csv = "draw,p,groups,lhs,rhs,holds\n";
  for (Index k = 0; k < draws; ++k) {
    Rng rng = make_rng(seed, static_cast<std::uint64_t>(k));
    const GroupCollection g = random_collection(rng, max_p, max_groups);
    const Vector alpha = standard_normal(g.p(), rng);
    const Vector beta = standard_normal(g.p(), rng);
    const HolderCheck h = holder_extension_check(alpha, beta, g);
    violations += !h.holds;
    worst = std::max(worst, h.lhs - h.rhs);
    csv += join_csv({num(k + 1), num(g.p()), num(g.size()), num(h.lhs), num(h.rhs), flag(h.holds)});
  }
  Output out;
  out.name = "holder";
  out.result["draws"] = draws;
  out.result["violations"] = violations;
  out.result["max_lhs_minus_rhs"] = worst;
  out.files["holder.csv"] = csv;
  return out;
}

// ---------------------------------------------------------------- asymptotics

Output run_asymptotics(const Json& c, const Runtime& rt) {
  const std::string preset = get<std::string>(c, "preset");
  const auto groups_path = get_optional<std::string>(c, "groups");
  const auto beta_path = get_optional<std::string>(c, "beta0");
  std::optional<GroupCollection> groups;
  Vector beta0;
  if (groups_path || beta_path) {
    require(groups_path && beta_path, "pass both --groups and --beta0, or neither");
    groups = io::groups_from_json(io::read_json(*groups_path));
    beta0 = io::vector_from_json(io::read_json(*beta_path), "beta0");
  } else {
    groups = make_contiguous_groups(10, 2, 1);
    beta0 = Vector::Zero(10);
    if (preset == "correct") {
      beta0.head(4) << 1.0, -0.8, 0.6, 1.2;
    } else if (preset == "wrong") {
      beta0.head(3) << 1.0, -0.8, 0.6;
    } else {
      throw ValidationError("unknown preset '" + preset + "' (expected correct or wrong)");
    }
  }
  AsymptoticOptions o;
  o.sigma = get<double>(c, "sigma");
  o.n_grid = get<std::vector<Index>>(c, "n_grid");
  o.gamma = get<double>(c, "gamma");
  o.rule.c = get<double>(c, "lambda_scale");
  o.rule.exponent = get<double>(c, "lambda_exponent");
  o.trials = get<Index>(c, "trials");
  o.seed = get<std::uint64_t>(c, "seed");
  o.design = design_covariance_from_string(get<std::string>(c, "design"));
  o.ar_rho = get<double>(c, "ar_rho");
  o.jobs = rt.jobs;
  const AsymptoticReport rep = run_asymptotic_study(*groups, beta0, o);

  Output out;
  out.name = "asymptotics";
  Json& r = out.result;
  r["groups"] = io::groups_to_json(*groups);
  r["beta0"] = io::vector_to_json(beta0);
  r["partition"] = {{"H", one_based(rep.partition.H)},       {"H_c", one_based(rep.partition.H_c)},
                    {"G_H", one_based(rep.partition.G_H)},   {"G_Hc", one_based(rep.partition.G_Hc)},
                    {"G_Ho", one_based(rep.partition.G_Ho)}};
  r["separation_of_support"] = separation_of_support_holds(beta0, *groups);
  Json cells = Json::array();
  Index excluded = 0;
  for (const auto& cell : rep.cells) {
    excluded += cell.excluded;
    cells.push_back({{"n", cell.n},
                     {"lambda", cell.lambda},
                     {"excluded", cell.excluded},
                     {"recovery_rate", cell.recovery_rate},
                     {"false_positive_rate", cell.false_positive_rate},
                     {"frobenius_relative_error", cell.frobenius_relative_error},
                     {"empirical_covariance", matrix_json(cell.empirical_covariance)},
                     {"target_covariance", matrix_json(cell.target_covariance)},
                     {"max_off_support_quantiles",
                      {{"0.5", cell.max_off_support_quantiles[0]},
                       {"0.9", cell.max_off_support_quantiles[1]},
                       {"0.99", cell.max_off_support_quantiles[2]},
                       {"1", cell.max_off_support_quantiles[3]}}},
                     {"straddle_p95", cell.straddle_p95}});
  }
  r["cells"] = cells;
  r["frobenius_non_increasing"] = rep.frobenius_non_increasing;
  if (get<bool>(c, "check_assumption")) {
    AssumptionOptions ao;
    ao.seed = o.seed;
    const AssumptionVerdict v = check_assumption_correct(beta0, *groups, ao);
    r["assumption"] = {{"violated", v.violated}, {"details", v.details}};
  }
  std::string csv = "n,trial,converged,support_match,false_positive,max_off_support,straddle_statistic\n";
  for (const auto& t : rep.trials)
    csv += join_csv({num(t.n), num(t.trial + 1), flag(t.converged), flag(t.support_match), flag(t.false_positive),
                     num(t.max_off_support), num(t.straddle_statistic)});
  out.files["asymptotics_trials.csv"] = csv;
  const double total = static_cast<double>(o.trials) * static_cast<double>(o.n_grid.size());
  out.status = static_cast<double>(excluded) <= 0.05 * total ? kExitOk : kExitNumerical;
  return out;
}

// ---------------------------------------------------------------- simulate

Json summary_json(const EstimatorSummary& s) {
  Json j;
  j["mean_error"] = s.mean_error;
  j["se_error"] = s.se_error;
  j["mean_support"] = s.mean_support;
  j["mean_lambda"] = s.mean_lambda;
  j["excluded"] = s.excluded;
  if (s.runtime_seconds) j["runtime_seconds"] = *s.runtime_seconds;
  return j;
}

Output run_simulate(const Json& c, const Runtime& rt) {
  ExperimentConfig cfg;
  cfg.study = study_from_string(get<std::string>(c, "experiment"));
  cfg.scale = get<double>(c, "scale");
  cfg.trials = get<Index>(c, "trials");
  cfg.sigma = get<double>(c, "sigma");
  cfg.selection = lambda_selection_from_string(get<std::string>(c, "lambda_rule"));
  cfg.grid_points = get<int>(c, "grid_points");
  cfg.tolerance = get<double>(c, "tolerance");
  cfg.seed = get<std::uint64_t>(c, "seed");
  cfg.record_timing = get<bool>(c, "record_timing");
  cfg.jobs = rt.jobs;
  const ExperimentResult res = run_study(cfg);

  Output out;
  out.name = "simulate";
  Json cells = Json::array();
  std::string plot = std::string(cfg.study == Study::Overlap ? "overlap" : "n") +
                     ",lasso_mean,lasso_se,overlap_lasso_mean,overlap_lasso_se\n";
  Index excluded = 0;
  for (const auto& cell : res.cells) {
    excluded += cell.lasso.excluded + cell.overlap_lasso.excluded;
    cells.push_back({{"overlap", cell.overlap},
                     {"n", cell.n},
                     {"p", cell.p},
                     {"groups", cell.groups},
                     {"k", cell.k},
                     {"support", cell.support},
                     {"lasso", summary_json(cell.lasso)},
                     {"overlap_lasso", summary_json(cell.overlap_lasso)}});
    plot += join_csv({num(cfg.study == Study::Overlap ? cell.overlap : cell.n), num(cell.lasso.mean_error),
                      num(cell.lasso.se_error), num(cell.overlap_lasso.mean_error),
                      num(cell.overlap_lasso.se_error)});
  }
  out.result["experiment"] = to_string(cfg.study);
  out.result["cells"] = cells;
  std::string csv = "overlap,n,trial,lasso_converged,lasso_error,lasso_lambda,lasso_support,overlap_converged,"
                    "overlap_error,overlap_lambda,overlap_support";
  csv += cfg.record_timing ? ",lasso_seconds,overlap_seconds\n" : "\n";
  for (const auto& t : res.trials) {
    const auto& cell = res.cells[t.cell];
    std::vector<std::string> row{num(cell.overlap),       num(cell.n),          num(t.trial + 1),
                                 flag(t.lasso_converged), num(t.lasso_error),   num(t.lasso_lambda),
                                 num(t.lasso_support),    flag(t.overlap_converged), num(t.overlap_error),
                                 num(t.overlap_lambda),   num(t.overlap_support)};
    if (cfg.record_timing) {
      row.push_back(num(t.lasso_seconds));
      row.push_back(num(t.overlap_seconds));
    }
    csv += join_csv(row);
  }
  out.files["simulate_trials.csv"] = csv;
  out.files["plot.csv"] = plot;
  const double total = 2.0 * static_cast<double>(cfg.trials) * static_cast<double>(res.cells.size());
  out.status = static_cast<double>(excluded) <= 0.05 * total ? kExitOk : kExitNumerical;
  return out;
}

// ---------------------------------------------------------------- groups, generate

std::map<std::string, Index> parse_key_values(const std::vector<std::string>& tokens) {
  std::map<std::string, Index> kv;
  for (const auto& t : tokens) {
    const auto eq = t.find('=');
    if (eq == std::string::npos) throw ValidationError("expected key=value, got '" + t + "'");
    const std::string key = t.substr(0, eq);
    const std::string value = t.substr(eq + 1);
    try {
      std::size_t used = 0;
      const long long v = std::stoll(value, &used);
      if (used != value.size()) throw std::invalid_argument(value);
      kv[key] = static_cast<Index>(v);
    } catch (const std::exception&) {
      throw ValidationError("value of '" + key + "' must be an integer, got '" + value + "'");
    }
  }
  return kv;
}

Output run_groups(const Json& c, const Runtime&) {
  const auto singletons = get_optional<Index>(c, "singletons");
  std::optional<GroupCollection> groups;
  if (singletons) {
    groups = GroupCollection::singletons(*singletons);
  } else {
    const Json& spec = c.at("contiguous");
    require(spec.is_object() && !spec.empty(), "pass --contiguous p=.. size=.. overlap=.. or --singletons p");
    for (const char* key : {"p", "size", "overlap"})
      require(spec.contains(key), std::string("--contiguous needs ") + key + "=..");
    groups = make_contiguous_groups(get<Index>(spec, "p"), get<Index>(spec, "size"), get<Index>(spec, "overlap"));
  }
  Output out;
  out.name = "groups";
  out.result = io::groups_to_json(*groups);
  return out;
}

Output run_generate(const Json& c, const Runtime&) {
  const Index p = get<Index>(c, "p");
  const GroupCollection groups = make_contiguous_groups(p, get<Index>(c, "group_size"), get<Index>(c, "overlap"));
  const Index k = get<Index>(c, "k");
  const Index n = get<Index>(c, "n");
  const double sigma = get<double>(c, "sigma");
  const auto seed = get<std::uint64_t>(c, "seed");
  const Normalization norm = normalization_from_string(get<std::string>(c, "normalization"));
  ProblemInstance inst;
  if (norm == Normalization::RowUnitNorm) {
    inst = generate_instance(p, n, groups, k, sigma, seed);
  } else if (norm == Normalization::ColumnUnitDiag) {
    inst = theorem_instance(groups, n, k, sigma, seed);
  } else {
    throw ValidationError("generate: normalization must be row-unit-norm or column-unit-diag");
  }
  Output out;
  out.name = "instance";
  out.result = io::instance_to_json(inst);
  out.files["groups.json"] = io::dump(io::groups_to_json(groups));
  if (get<bool>(c, "csv")) {
    out.files["X.csv"] = io::matrix_csv(inst.X);
    out.files["y.csv"] = io::vector_csv(inst.y, "y");
    out.files["beta0.csv"] = io::vector_csv(*inst.beta0, "beta0");
  }
  return out;
}

// ---------------------------------------------------------------- plumbing

Output execute(const std::string& subcommand, const Json& config, const Runtime& rt) {
  if (subcommand == "norm") return run_norm(config, rt);
  if (subcommand == "fit") return run_fit(config, rt);
  if (subcommand == "asymptotics") return run_asymptotics(config, rt);
  if (subcommand == "simulate") return run_simulate(config, rt);
  if (subcommand == "groups") return run_groups(config, rt);
  if (subcommand == "generate") return run_generate(config, rt);
  if (subcommand == "verify") {
    const std::string check = get<std::string>(config, "check");
    if (check == "theorem1") return run_verify_theorem1(config, rt);
    if (check == "oracle") return run_verify_oracle(config, rt);
    if (check == "kappa") return run_verify_kappa(config, rt);
    if (check == "chi2") return run_verify_chi2(config, rt);
    if (check == "holder") return run_verify_holder(config, rt);
    throw ValidationError("unknown verify check '" + check + "'");
  }
  throw ValidationError("unknown subcommand '" + subcommand + "'");
}

Json manifest(const std::string& subcommand, const Json& config) {
  Json m;
  m["tool"] = "ogl";
  m["version"] = OGL_VERSION;
  m["subcommand"] = subcommand;
  m["seed"] = config.contains("seed") ? config.at("seed") : Json(nullptr);
  m["config"] = config;
  return m;
}

void emit(const std::string& subcommand, const Json& config, const Output& out, const Runtime& rt) {
  const std::string result = io::dump(out.result);
  std::cout << result;
  if (rt.out_dir.empty()) return;
  const std::string dir = rt.out_dir + "/";
  io::write_text(dir + out.name + ".json", result);
  for (const auto& [name, content] : out.files) io::write_text(dir + name, content);
  io::write_text(dir + "manifest.json", io::dump(manifest(subcommand, config)));
}

std::string resolve_out_dir(const std::string& flag_value) {
  if (const char* env = std::getenv("OGL_OUTPUT_DIR"); env != nullptr && *env != '\0') return env;
  return flag_value;
}

template <class T>
std::string csv_list(const std::vector<T>& v) {
  std::ostringstream ss;
  for (std::size_t k = 0; k < v.size(); ++k) ss << (k ? "," : "") << v[k];
  return ss.str();
}

}  // namespace

int dispatch(int argc, char** argv) {
  CLI::App app{"Overlapping group lasso: norm, fits, theory checks and simulations", "ogl"};
  app.set_version_flag("--version", std::string(OGL_VERSION));
  app.fallthrough();

  std::uint64_t seed = 0;
  int jobs = 0;
  std::string out_dir = "ogl-output";
  std::string replay;
  app.add_option("--seed", seed, "Seed for every random draw")->capture_default_str();
  app.add_option("--jobs", jobs, "Worker threads for trial fan-out (0 = all cores)")->capture_default_str();
  app.add_option("--out", out_dir, "Output directory (overridden by OGL_OUTPUT_DIR); empty disables files")
      ->capture_default_str();
  app.add_option("--replay", replay, "Re-run the configuration stored in a manifest.json");

  // norm
  auto* norm = app.add_subcommand("norm", "Overlap norm and its minimizing decomposition");
  std::string norm_beta, norm_groups;
  double norm_tol = 1e-8;
  int norm_iters = 100000;
  norm->add_option("--beta", norm_beta, "JSON coefficient vector")->required();
  norm->add_option("--groups", norm_groups, "JSON group collection")->required();
  norm->add_option("--tolerance", norm_tol, "Duality-gap tolerance")->capture_default_str();
  norm->add_option("--max-iters", norm_iters, "Iteration cap")->capture_default_str();

  // fit
  auto* fitc = app.add_subcommand("fit", "Overlapping group lasso fit or path");
  std::string fit_instance, fit_groups;
  std::optional<double> fit_lambda;
  std::optional<int> fit_path_points;
  double fit_ratio = 1e-4, fit_gamma = 1.0, fit_tol = 1e-8;
  int fit_iters = 100000;
  bool fit_adaptive = false, fit_csv = false;
  fitc->add_option("--instance", fit_instance, "JSON problem instance")->required();
  fitc->add_option("--groups", fit_groups, "JSON group collection")->required();
  fitc->add_option("--lambda", fit_lambda, "Single penalty level");
  fitc->add_option("--path", fit_path_points, "Number of log-spaced lambdas from lambda_max");
  fitc->add_option("--lambda-ratio", fit_ratio, "Smallest path lambda as a fraction of lambda_max")
      ->capture_default_str();
  fitc->add_flag("--adaptive", fit_adaptive, "Use adaptive weights 1/||v_g^OLS||^gamma");
  fitc->add_option("--gamma", fit_gamma, "Adaptive weight exponent")->capture_default_str();
  fitc->add_option("--tolerance", fit_tol, "KKT tolerance")->capture_default_str();
  fitc->add_option("--max-iters", fit_iters, "Sweep cap")->capture_default_str();
  fitc->add_flag("--csv", fit_csv, "Also write coefficients.csv");

  // verify
  auto* verify = app.add_subcommand("verify", "Finite-sample bounds and inequality checks");
  verify->require_subcommand(1);
  struct FamilyFlags {
    std::string instance, groups;
    Index p = 64, n = 128, group_size = 8, overlap = 2, k = 2;
    double sigma = 0.1, A = 9.0;
    Index trials = 200;
    std::string lambda_choice = "theorem";
    std::optional<Index> s;
    std::optional<double> kappa;
    int kappa_samples = 2000, refine_steps = 3000;
  } fam;
  auto add_family = [&](CLI::App* sub, bool with_trials) {
    sub->add_option("--instance", fam.instance, "JSON instance (column-unit-diag) instead of a generated one");
    sub->add_option("--groups", fam.groups, "JSON groups for --instance");
    sub->add_option("--p", fam.p, "Generated design: predictors")->capture_default_str();
    sub->add_option("--n", fam.n, "Generated design: samples")->capture_default_str();
    sub->add_option("--group-size", fam.group_size, "Generated design: group size")->capture_default_str();
    sub->add_option("--overlap", fam.overlap, "Generated design: overlap parameter")->capture_default_str();
    sub->add_option("--k", fam.k, "Generated design: active leading groups")->capture_default_str();
    sub->add_option("--sigma", fam.sigma, "Noise level")->capture_default_str();
    sub->add_option("--s", fam.s, "Sparsity level s (default M(beta0), or 1 for kappa)");
    sub->add_option("--kappa-samples", fam.kappa_samples, "Directions sampled for kappa")->capture_default_str();
    sub->add_option("--refine-steps", fam.refine_steps, "Local search steps for kappa")->capture_default_str();
    if (with_trials) {
      sub->add_option("--A", fam.A, "Constant A > 8")->capture_default_str();
      sub->add_option("--trials", fam.trials, "Monte Carlo trials")->capture_default_str();
      sub->add_option("--lambda", fam.lambda_choice, "theorem or alt")->capture_default_str();
      sub->add_option("--kappa", fam.kappa, "Use this kappa instead of estimating it");
    }
  };
  auto* v_theorem = verify->add_subcommand("theorem1", "Prediction and estimation bounds, Monte Carlo");
  add_family(v_theorem, true);
  auto* v_oracle = verify->add_subcommand("oracle", "Oracle inequality, Monte Carlo");
  add_family(v_oracle, true);
  auto* v_kappa = verify->add_subcommand("kappa", "Restricted eigenvalue estimate");
  add_family(v_kappa, false);
  auto* v_chi2 = verify->add_subcommand("chi2", "Chi-squared tail bound against Monte Carlo");
  std::vector<Index> chi_dims{1, 2, 4, 8, 16};
  std::vector<double> chi_mults{0.5, 1, 2, 4};
  Index chi_samples = 1000000;
  v_chi2->add_option("--dims", chi_dims, "Degrees of freedom")->delimiter(',')->capture_default_str();
  v_chi2->add_option("--multipliers", chi_mults, "x as multiples of D")->delimiter(',')->capture_default_str();
  v_chi2->add_option("--samples", chi_samples, "Monte Carlo draws per point")->capture_default_str();
  auto* v_holder = verify->add_subcommand("holder", "Overlap Hoelder inequality on random triples");
  Index h_draws = 1000, h_max_p = 8, h_max_groups = 6;
  v_holder->add_option("--draws", h_draws, "Random triples")->capture_default_str();
  v_holder->add_option("--max-p", h_max_p, "Largest p")->capture_default_str();
  v_holder->add_option("--max-groups", h_max_groups, "Largest group count")->capture_default_str();

  // asymptotics
  auto* asym = app.add_subcommand("asymptotics", "Adaptive estimator over a growing n grid");
  std::string a_preset = "correct", a_groups, a_beta, a_design = "identity";
  double a_sigma = 1.0, a_gamma = 1.0, a_exp = 0.7, a_scale = 1.0, a_rho = 0.3;
  std::vector<Index> a_grid{250, 1000, 4000};
  Index a_trials = 300;
  bool a_check = false;
  asym->add_option("--preset", a_preset, "correct (disjoint groups, union support) or wrong (straddling support)")
      ->capture_default_str();
  asym->add_option("--groups", a_groups, "JSON groups instead of a preset");
  asym->add_option("--beta0", a_beta, "JSON beta0 instead of a preset");
  asym->add_option("--sigma", a_sigma, "Noise level")->capture_default_str();
  asym->add_option("--gamma", a_gamma, "Adaptive weight exponent")->capture_default_str();
  asym->add_option("--lambda-exponent", a_exp, "lambda = c n^-a")->capture_default_str();
  asym->add_option("--lambda-scale", a_scale, "c in lambda = c n^-a")->capture_default_str();
  asym->add_option("--n-grid", a_grid, "Sample sizes")->delimiter(',')->capture_default_str();
  asym->add_option("--trials", a_trials, "Trials per n")->capture_default_str();
  asym->add_option("--design", a_design, "identity or ar1")->capture_default_str();
  asym->add_option("--ar-rho", a_rho, "AR(1) correlation")->capture_default_str();
  asym->add_flag("--check-assumption", a_check, "Probe the unique-decomposition assumption at beta0");

  // simulate
  auto* sim = app.add_subcommand("simulate", "Lasso versus overlap lasso recovery study");
  std::string s_experiment = "overlap", s_rule = "oracle";
  double s_scale = 1.0, s_sigma = 0.01, s_tol = 1e-6;
  Index s_trials = 20;
  int s_grid = 50;
  bool s_timing = false;
  sim->add_option("--experiment", s_experiment, "overlap or sample-size")->capture_default_str();
  sim->add_option("--scale", s_scale, "Shrink factor for p and n")->capture_default_str();
  sim->add_option("--trials", s_trials, "Trials per cell")->capture_default_str();
  sim->add_option("--sigma", s_sigma, "Noise level")->capture_default_str();
  sim->add_option("--lambda-rule", s_rule, "oracle or holdout")->capture_default_str();
  sim->add_option("--grid-points", s_grid, "Lambda grid size")->capture_default_str();
  sim->add_option("--tolerance", s_tol, "KKT tolerance")->capture_default_str();
  sim->add_flag("--record-timing", s_timing, "Add wall-clock times (makes output run-dependent)");

  // groups
  auto* grp = app.add_subcommand("groups", "Emit a group collection");
  std::vector<std::string> g_contiguous;
  std::optional<Index> g_singletons;
  grp->add_option("--contiguous", g_contiguous, "p=.. size=.. overlap=..")->expected(3);
  grp->add_option("--singletons", g_singletons, "One group per predictor");

  // generate
  auto* gen = app.add_subcommand("generate", "Synthetic instance");
  Index gen_p = 128, gen_n = 48, gen_size = 8, gen_overlap = 1, gen_k = 2;
  double gen_sigma = 0.01;
  std::string gen_norm = "row-unit-norm";
  bool gen_csv = false;
  gen->add_option("--p", gen_p, "Predictors")->capture_default_str();
  gen->add_option("--n", gen_n, "Samples")->capture_default_str();
  gen->add_option("--group-size", gen_size, "Group size")->capture_default_str();
  gen->add_option("--overlap", gen_overlap, "Overlap parameter")->capture_default_str();
  gen->add_option("--k", gen_k, "Active leading groups")->capture_default_str();
  gen->add_option("--sigma", gen_sigma, "Noise level")->capture_default_str();
  gen->add_option("--normalization", gen_norm, "row-unit-norm or column-unit-diag")->capture_default_str();
  gen->add_flag("--csv", gen_csv, "Also write X.csv, y.csv and beta0.csv");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInvalid;
  }

  try {
    Runtime rt;
    rt.jobs = jobs;
    rt.out_dir = resolve_out_dir(out_dir);
    std::string subcommand;
    Json config;

    if (!replay.empty()) {
      const Json m = io::read_json(replay);
      require(m.is_object() && m.value("tool", "") == "ogl", "not an ogl manifest: " + replay);
      subcommand = get<std::string>(m, "subcommand");
      config = m.at("config");
    } else if (norm->parsed()) {
      subcommand = "norm";
      config = {{"beta", norm_beta}, {"groups", norm_groups}, {"tolerance", norm_tol}, {"max_iters", norm_iters}};
    } else if (fitc->parsed()) {
      subcommand = "fit";
      config = {{"instance", fit_instance},       {"groups", fit_groups},    {"lambda", optional_json(fit_lambda)},
                {"path", optional_json(fit_path_points)}, {"lambda_ratio", fit_ratio}, {"adaptive", fit_adaptive},
                {"gamma", fit_gamma},             {"tolerance", fit_tol},    {"max_iters", fit_iters},
                {"csv", fit_csv}};
    } else if (verify->parsed()) {
      subcommand = "verify";
      CLI::App* chosen = verify->get_subcommands().front();
      config["check"] = chosen->get_name();
      config["seed"] = seed;
      if (chosen == v_chi2) {
        config["dims"] = chi_dims;
        config["multipliers"] = chi_mults;
        config["samples"] = chi_samples;
      } else if (chosen == v_holder) {
        config["draws"] = h_draws;
        config["max_p"] = h_max_p;
        config["max_groups"] = h_max_groups;
      } else {
        config["instance"] = fam.instance.empty() ? Json(nullptr) : Json(fam.instance);
        config["groups"] = fam.groups.empty() ? Json(nullptr) : Json(fam.groups);
        config["p"] = fam.p;
        config["n"] = fam.n;
        config["group_size"] = fam.group_size;
        config["overlap"] = fam.overlap;
        config["k"] = fam.k;
        config["sigma"] = fam.sigma;
        config["s"] = optional_json(fam.s);
        config["kappa_samples"] = fam.kappa_samples;
        config["refine_steps"] = fam.refine_steps;
        if (chosen != v_kappa) {
          config["A"] = fam.A;
          config["trials"] = fam.trials;
          config["lambda_choice"] = fam.lambda_choice;
          config["kappa"] = optional_json(fam.kappa);
        }
      }
    } else if (asym->parsed()) {
      subcommand = "asymptotics";
      config = {{"preset", a_preset},
                {"groups", a_groups.empty() ? Json(nullptr) : Json(a_groups)},
                {"beta0", a_beta.empty() ? Json(nullptr) : Json(a_beta)},
                {"sigma", a_sigma},
                {"gamma", a_gamma},
                {"lambda_exponent", a_exp},
                {"lambda_scale", a_scale},
                {"n_grid", a_grid},
                {"trials", a_trials},
                {"design", a_design},
                {"ar_rho", a_rho},
                {"check_assumption", a_check},
                {"seed", seed}};
    } else if (sim->parsed()) {
      subcommand = "simulate";
      config = {{"experiment", s_experiment}, {"scale", s_scale},         {"trials", s_trials},
                {"sigma", s_sigma},           {"lambda_rule", s_rule},    {"grid_points", s_grid},
                {"tolerance", s_tol},         {"record_timing", s_timing}, {"seed", seed}};
    } else if (grp->parsed()) {
      subcommand = "groups";
      Json spec = Json::object();
      for (const auto& [k, v] : parse_key_values(g_contiguous)) spec[k] = v;
      config = {{"contiguous", spec}, {"singletons", optional_json(g_singletons)}};
    } else if (gen->parsed()) {
      subcommand = "generate";
      config = {{"p", gen_p},         {"n", gen_n},         {"group_size", gen_size},
                {"overlap", gen_overlap}, {"k", gen_k},     {"sigma", gen_sigma},
                {"normalization", gen_norm}, {"csv", gen_csv}, {"seed", seed}};
    } else {
      std::cerr << app.help();
      return kExitInvalid;
    }

    const Output out = execute(subcommand, config, rt);
    emit(subcommand, config, out, rt);
    if (out.status == kExitNumerical) std::cerr << "error: numerical failure (non-convergence); results written\n";
    return out.status;
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInvalid;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInvalid;
  } catch (const NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const std::exception& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return kExitNumerical;
  }
}

}  // namespace ogl::cli
