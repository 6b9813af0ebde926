#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <limits>

#include "ogl/asymptotics.hpp"
#include "ogl/overlap_norm.hpp"
#include "ogl/solver.hpp"
#include "ogl/theory.hpp"

namespace py = pybind11;
using namespace ogl;

namespace {

using OneBased = std::vector<std::vector<Index>>;

GroupCollection to_groups(const OneBased& groups, Index p) { return GroupCollection::from_one_based(groups, p); }

std::vector<Index> one_based(const IndexSet& s) {
  std::vector<Index> out;
  for (Index i : s) out.push_back(i + 1);
  return out;
}

ProblemInstance make_instance(const Matrix& X, const Vector& y) {
  ProblemInstance inst;
  inst.X = X;
  inst.y = y;
  inst.validate();
  return inst;
}

py::list parts(const Decomposition& d) {
  py::list out;
  for (const auto& v : d.parts) out.append(Vector(v));
  return out;
}

py::dict fit_dict(const FitResult& r) {
  py::dict d;
  d["beta"] = r.beta_hat;
  d["parts"] = parts(r.decomposition);
  d["lambda"] = r.lambda;
  d["converged"] = r.converged;
  d["iterations"] = r.iterations;
  d["objective"] = r.objective;
  d["kkt_residual"] = r.kkt_residual;
  return d;
}

std::optional<std::vector<double>> weights_from(const std::optional<std::vector<std::optional<double>>>& w) {
  if (!w) return std::nullopt;
  std::vector<double> out;
  for (const auto& x : *w) out.push_back(x ? *x : std::numeric_limits<double>::infinity());
  return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Overlapping group lasso core";
  m.attr("__version__") = OGL_VERSION;

  py::register_exception<ValidationError>(m, "ValidationError", PyExc_ValueError);
  py::register_exception<NumericalError>(m, "NumericalError", PyExc_ArithmeticError);

  m.def(
      "contiguous_groups",
      [](Index p, Index size, Index overlap) { return make_contiguous_groups(p, size, overlap).to_one_based(); },
      py::arg("p"), py::arg("size"), py::arg("overlap"), "Contiguous groups as 1-based index lists.");

  m.def(
      "overlap_norm",
      [](const Vector& beta, const OneBased& groups, double tolerance) {
        NormOptions o;
        o.tolerance = tolerance;
        const auto g = to_groups(groups, beta.size());
        const auto ss = structured_sparsity(beta, g, o);
        py::dict d;
        d["value"] = ss.norm.value;
        d["dual_bound"] = ss.norm.dual_bound;
        d["converged"] = ss.norm.converged;
        d["parts"] = parts(ss.norm.decomposition);
        d["active"] = one_based(ss.active);
        d["minimal_active_count"] = ss.minimal;
        return d;
      },
      py::arg("beta"), py::arg("groups"), py::arg("tolerance") = 1e-8,
      "Overlap norm of beta with its minimizing decomposition.");

  m.def(
      "lambda_max",
      [](const Matrix& X, const Vector& y, const OneBased& groups) {
        return lambda_max(make_instance(X, y), to_groups(groups, X.cols()));
      },
      py::arg("X"), py::arg("y"), py::arg("groups"));

  m.def(
      "fit",
      [](const Matrix& X, const Vector& y, const OneBased& groups, double lam, double tolerance, int max_iters,
         const std::optional<std::vector<std::optional<double>>>& weights) {
        SolverConfig c;
        c.lambda = lam;
        c.tolerance = tolerance;
        c.max_iters = max_iters;
        c.weights = weights_from(weights);
        py::gil_scoped_release release;
        auto r = fit(make_instance(X, y), to_groups(groups, X.cols()), c);
        py::gil_scoped_acquire acquire;
        return fit_dict(r);
      },
      py::arg("X"), py::arg("y"), py::arg("groups"), py::arg("lam"), py::arg("tolerance") = 1e-8,
      py::arg("max_iters") = 100000, py::arg("weights") = py::none(),
      "Minimizes (1/n)||y - X b||^2 + 2 lam sum_g w_g ||v_g||. None weights mean a frozen group.");

  m.def(
      "fit_path",
      [](const Matrix& X, const Vector& y, const OneBased& groups, const std::vector<double>& lambdas,
         double tolerance) {
        SolverConfig c;
        c.tolerance = tolerance;
        auto path = fit_path(make_instance(X, y), to_groups(groups, X.cols()), lambdas, c);
        py::list out;
        for (const auto& r : path) out.append(fit_dict(r));
        return out;
      },
      py::arg("X"), py::arg("y"), py::arg("groups"), py::arg("lambdas"), py::arg("tolerance") = 1e-8);

  m.def(
      "adaptive_weights",
      [](const Matrix& X, const Vector& y, const OneBased& groups, double gamma) {
        const auto w = adaptive_weights(make_instance(X, y), to_groups(groups, X.cols()), gamma);
        std::vector<std::optional<double>> out;
        for (double x : w.weights) out.push_back(std::isinf(x) ? std::nullopt : std::optional<double>(x));
        return out;
      },
      py::arg("X"), py::arg("y"), py::arg("groups"), py::arg("gamma") = 1.0,
      "Per-group weights 1/||v_g^OLS||^gamma; None marks a frozen group.");

  m.def(
      "theory_constants",
      [](const Matrix& X, const OneBased& groups, double A, double sigma, Index s) {
        ProblemInstance inst = make_instance(X, Vector::Zero(X.rows()));
        const auto c = compute_constants(inst, to_groups(groups, X.cols()), A, sigma, s);
        py::dict d;
        d["lambda_theorem"] = c.lambda_theorem;
        d["lambda_alt"] = c.lambda_alt;
        d["lambda_oracle"] = c.lambda_oracle;
        d["q"] = c.q;
        d["q_alt"] = c.q_alt;
        d["rho_g"] = c.rho_g;
        d["rho_X"] = c.rho_X;
        d["kappa_upper"] = c.kappa_upper;
        d["overlap"] = c.overlap;
        d["M"] = c.M;
        return d;
      },
      py::arg("X"), py::arg("groups"), py::arg("A") = 9.0, py::arg("sigma") = 1.0, py::arg("s") = 1);

  m.def("chi2_tail_bound", &chi2_tail_bound, py::arg("D"), py::arg("x"));

  m.def(
      "partition_support",
      [](const Vector& beta0, const OneBased& groups, double zero_tol) {
        const auto part = partition_support(beta0, to_groups(groups, beta0.size()), zero_tol);
        py::dict d;
        d["H"] = one_based(part.H);
        d["H_c"] = one_based(part.H_c);
        d["G_H"] = one_based(part.G_H);
        d["G_Hc"] = one_based(part.G_Hc);
        d["G_Ho"] = one_based(part.G_Ho);
        return d;
      },
      py::arg("beta0"), py::arg("groups"), py::arg("zero_tol") = 0.0);

  m.def(
      "check_assumption",
      [](const Vector& beta0, const OneBased& groups, std::uint64_t seed) {
        AssumptionOptions o;
        o.seed = seed;
        const auto v = check_assumption_correct(beta0, to_groups(groups, beta0.size()), o);
        std::vector<std::string> reasons;
        for (auto r : v.reasons) reasons.push_back(to_string(r));
        py::dict d;
        d["violated"] = v.violated;
        d["reasons"] = reasons;
        d["details"] = v.details;
        return d;
      },
      py::arg("beta0"), py::arg("groups"), py::arg("seed") = 0);
}
