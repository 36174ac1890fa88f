#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "nestcov/estimators.hpp"
#include "nestcov/fisher.hpp"
#include "nestcov/io.hpp"
#include "nestcov/regularizers.hpp"
#include "nestcov/simulation.hpp"

namespace py = pybind11;
using namespace nestcov;

namespace {

py::dict fit_dict(const FitReport& r) {
  py::dict d;
  d["params"] = r.params;
  d["iterations"] = r.iterations;
  d["residual_norm"] = r.residual_norm;
  d["converged"] = r.converged;
  return d;
}

NeighborLevel level_from(const std::string& text) {
  if (text == "N4" || text == "n4") return NeighborLevel::N4;
  if (text == "N8" || text == "n8") return NeighborLevel::N8;
  if (text == "N12" || text == "n12") return NeighborLevel::N12;
  fail(ErrorKind::InvalidArgument, "neighbor level must be N4, N8 or N12");
}

SufficientStats stats_of(const Matrix& x) { return sufficient_stats(SampleSet(x)); }

py::list table_rows(const ExperimentTable& t) {
  py::list rows;
  for (const auto& r : t.rows) {
    py::dict d;
    d["estimator"] = r.estimator;
    d["N"] = r.N;
    d["mean_sq_frobenius"] = r.mean_sq_frobenius;
    d["std_error"] = r.std_error;
    d["replications"] = r.replications;
    d["failures"] = r.failures;
    rows.append(d);
  }
  return rows;
}

}  // namespace

PYBIND11_MODULE(_nestcov, m) {
  m.doc() = "Nested covariance estimators on Laplace spectra and grid GMRFs.";

  // The type outlives the module object; keep one reference for the translator.
  static py::handle error_type =
      py::exception<Error>(m, "NestcovError", PyExc_RuntimeError).inc_ref();
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      const std::string kind(to_string(e.kind()));
      py::object err = py::reinterpret_borrow<py::object>(error_type)(kind + ": " + e.what());
      err.attr("kind") = kind;
      PyErr_SetObject(error_type.ptr(), err.ptr());
    }
  });

  m.def("laplace_eigenvalues", &laplace_eigenvalues, py::arg("rows"), py::arg("cols"));

  m.def(
      "decay_diagonal",
      [](const Vector& lambda, double c1, double c2, double alpha) {
        return decay_diagonal(DecayModel::three_param(DecaySpectrum(lambda), c1, c2, alpha)).d();
      },
      py::arg("lambda_"), py::arg("c1"), py::arg("c2") = 0.0, py::arg("alpha"));

  m.def(
      "gaussian_sample",
      [](const Matrix& cov, Eigen::Index N, std::uint64_t seed) {
        return gaussian_sample(SpdMatrix::certified(cov), N, seed).data();
      },
      py::arg("cov"), py::arg("N"), py::arg("seed"),
      "Columns are independent N(0, cov) draws.");

  m.def("sample_covariance", [](const Matrix& x) { return sample_covariance(SampleSet(x)); },
        py::arg("x"));

  m.def(
      "fit_decay2",
      [](const Matrix& x, const Vector& lambda) {
        return fit_dict(fit_decay2(stats_of(x), DecaySpectrum(lambda)));
      },
      py::arg("x"), py::arg("lambda_"));

  m.def(
      "fit_decay3",
      [](const Matrix& x, const Vector& lambda) {
        return fit_dict(fit_decay3(stats_of(x), DecaySpectrum(lambda)));
      },
      py::arg("x"), py::arg("lambda_"));

  m.def(
      "fit_gmrf",
      [](const Matrix& sigma_hat, Eigen::Index rows, Eigen::Index cols, const std::string& level) {
        return fit_dict(fit_gmrf(sigma_hat, gmrf_structure(rows, cols, level_from(level))));
      },
      py::arg("sigma_hat"), py::arg("rows"), py::arg("cols"), py::arg("level") = "N4");

  m.def(
      "precision_matrix",
      [](const Vector& theta, Eigen::Index rows, Eigen::Index cols, const std::string& level) {
        return precision_matrix(gmrf_structure(rows, cols, level_from(level)), theta);
      },
      py::arg("theta"), py::arg("rows"), py::arg("cols"), py::arg("level") = "N4");

  m.def(
      "ledoit_wolf",
      [](const Matrix& x) {
        const ShrinkageResult r = ledoit_wolf(SampleSet(x));
        return py::make_tuple(r.estimate.values(), r.gamma, r.target_scale);
      },
      py::arg("x"), "Returns (estimate, gamma, mu).");

  m.def(
      "cond_reg",
      [](const Matrix& x, double kappa) { return cond_reg_estimate(SampleSet(x), kappa).values(); },
      py::arg("x"), py::arg("kappa"));

  m.def(
      "cond_reg_cv",
      [](const Matrix& x, const std::vector<double>& grid, int folds, std::uint64_t seed) {
        const CondRegResult r = cond_reg_cv(SampleSet(x), grid, folds, seed);
        return py::make_tuple(r.estimate.values(), r.kappa);
      },
      py::arg("x"), py::arg("kappa_grid"), py::arg("folds") = 5, py::arg("seed") = 0,
      "Returns (estimate, chosen kappa).");

  m.def(
      "nested_decay_covariances",
      [](const Vector& lambda, double c, double alpha) {
        const NestedDecayCovariances q = nested_decay_covariances(DecaySpectrum(lambda), c, alpha);
        py::dict d;
        d["diag"] = q.diag.matrix;
        d["decay3"] = q.decay3.matrix;
        d["decay2"] = q.decay2.matrix;
        return d;
      },
      py::arg("lambda_"), py::arg("c"), py::arg("alpha"));

  m.def(
      "run_experiment",
      [](const std::string& config_json, unsigned threads) {
        const ExperimentConfig c = parse_config_text(config_json);
        ExperimentTable t;
        {
          py::gil_scoped_release release;
          t = run_experiment(c, {threads});
        }
        return table_rows(t);
      },
      py::arg("config_json"), py::arg("threads") = 0,
      "Runs the experiment described by a JSON config and returns its rows.");

  m.def(
      "fisher_trace",
      [](const std::string& config_json) {
        py::list rows;
        for (const auto& r : fisher_trace_report(parse_config_text(config_json)))
          rows.append(py::make_tuple(r.model, r.N, r.value));
        return rows;
      },
      py::arg("config_json"));
}
