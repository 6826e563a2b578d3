#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "hsphere/density_io.hpp"
#include "hsphere/parallel.hpp"
#include "hsphere/simulation.hpp"

namespace py = pybind11;
using namespace hsphere;

namespace {

std::shared_ptr<Grid> mutable_grid(const GridPtr& grid) {
  return std::const_pointer_cast<Grid>(grid);
}

}  // namespace

PYBIND11_MODULE(_hsphere, m) {
  m.doc() = "Intrinsic statistics on the Hilbert sphere of square-root densities";

  py::register_exception<DimensionError>(m, "DimensionError", PyExc_ValueError);
  py::register_exception<DomainError>(m, "DomainError", PyExc_ValueError);
  py::register_exception<ValidationError>(m, "ValidationError", PyExc_ValueError);
  py::register_exception<ConditioningError>(m, "ConditioningError", PyExc_ArithmeticError);
  py::register_exception<ConvergenceError>(m, "ConvergenceError", PyExc_RuntimeError);

  py::class_<Grid, std::shared_ptr<Grid>>(m, "Grid")
      .def(py::init<Eigen::VectorXd, Eigen::VectorXd>(), py::arg("points"), py::arg("weights"))
      .def_property_readonly("points", &Grid::points)
      .def_property_readonly("weights", &Grid::weights)
      .def("__len__", &Grid::size)
      .def("inner", &Grid::inner, py::arg("f"), py::arg("g"))
      .def("norm", &Grid::norm, py::arg("f"));

  m.def("trapezoid_grid",
        [](Eigen::Index n, double a, double b) { return mutable_grid(trapezoid_grid(n, a, b)); },
        py::arg("n_points"), py::arg("a") = 0.0, py::arg("b") = 1.0);
  m.def("zone_grid",
        [](Eigen::VectorXd measures) { return mutable_grid(zone_grid(std::move(measures))); },
        py::arg("measures"));

  py::class_<SpherePoint>(m, "SpherePoint")
      .def_property_readonly("grid", [](const SpherePoint& p) { return mutable_grid(p.grid); })
      .def_readonly("coef", &SpherePoint::coef);
  m.def("sphere_point",
        [](std::shared_ptr<Grid> grid, Eigen::VectorXd coef) {
          return sphere_point(std::move(grid), std::move(coef));
        },
        py::arg("grid"), py::arg("coef"));
  m.def("sphere_point_normalized",
        [](std::shared_ptr<Grid> grid, Eigen::VectorXd coef) {
          return sphere_point_normalized(std::move(grid), std::move(coef));
        },
        py::arg("grid"), py::arg("coef"));
  m.def("constant_point",
        [](std::shared_ptr<Grid> grid) { return constant_point(std::move(grid)); },
        py::arg("grid"));

  py::class_<TangentVector>(m, "TangentVector")
      .def_readonly("base", &TangentVector::base)
      .def_readonly("coef", &TangentVector::coef)
      .def("norm", &tangent_norm);
  m.def("tangent_vector", &tangent_vector, py::arg("base"), py::arg("coef"));
  m.def("tangent_projected", &tangent_projected, py::arg("base"), py::arg("coef"));

  py::class_<TangentOperator>(m, "TangentOperator")
      .def_readonly("base", &TangentOperator::base)
      .def_readonly("matrix", &TangentOperator::mat,
                    "Symmetric matrix in weighted (w^(1/2)-scaled) coordinates");

  m.def("inner",
        py::overload_cast<const TangentVector&, const TangentVector&>(&inner),
        py::arg("u"), py::arg("v"));
  m.def("geodesic_distance", &geodesic_distance, py::arg("p"), py::arg("q"));
  m.def("exp_map", &exp_map, py::arg("p"), py::arg("v"));
  m.def("log_map", &log_map, py::arg("p"), py::arg("x"));
  m.def("parallel_transport", &parallel_transport, py::arg("x"), py::arg("y"), py::arg("v"));
  m.def("transport_operator", &transport_operator, py::arg("x"), py::arg("y"), py::arg("a"));
  m.def("rotation_operator", &rotation_operator, py::arg("q"), py::arg("p"));
  m.def("hessian_operator", &hessian_operator, py::arg("x"), py::arg("mu"));
  m.def("apply", &apply, py::arg("a"), py::arg("v"));

  py::class_<SampleSet>(m, "SampleSet")
      .def(py::init([](std::shared_ptr<Grid> grid, Eigen::MatrixXd coefs) {
             return SampleSet(std::move(grid), std::move(coefs));
           }),
           py::arg("grid"), py::arg("coefs"), "Columns are unit-norm sphere points")
      .def(py::init<const std::vector<SpherePoint>&>(), py::arg("points"))
      .def("__len__", &SampleSet::size)
      .def_property_readonly("coefs", &SampleSet::coefs)
      .def_property_readonly("grid", [](const SampleSet& s) { return mutable_grid(s.grid()); })
      .def("point", &SampleSet::point, py::arg("i"))
      .def("resample", &SampleSet::resample, py::arg("indices"));

  py::class_<SupportCheck>(m, "SupportCheck")
      .def_readonly("diameter", &SupportCheck::diameter)
      .def_readonly("satisfied", &SupportCheck::satisfied);
  m.def("check_support", &check_support, py::arg("sample"));

  py::class_<FrechetMeanResult>(m, "FrechetMeanResult")
      .def_readonly("mean", &FrechetMeanResult::mean)
      .def_readonly("iterations", &FrechetMeanResult::iterations)
      .def_readonly("final_gradient_norm", &FrechetMeanResult::final_gradient_norm)
      .def_readonly("functional_value", &FrechetMeanResult::functional_value);
  m.def("frechet_mean",
        [](const SampleSet& sample, double tol, int max_iter) {
          return frechet_mean(sample, FrechetMeanOptions{tol, max_iter});
        },
        py::arg("sample"), py::arg("tol") = 1e-10, py::arg("max_iter") = 200);
  m.def("frechet_functional", &frechet_functional, py::arg("sample"), py::arg("p"));
  m.def("extrinsic_mean", &extrinsic_mean, py::arg("sample"));

  m.def("tangent_vectors", &tangent_vectors, py::arg("sample"), py::arg("mean"));
  m.def("covariance_operator", &covariance_operator, py::arg("vectors"));
  m.def("lambda_hat", &lambda_hat, py::arg("sample"), py::arg("mean"));
  m.def("asymptotic_covariance", &asymptotic_covariance, py::arg("sample"), py::arg("mean"));
  m.def("transported_covariance", &transported_covariance, py::arg("sample"),
        py::arg("mean_hat"), py::arg("reference"));

  py::class_<EigenSystem>(m, "EigenSystem")
      .def_readonly("values", &EigenSystem::values)
      .def_readonly("vectors", &EigenSystem::vectors);
  m.def("eigen", &eigen, py::arg("a"), py::arg("max_rank"));
  m.def("fve_fractions", &fve_fractions, py::arg("values"));
  m.def("select_K", &select_K, py::arg("values"), py::arg("r"));

  py::class_<HOperator>(m, "HOperator")
      .def("matrix", &HOperator::matrix, py::arg("u"))
      .def("apply_to", &HOperator::apply_to, py::arg("u"), py::arg("h"));
  m.def("h_operator", &h_operator, py::arg("sample"), py::arg("mean"));

  py::enum_<StatKind>(m, "StatKind")
      .value("norm", StatKind::norm)
      .value("proj", StatKind::proj);

  py::class_<TestReport>(m, "TestReport")
      .def_readonly("statistic", &TestReport::statistic)
      .def_readonly("p_value", &TestReport::p_value)
      .def_readonly("method", &TestReport::method)
      .def_readonly("K", &TestReport::K)
      .def_readonly("fve_threshold", &TestReport::fve_threshold)
      .def_readonly("n_draws", &TestReport::n_draws)
      .def_readonly("n_boot", &TestReport::n_boot)
      .def_readonly("support_ok", &TestReport::support_ok)
      .def_readonly("support_diameter", &TestReport::support_diameter)
      .def_readonly("seed", &TestReport::seed)
      .def_readonly("chart", &TestReport::chart)
      .def_readonly("nonconvergent_replicates", &TestReport::nonconvergent_replicates)
      .def("__repr__", [](const TestReport& r) {
        return "<TestReport " + r.method + " statistic=" + std::to_string(r.statistic) +
               " p=" + std::to_string(r.p_value) + ">";
      });

  py::class_<NullSpectrum>(m, "NullSpectrum").def_readonly("values", &NullSpectrum::values);
  m.def("truncate_spectrum", &truncate_spectrum, py::arg("values"), py::arg("full_trace"));
  m.def("weighted_chisq_pvalue", &weighted_chisq_pvalue, py::arg("spectrum"),
        py::arg("observed"), py::arg("n_draws"), py::arg("seed"));
  m.def("chisq_upper_tail", &chisq_upper_tail, py::arg("k"), py::arg("x"));

  m.def("one_sample_norm", &one_sample_norm, py::arg("sample"), py::arg("mu0"),
        py::arg("n_draws") = 100000, py::arg("seed") = 0);
  m.def("one_sample_proj", &one_sample_proj, py::arg("sample"), py::arg("mu0"),
        py::arg("fve_threshold"), py::arg("seed") = 0);
  m.def("two_sample_norm", &two_sample_norm, py::arg("sample1"), py::arg("sample2"),
        py::arg("n_draws") = 100000, py::arg("seed") = 0);
  m.def("two_sample_proj", &two_sample_proj, py::arg("sample1"), py::arg("sample2"),
        py::arg("fve_threshold"), py::arg("seed") = 0);
  m.def("bootstrap_one_sample", &bootstrap_one_sample, py::arg("sample"), py::arg("mu0"),
        py::arg("n_boot"), py::arg("kind"), py::arg("fve_threshold") = 0.95,
        py::arg("seed") = 0);
  m.def("bootstrap_two_sample", &bootstrap_two_sample, py::arg("sample1"), py::arg("sample2"),
        py::arg("n_boot"), py::arg("kind"), py::arg("fve_threshold") = 0.95,
        py::arg("seed") = 0);
  m.def("extrinsic_two_sample", &extrinsic_two_sample, py::arg("sample1"), py::arg("sample2"),
        py::arg("n_boot"), py::arg("seed") = 0);
  m.def("flat_density_two_sample",
        [](std::shared_ptr<Grid> grid, const Eigen::MatrixXd& d1, const Eigen::MatrixXd& d2,
           long n_boot, std::uint64_t seed) {
          return flat_density_two_sample(std::move(grid), d1, d2, n_boot, seed);
        },
        py::arg("grid"), py::arg("densities1"), py::arg("densities2"), py::arg("n_boot"),
        py::arg("seed") = 0);

  py::enum_<ScoreDist>(m, "ScoreDist")
      .value("normal", ScoreDist::normal)
      .value("centered_exponential", ScoreDist::centered_exponential);

  py::class_<SimConfig>(m, "SimConfig")
      .def(py::init<>())
      .def_readwrite("n_g", &SimConfig::n_g)
      .def_readwrite("K_mu", &SimConfig::K_mu)
      .def_readwrite("K_X", &SimConfig::K_X)
      .def_readwrite("delta", &SimConfig::delta)
      .def_readwrite("score_dist", &SimConfig::score_dist)
      .def_readwrite("grid_size", &SimConfig::grid_size)
      .def_readwrite("runs", &SimConfig::runs)
      .def_readwrite("n_boot", &SimConfig::n_boot)
      .def_readwrite("n_draws", &SimConfig::n_draws)
      .def_readwrite("seed", &SimConfig::seed)
      .def_readwrite("alpha", &SimConfig::alpha)
      .def("validate", &SimConfig::validate);

  m.def("theta_spectrum", &theta_spectrum, py::arg("K_X"));
  m.def("trig_psi",
        [](const std::shared_ptr<Grid>& grid, int j) { return trig_psi(*grid, j); },
        py::arg("grid"), py::arg("j"));
  m.def("mean_mu1",
        [](std::shared_ptr<Grid> grid) { return mean_mu1(GridPtr(std::move(grid))); },
        py::arg("grid"));
  m.def("basis_phi", &basis_phi, py::arg("g_mean"), py::arg("k"));
  m.def("mean_mu2", &mean_mu2, py::arg("mu1"), py::arg("delta"), py::arg("K_mu"));
  m.def("draw_sample",
        [](const SimConfig& config, int group, std::uint64_t seed) {
          Rng rng = derive_rng(seed, 0);
          return draw_sample(config, group, rng);
        },
        py::arg("config"), py::arg("group"), py::arg("seed"));

  py::class_<PowerCell>(m, "PowerCell")
      .def_readonly("delta", &PowerCell::delta)
      .def_readonly("n_g", &PowerCell::n_g)
      .def_readonly("K_mu", &PowerCell::K_mu)
      .def_readonly("score_dist", &PowerCell::score_dist)
      .def_readonly("method", &PowerCell::method)
      .def_readonly("rejections", &PowerCell::rejections)
      .def_readonly("runs", &PowerCell::runs)
      .def_readonly("failures", &PowerCell::failures)
      .def_readonly("proportion", &PowerCell::proportion)
      .def_readonly("se", &PowerCell::se)
      .def_readonly("valid", &PowerCell::valid);
  py::class_<PowerTable>(m, "PowerTable").def_readonly("rows", &PowerTable::rows);

  py::class_<StudyConfig>(m, "StudyConfig")
      .def(py::init<>())
      .def_readwrite("base", &StudyConfig::base)
      .def_readwrite("deltas", &StudyConfig::deltas)
      .def_readwrite("methods", &StudyConfig::methods)
      .def_readwrite("fve", &StudyConfig::fve)
      .def("validate", &StudyConfig::validate);
  m.def("run_power_study", &run_power_study, py::arg("config"),
        py::call_guard<py::gil_scoped_release>());
  m.def("power_table_csv", &power_table_csv, py::arg("table"));
  m.def("power_table_json", &power_table_json, py::arg("table"));

  py::class_<DensityTable>(m, "DensityTable")
      .def_readonly("labels", &DensityTable::labels)
      .def_property_readonly("grid",
                             [](const DensityTable& t) { return mutable_grid(t.grid); })
      .def_readonly("densities", &DensityTable::densities);
  py::class_<IngestResult>(m, "IngestResult")
      .def_readonly("sample", &IngestResult::sample)
      .def_readonly("table", &IngestResult::table);
  m.def("ingest_densities",
        [](const std::filesystem::path& path, const std::string& format, bool strict_positive) {
          IngestOptions options;
          options.format = density_format_from_string(format);
          options.strict_positive = strict_positive;
          return ingest_densities(path, options);
        },
        py::arg("path"), py::arg("format") = "csv_wide", py::arg("strict_positive") = false);

  m.def("set_max_threads", &set_max_threads, py::arg("n"));
  m.def("max_threads", &max_threads);
  m.attr("__version__") = kLibraryVersion;
}
