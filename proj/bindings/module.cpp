#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <cmath>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "dpbound/baselines.hpp"
#include "dpbound/benchmarks.hpp"
#include "dpbound/empirical.hpp"
#include "dpbound/failure.hpp"
#include "dpbound/harness.hpp"
#include "dpbound/kernels.hpp"
#include "dpbound/propagation.hpp"
#include "dpbound/tuning.hpp"

namespace py = pybind11;
using namespace dpbound;

namespace {

KernelSpec make_kernel(const std::string& family,
                       const Eigen::VectorXd& lengthscales) {
  if (family == "sqexp") return sqexp_kernel(lengthscales);
  if (family == "imq") return imq_kernel(lengthscales);
  throw std::invalid_argument("unknown kernel family '" + family +
                              "'; expected sqexp or imq");
}

KernelFamily parse_family(const std::string& family) {
  if (family == "sqexp") return KernelFamily::SquaredExponential;
  if (family == "imq") return KernelFamily::InverseMultiquadric;
  throw std::invalid_argument("unknown kernel family '" + family +
                              "'; expected sqexp or imq");
}

Eigen::MatrixXd as_points(const Eigen::MatrixXd& m) { return m; }

py::object json_loads(const std::string& text) {
  return py::module_::import("json").attr("loads")(text);
}

}  // namespace

PYBIND11_MODULE(_dpbound, m) {
  m.doc() =
      "Certified upper bounds on failure probabilities of composite "
      "simulation models: kernel discrepancies, bound propagation, failure "
      "programs, baselines and the benchmark harness.";
  m.attr("__version__") = "0.1.0";

  // Kernels and discrepancies -------------------------------------------
  m.def(
      "eval_kernel",
      [](const Eigen::VectorXd& x, const Eigen::VectorXd& y,
         const std::string& family, const Eigen::VectorXd& lengthscales) {
        return eval_kernel(make_kernel(family, lengthscales), x, y);
      },
      py::arg("x"), py::arg("y"), py::arg("family") = "sqexp",
      py::arg("lengthscales") = Eigen::VectorXd::Ones(1),
      "Evaluate the kernel at a pair of points.");

  m.def(
      "mmd_biased",
      [](const Eigen::MatrixXd& p, const Eigen::MatrixXd& q,
         const std::string& family, const Eigen::VectorXd& lengthscales) {
        return mmd_biased(make_kernel(family, lengthscales),
                          WeightedSamples::uniform(as_points(p)),
                          WeightedSamples::uniform(as_points(q)));
      },
      py::arg("p"), py::arg("q"), py::arg("family") = "sqexp",
      py::arg("lengthscales") = Eigen::VectorXd::Ones(1),
      "Biased (V-statistic) kernel discrepancy between two uniform samples "
      "(one point per row).");

  m.def(
      "mmd_unbiased",
      [](const Eigen::MatrixXd& p, const Eigen::MatrixXd& q,
         const std::string& family, const Eigen::VectorXd& lengthscales) {
        return mmd_unbiased(make_kernel(family, lengthscales),
                            WeightedSamples::uniform(as_points(p)),
                            WeightedSamples::uniform(as_points(q)));
      },
      py::arg("p"), py::arg("q"), py::arg("family") = "sqexp",
      py::arg("lengthscales") = Eigen::VectorXd::Ones(1),
      "Unbiased (U-statistic) kernel discrepancy; may be negative.");

  m.def(
      "estimate_input_bound",
      [](const Eigen::MatrixXd& sample, const Eigen::MatrixXd& reference,
         const std::string& family, const Eigen::VectorXd& lengthscales) {
        return estimate_input_bound(WeightedSamples::uniform(sample),
                                    WeightedSamples::uniform(reference),
                                    make_kernel(family, lengthscales));
      },
      py::arg("sample"), py::arg("reference"), py::arg("family") = "sqexp",
      py::arg("lengthscales") = Eigen::VectorXd::Ones(1),
      "Discrepancy bound for an observed input route.");

  // Failure program -------------------------------------------------------
  m.def(
      "failure_bound",
      [](const Eigen::VectorXd& q_y, double bound, double threshold,
         double grid_min, double grid_max, double lengthscale,
         double lipschitz) {
        FailureProgramConfig cfg;
        cfg.grid_min = std::min(grid_min, q_y.minCoeff());
        cfg.grid_max = std::max(grid_max, q_y.maxCoeff());
        cfg.threshold = threshold;
        cfg.lipschitz = lipschitz;
        cfg.kernel = sqexp_kernel(lengthscale);
        const WeightedSamples samples =
            WeightedSamples::uniform(Eigen::MatrixXd(q_y));
        const Eigen::VectorXd grid = build_grid(samples, cfg);
        cfg.tail_threshold =
            default_tail_threshold(threshold, grid[1] - grid[0]);
        const FailureBoundResult result =
            dpbound::failure_bound(grid, samples, bound, cfg);
        py::dict out;
        out["f_max"] = result.f_max;
        out["grid"] = grid;
        out["alpha"] = result.alpha_star;
        out["binding"] = result.binding;
        return out;
      },
      py::arg("q_y"), py::arg("bound"), py::arg("threshold"),
      py::arg("grid_min"), py::arg("grid_max"), py::arg("lengthscale") = 1.0,
      py::arg("lipschitz") = std::numeric_limits<double>::infinity(),
      "Worst-case exceedance probability over all output distributions "
      "within `bound` of the sampled model outputs.");

  // Baselines ---------------------------------------------------------------
  m.def("clopper_pearson_upper", &clopper_pearson_upper, py::arg("failures"),
        py::arg("trials"), py::arg("confidence"),
        "Upper endpoint of the one-sided Clopper-Pearson interval.");

  py::class_<GPModel>(m, "GPModel",
                      "Exact Gaussian-process posterior (zero prior mean).")
      .def_property_readonly(
          "lengthscales",
          [](const GPModel& g) {
            return Eigen::VectorXd(g.log_lengthscales.array().exp());
          })
      .def_property_readonly(
          "signal_std",
          [](const GPModel& g) { return std::sqrt(g.signal_variance()); })
      .def_property_readonly(
          "noise_std",
          [](const GPModel& g) { return std::sqrt(g.noise_variance()); })
      .def_property_readonly(
          "log_marginal_likelihood",
          [](const GPModel& g) { return g.log_marginal_likelihood; })
      .def(
          "predict",
          [](const GPModel& g, const Eigen::MatrixXd& X) {
            Eigen::VectorXd mean, variance;
            gp_predict(g, X, &mean, &variance);
            return py::make_tuple(mean, variance);
          },
          py::arg("X"),
          "Posterior mean and latent variance at the query rows.");

  m.def(
      "gp_fit",
      [](const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
         const std::string& family, std::uint64_t seed, int restarts) {
        return gp_fit(X, y, parse_family(family), seed, restarts);
      },
      py::arg("X"), py::arg("y"), py::arg("family") = "sqexp",
      py::arg("seed") = 0, py::arg("restarts") = 10,
      "Fit GP hyperparameters by marginal likelihood (seeded, multi-restart).");

  // Benchmarks and harness ---------------------------------------------------
  m.def(
      "benchmarks",
      [] {
        std::vector<std::string> names;
        for (BenchmarkName b : all_benchmarks()) names.push_back(to_string(b));
        return names;
      },
      "Names of the registered reliability benchmarks.");

  m.def(
      "describe",
      [](const std::string& name) { return describe(make_benchmark(name)); },
      py::arg("benchmark"),
      "Human-readable dump of a benchmark's constants.");

  m.def(
      "run_validation",
      [](const std::string& benchmark, const std::string& input,
         const std::string& model, const std::string& method, int trials,
         std::uint64_t seed, int validation_samples, int model_samples,
         double confidence, int gp_restarts, int ground_truth_samples) {
        RunConfig cfg;
        cfg.benchmark = benchmark;
        cfg.input_mode = parse_input_mode(input);
        cfg.model_mode = parse_model_mode(model);
        cfg.method = parse_method(method);
        cfg.trials = trials;
        cfg.base_seed = seed;
        cfg.validation_samples = validation_samples;
        cfg.model_samples = model_samples;
        cfg.confidence = confidence;
        cfg.gp_restarts = gp_restarts;
        cfg.ground_truth_samples = ground_truth_samples;
        const ValidationReport report = dpbound::run_validation(cfg);
        return json_loads(report_to_json(report));
      },
      py::arg("benchmark"), py::arg("input") = "perfect",
      py::arg("model") = "perfect", py::arg("method") = "dpbound",
      py::arg("trials") = 5, py::arg("seed") = 2349,
      py::arg("validation_samples") = 100, py::arg("model_samples") = 500,
      py::arg("confidence") = 0.95, py::arg("gp_restarts") = 10,
      py::arg("ground_truth_samples") = 1000000,
      "Evaluate one benchmark cell; returns the list of run records.");

  m.def(
      "gaussian_illustration",
      [](const std::string& scenario, std::uint64_t seed) {
        const GaussianIllustration ill =
            dpbound::gaussian_illustration(parse_gaussian_case(scenario), seed);
        py::dict out;
        out["scenario"] = to_string(ill.scenario);
        out["b01"] = ill.b01;
        out["b12"] = ill.b12;
        out["f_max"] = ill.f_max;
        out["naive_tail"] = ill.naive_tail;
        out["gamma_hat"] = ill.diagnostics.gamma_hat;
        out["alpha"] = ill.alpha;
        out["grid"] = ill.grid;
        out["alpha_grid"] = ill.alpha_grid;
        return out;
      },
      py::arg("scenario") = "misfit-model", py::arg("seed") = 2349,
      "Linear-Gaussian walkthrough of one propagation step "
      "(misfit-model, biased-input or perfect).");

  // Lengthscale tuning -------------------------------------------------------
  m.def("default_search_space", &default_search_space, py::arg("parameters"),
        py::arg("output_span"),
        "Per-parameter lengthscale ranges for the tuner.");

  m.def(
      "search_lengthscales",
      [](const TuningPipeline& pipeline, const TuningSpace& space, int budget,
         std::uint64_t seed, const std::vector<Eigen::VectorXd>& initial) {
        TuningOptions options;
        options.budget = budget;
        options.seed = seed;
        options.initial_candidates = initial;
        const TuningResult result =
            dpbound::search_lengthscales(pipeline, space, options);
        py::list trace;
        for (const TuningCandidate& c : result.trace) {
          py::dict row;
          row["index"] = c.index;
          row["lengthscales"] = c.lengthscales;
          row["f_max"] = c.ok ? py::cast(c.f_max) : py::none();
          row["ok"] = c.ok;
          row["status"] = c.status;
          trace.append(std::move(row));
        }
        py::dict out;
        out["best_lengthscales"] = result.best_lengthscales;
        out["best_f_max"] = result.best_f_max;
        out["trace"] = trace;
        return out;
      },
      py::arg("pipeline"), py::arg("space"), py::arg("budget") = 40,
      py::arg("seed") = 0,
      py::arg("initial") = std::vector<Eigen::VectorXd>{},
      "Seeded random-plus-refinement search minimizing a pipeline's F_max.");
}
