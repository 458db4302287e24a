#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include "dpbound/baselines.hpp"
#include "dpbound/benchmarks.hpp"
#include "dpbound/propagation.hpp"

namespace dpbound {

enum class InputMode { Perfect, Biased };
enum class ModelMode { Perfect, Misfit };
enum class Method { DPBound, Mccp, SurrModel };

std::string to_string(InputMode mode);
std::string to_string(ModelMode mode);
std::string to_string(Method method);
InputMode parse_input_mode(const std::string& text);
ModelMode parse_model_mode(const std::string& text);
Method parse_method(const std::string& text);

// One experiment cell: a benchmark under an input/model configuration,
// evaluated by one method over several trials. Trial t uses seed
// base_seed + t for every stream it owns.
struct RunConfig {
  std::string benchmark;
  InputMode input_mode = InputMode::Perfect;
  ModelMode model_mode = ModelMode::Perfect;
  Method method = Method::DPBound;
  int trials = 5;
  std::uint64_t base_seed = 2349;
  int validation_samples = 100;  // V: per-component validation pairs
  int model_samples = 500;       // n_M: model-run sample size
  double confidence = 0.95;      // MCCP confidence level
  // Flattened lengthscale overrides for the benchmark's route kernels (each
  // kernel's lengthscales concatenated in route order); empty keeps the
  // published values.
  std::vector<double> lengthscale_overrides;
  int gp_restarts = 10;
  int misfit_train_samples = 100;
  int ground_truth_samples = 1000000;
};

// One propagation solve, in solve order (ascending component, TPI last).
struct SolveDiagnostic {
  int source = 0;      // route endpoints; 0 is the global input
  int target = 0;
  double bound = 0.0;  // discrepancy bound B obtained for this route
  SdpDiagnostics sdp;
};

struct RunRecord {
  int trial = 0;
  std::uint64_t seed = 0;
  bool ok = false;      // the method produced a bound
  std::string status;   // "ok" or the failure reason
  double f_max = 0.0;   // NaN when !ok
  double ground_truth_pfail = 0.0;
  bool valid = false;   // ok && f_max >= ground_truth_pfail
  double wall_time_ms = 0.0;
  std::vector<SolveDiagnostic> solves;  // DPBound only
};

struct ReportAggregates {
  int runs = 0;
  int completed = 0;    // records with ok == true
  int valid_runs = 0;
  double mean_f_max = 0.0;  // over completed records; NaN when none
  double std_f_max = 0.0;
  // (# runs that are not valid) / (# runs); failed runs count as invalid.
  double invalidness = 0.0;
  int solves = 0;
  int tight_solves = 0;  // gamma_hat >= 0.99
};

struct ValidationReport {
  RunConfig config;
  std::vector<RunRecord> records;
  ReportAggregates aggregates;
};

// In-process memo shared across cells of a sweep: ground-truth failure
// probabilities (per benchmark), misfit component models and surrogate GPs
// (per benchmark and trial seed, reused across configurations and methods).
class HarnessCache {
 public:
  double ground_truth(const BenchmarkSpec& spec, std::uint64_t base_seed,
                      int samples);
  std::shared_ptr<const MisfitModels> misfit_models(const BenchmarkSpec& spec,
                                                    std::uint64_t trial_seed,
                                                    int train_samples,
                                                    int gp_restarts);
  std::shared_ptr<const std::vector<std::vector<GPModel>>> surrogates(
      const ComponentGraph& topology,
      const std::vector<ComponentValidation>& validation,
      const std::string& label, std::uint64_t fit_seed, int gp_restarts);

 private:
  std::mutex mu_;
  std::map<std::string, double> ground_truth_;
  std::map<std::string, std::shared_ptr<const MisfitModels>> misfit_;
  std::map<std::string, std::shared_ptr<const std::vector<std::vector<GPModel>>>>
      surrogates_;
};

ReportAggregates compute_aggregates(const std::vector<RunRecord>& records);

// Runs every trial of the cell: builds the benchmark, inputs, models and
// validation data from the trial seed, executes the configured method, and
// scores the bound against a Monte-Carlo ground truth on the true system
// under the perfect input. Per-trial failures are recorded in the trial's
// status and do not abort the remaining trials. A cache may be shared across
// calls to reuse ground truths and fitted models.
ValidationReport run_validation(const RunConfig& config,
                                HarnessCache* cache = nullptr);

struct SweepOptions {
  std::vector<std::string> benchmarks;  // empty = every registered benchmark
  int trials = 5;
  std::uint64_t base_seed = 2349;
  int validation_samples = 100;
  int model_samples = 500;
  std::vector<double> mccp_confidences = {0.95, 0.99};
  int gp_restarts = 10;
  // Called before each cell with a short description; may be empty.
  std::function<void(const std::string&)> progress;
  // Called with each cell's report as soon as it completes (long sweeps can
  // persist results incrementally); may be empty.
  std::function<void(const ValidationReport&)> on_report;
};

// Full grid: benchmarks x {perfect, biased} x {perfect, misfit} x
// {dpbound, mccp per confidence, surrmodel}, in deterministic order.
std::vector<ValidationReport> run_sweep(const SweepOptions& options = {});

// Per-cell summary, merged over reports sharing (benchmark, input, model,
// method, confidence). Sorted deterministically.
struct SummaryRow {
  std::string benchmark;
  InputMode input_mode = InputMode::Perfect;
  ModelMode model_mode = ModelMode::Perfect;
  Method method = Method::DPBound;
  double confidence = 0.95;
  ReportAggregates aggregates;
  double ground_truth_pfail = 0.0;
};
std::vector<SummaryRow> aggregate(const std::vector<ValidationReport>& reports);

// Roll-up over benchmarks into the four input/model quadrants per method.
struct QuadrantSummary {
  InputMode input_mode = InputMode::Perfect;
  ModelMode model_mode = ModelMode::Perfect;
  Method method = Method::DPBound;
  double confidence = 0.95;
  int runs = 0;
  double invalidness = 0.0;
  int solves = 0;
  int tight_solves = 0;
};
std::vector<QuadrantSummary> quadrant_rollup(
    const std::vector<ValidationReport>& reports);

// JSON payload of one cell: an array of run records, each carrying the full
// configuration. Round-trips losslessly through report_from_json.
std::string report_to_json(const ValidationReport& report);
ValidationReport report_from_json(const std::string& text);

enum class ReportFormat { Table, Csv, Json };
ReportFormat parse_report_format(const std::string& text);
std::string format_reports(const std::vector<ValidationReport>& reports,
                           ReportFormat format);

// Single-component linear-Gaussian scenario exercising one propagation step
// end to end. MisfitModel: the model output is offset by +0.8 under the
// shared standard-normal input. BiasedInput: identical system and model, but
// the run inputs come from N(1, 1) instead of N(0, 1). Perfect: no
// discrepancy anywhere. The failure threshold is 2.
enum class GaussianCase { MisfitModel, BiasedInput, Perfect };
GaussianCase parse_gaussian_case(const std::string& text);
std::string to_string(GaussianCase scenario);

struct GaussianIllustration {
  GaussianCase scenario = GaussianCase::MisfitModel;
  double b01 = 0.0;        // input-route discrepancy bound
  double b12 = 0.0;        // propagated output-route bound
  double f_max = 0.0;      // worst-case failure probability
  double naive_tail = 0.0; // plain Monte-Carlo tail of the model run
  Eigen::VectorXd alpha;       // worst-case weighting of validation points
  Eigen::VectorXd grid;        // failure-program grid
  Eigen::VectorXd alpha_grid;  // worst-case output weights on the grid
  SdpDiagnostics diagnostics;  // of the output-route solve
};
GaussianIllustration gaussian_illustration(GaussianCase scenario,
                                           std::uint64_t seed = 2349);

}  // namespace dpbound
