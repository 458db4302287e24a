#include <CLI11.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "dpbound/benchmarks.hpp"
#include "dpbound/failure.hpp"
#include "dpbound/harness.hpp"

namespace {

using namespace dpbound;

std::string cell_filename(const RunConfig& cfg) {
  std::ostringstream name;
  name << cfg.benchmark << '_' << to_string(cfg.input_mode) << '_'
       << to_string(cfg.model_mode) << '_' << to_string(cfg.method);
  if (cfg.method == Method::Mccp)
    name << static_cast<int>(std::lround(cfg.confidence * 100.0));
  name << ".json";
  return name.str();
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out << text;
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::ostringstream text;
  text << in.rdbuf();
  return text.str();
}

int cmd_run(const RunConfig& cfg, const std::string& out_path) {
  const ValidationReport report = run_validation(cfg);
  write_text(out_path, report_to_json(report));
  std::cout << format_reports({report}, ReportFormat::Table);
  std::cout << "wrote " << out_path << '\n';
  return 0;
}

int cmd_sweep(SweepOptions options, const std::string& out_dir) {
  std::filesystem::create_directories(out_dir);
  options.progress = [](const std::string& line) {
    std::cerr << "[sweep] " << line << std::endl;
  };
  options.on_report = [&out_dir](const ValidationReport& report) {
    const std::filesystem::path path =
        std::filesystem::path(out_dir) / cell_filename(report.config);
    write_text(path, report_to_json(report));
    std::cerr << "[sweep]   -> " << path.string() << " (invalidness "
              << 100.0 * report.aggregates.invalidness << "%)" << std::endl;
  };
  const std::vector<ValidationReport> reports = run_sweep(options);
  std::cout << format_reports(reports, ReportFormat::Table);
  return 0;
}

int cmd_report(const std::vector<std::string>& files, ReportFormat format) {
  std::vector<ValidationReport> reports;
  reports.reserve(files.size());
  for (const std::string& file : files)
    reports.push_back(report_from_json(read_text(file)));
  std::cout << format_reports(reports, format);
  return 0;
}

int cmd_illustrate(const std::string& case_label, std::uint64_t seed,
                   const std::string& dump_dir) {
  std::vector<GaussianCase> cases;
  if (case_label == "all") {
    cases = {GaussianCase::MisfitModel, GaussianCase::BiasedInput,
             GaussianCase::Perfect};
  } else {
    cases = {parse_gaussian_case(case_label)};
  }
  if (!dump_dir.empty()) std::filesystem::create_directories(dump_dir);
  for (GaussianCase scenario : cases) {
    const GaussianIllustration ill = gaussian_illustration(scenario, seed);
    std::cout << to_string(scenario) << ": B01=" << ill.b01
              << " B12=" << ill.b12 << " F_max=" << ill.f_max
              << " naive_tail=" << ill.naive_tail
              << " gamma_hat=" << ill.diagnostics.gamma_hat << '\n';
    if (!dump_dir.empty()) {
      const std::filesystem::path path =
          std::filesystem::path(dump_dir) /
          ("gaussian_" + to_string(scenario) + ".csv");
      std::ofstream out(path);
      write_failure_csv(ill.grid, ill.alpha_grid, out);
      std::cout << "  wrote worst-case output distribution to " << path.string()
                << '\n';
    }
  }
  return 0;
}

int cmd_describe(const std::string& name) {
  if (name.empty()) {
    for (BenchmarkName b : all_benchmarks()) std::cout << to_string(b) << '\n';
    return 0;
  }
  std::cout << describe(make_benchmark(name));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "dpbound: certified upper bounds on failure probabilities of composite "
      "simulation models"};
  app.require_subcommand(1);

  // run ----------------------------------------------------------------
  auto* run = app.add_subcommand("run", "Evaluate one benchmark cell");
  RunConfig cfg;
  std::string input_mode = "perfect", model_mode = "perfect",
              method = "dpbound", out_path = "results.json";
  run->add_option("--benchmark", cfg.benchmark,
                  "Benchmark name (see `dpbound describe`)")
      ->required();
  run->add_option("--input", input_mode, "Input sample: perfect|biased")
      ->check(CLI::IsMember({"perfect", "biased"}));
  run->add_option("--model", model_mode, "Model fidelity: perfect|misfit")
      ->check(CLI::IsMember({"perfect", "misfit"}));
  run->add_option("--method", method, "Bounding method: dpbound|mccp|surrmodel")
      ->check(CLI::IsMember({"dpbound", "mccp", "surrmodel"}));
  run->add_option("--trials", cfg.trials, "Independent trials per cell")
      ->capture_default_str();
  run->add_option("--seed", cfg.base_seed, "Base seed (trial t uses seed+t)")
      ->capture_default_str();
  run->add_option("--confidence", cfg.confidence, "MCCP confidence level")
      ->capture_default_str();
  run->add_option("--validation-samples", cfg.validation_samples,
                  "Validation pairs per component")
      ->capture_default_str();
  run->add_option("--model-samples", cfg.model_samples,
                  "Model-run sample size")
      ->capture_default_str();
  run->add_option("--gp-restarts", cfg.gp_restarts,
                  "Restarts for GP hyperparameter fits")
      ->capture_default_str();
  run->add_option("--misfit-train-samples", cfg.misfit_train_samples,
                  "Training pairs behind each misfit component model")
      ->capture_default_str();
  run->add_option("--ground-truth-samples", cfg.ground_truth_samples,
                  "Monte-Carlo samples scoring validity")
      ->capture_default_str();
  run->add_option("--lengthscales", cfg.lengthscale_overrides,
                  "Override route-kernel lengthscales (flattened, route order)");
  run->add_option("--out", out_path, "Results file (JSON array of run records)")
      ->capture_default_str();

  // sweep --------------------------------------------------------------
  auto* sweep = app.add_subcommand(
      "sweep", "Run the benchmark grid and write one results file per cell");
  SweepOptions sweep_options;
  bool sweep_all = false;
  std::string out_dir = "results";
  sweep->add_flag("--all", sweep_all, "Sweep every registered benchmark");
  sweep->add_option("--benchmark", sweep_options.benchmarks,
                    "Restrict to these benchmarks (repeatable)");
  sweep->add_option("--trials", sweep_options.trials, "Trials per cell")
      ->capture_default_str();
  sweep->add_option("--seed", sweep_options.base_seed, "Base seed")
      ->capture_default_str();
  sweep->add_option("--validation-samples", sweep_options.validation_samples,
                    "Validation pairs per component")
      ->capture_default_str();
  sweep->add_option("--model-samples", sweep_options.model_samples,
                    "Model-run sample size")
      ->capture_default_str();
  sweep->add_option("--confidences", sweep_options.mccp_confidences,
                    "MCCP confidence levels")
      ->capture_default_str();
  sweep->add_option("--gp-restarts", sweep_options.gp_restarts,
                    "Restarts for GP hyperparameter fits")
      ->capture_default_str();
  sweep->add_option("--out-dir", out_dir, "Directory for per-cell JSON files")
      ->capture_default_str();

  // report -------------------------------------------------------------
  auto* report = app.add_subcommand(
      "report", "Summarize results files produced by run/sweep");
  std::vector<std::string> report_files;
  std::string format = "table";
  report->add_option("files", report_files, "Results JSON files")
      ->required()
      ->expected(-1);
  report->add_option("--format", format, "Output format: table|csv|json")
      ->check(CLI::IsMember({"table", "csv", "json"}));

  // illustrate-gaussian --------------------------------------------------
  auto* illustrate = app.add_subcommand(
      "illustrate-gaussian",
      "One-step linear-Gaussian walkthrough of the bound propagation");
  std::string case_label = "all", dump_dir;
  std::uint64_t ill_seed = 2349;
  illustrate
      ->add_option("--case", case_label,
                   "Scenario: misfit-model|biased-input|perfect|all")
      ->check(CLI::IsMember({"misfit-model", "biased-input", "perfect", "a",
                             "b", "all"}));
  illustrate->add_option("--seed", ill_seed, "Seed")->capture_default_str();
  illustrate->add_option("--dump-dir", dump_dir,
                         "Write worst-case output distributions as CSV here");

  // describe -------------------------------------------------------------
  auto* describe_cmd = app.add_subcommand(
      "describe", "Print a benchmark's constants (or list all benchmarks)");
  std::string describe_name;
  describe_cmd->add_option("benchmark", describe_name, "Benchmark name");

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) {
      cfg.input_mode = parse_input_mode(input_mode);
      cfg.model_mode = parse_model_mode(model_mode);
      cfg.method = parse_method(method);
      return cmd_run(cfg, out_path);
    }
    if (sweep->parsed()) {
      if (!sweep_all && sweep_options.benchmarks.empty())
        throw std::invalid_argument(
            "pass --all or at least one --benchmark to sweep");
      if (sweep_all) sweep_options.benchmarks.clear();
      return cmd_sweep(std::move(sweep_options), out_dir);
    }
    if (report->parsed())
      return cmd_report(report_files, parse_report_format(format));
    if (illustrate->parsed())
      return cmd_illustrate(case_label, ill_seed, dump_dir);
    if (describe_cmd->parsed()) return cmd_describe(describe_name);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
