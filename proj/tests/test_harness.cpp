#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "dpbound/harness.hpp"

using namespace dpbound;

namespace {

RunRecord make_record(int trial, double f_max, double ground_truth, bool ok = true) {
  RunRecord rec;
  rec.trial = trial;
  rec.seed = 100 + static_cast<std::uint64_t>(trial);
  rec.ok = ok;
  rec.status = ok ? "ok" : "solver exploded";
  rec.f_max = ok ? f_max : std::numeric_limits<double>::quiet_NaN();
  rec.ground_truth_pfail = ground_truth;
  rec.valid = ok && rec.f_max >= ground_truth;
  rec.wall_time_ms = 12.5 + trial;
  return rec;
}

}  // namespace

TEST_CASE("mode and method names round-trip and reject unknowns") {
  for (InputMode mode : {InputMode::Perfect, InputMode::Biased})
    CHECK(parse_input_mode(to_string(mode)) == mode);
  for (ModelMode mode : {ModelMode::Perfect, ModelMode::Misfit})
    CHECK(parse_model_mode(to_string(mode)) == mode);
  for (Method method : {Method::DPBound, Method::Mccp, Method::SurrModel})
    CHECK(parse_method(to_string(method)) == method);
  for (GaussianCase scenario :
       {GaussianCase::MisfitModel, GaussianCase::BiasedInput, GaussianCase::Perfect})
    CHECK(parse_gaussian_case(to_string(scenario)) == scenario);
  CHECK(parse_gaussian_case("a") == GaussianCase::MisfitModel);
  CHECK(parse_gaussian_case("b") == GaussianCase::BiasedInput);
  CHECK_THROWS_AS(parse_input_mode("skewed"), std::invalid_argument);
  CHECK_THROWS_AS(parse_model_mode("exact"), std::invalid_argument);
  CHECK_THROWS_AS(parse_method("oracle"), std::invalid_argument);
  CHECK_THROWS_AS(parse_gaussian_case("c"), std::invalid_argument);
  CHECK_THROWS_AS(parse_report_format("xml"), std::invalid_argument);
}

TEST_CASE("aggregates count invalid runs and failures") {
  // Bounds 0.5%, 2%, 3%, 0.9% against a 1% truth: half the runs undershoot.
  std::vector<RunRecord> records = {
      make_record(0, 0.005, 0.01), make_record(1, 0.02, 0.01),
      make_record(2, 0.03, 0.01), make_record(3, 0.009, 0.01)};
  ReportAggregates agg = compute_aggregates(records);
  CHECK(agg.runs == 4);
  CHECK(agg.completed == 4);
  CHECK(agg.valid_runs == 2);
  CHECK(agg.invalidness == doctest::Approx(0.5));
  CHECK(agg.mean_f_max == doctest::Approx(0.016));
  CHECK(agg.std_f_max == doctest::Approx(std::sqrt(3.82e-4 / 3.0)));

  // A failed trial has no bound and counts as invalid.
  records.push_back(make_record(4, 0.0, 0.01, false));
  agg = compute_aggregates(records);
  CHECK(agg.runs == 5);
  CHECK(agg.completed == 4);
  CHECK(agg.valid_runs == 2);
  CHECK(agg.invalidness == doctest::Approx(0.6));
  CHECK(agg.mean_f_max == doctest::Approx(0.016));  // failures excluded

  // A single valid run has zero invalidness and zero spread.
  const ReportAggregates one =
      compute_aggregates({make_record(0, 0.02, 0.01)});
  CHECK(one.invalidness == 0.0);
  CHECK(one.std_f_max == 0.0);

  const ReportAggregates empty = compute_aggregates({});
  CHECK(empty.runs == 0);
  CHECK(std::isnan(empty.mean_f_max));
  CHECK(empty.invalidness == 0.0);
}

TEST_CASE("aggregates track near-optimal solve certificates") {
  RunRecord rec = make_record(0, 0.02, 0.01);
  SolveDiagnostic tight;
  tight.source = 1;
  tight.target = 2;
  tight.bound = 0.3;
  tight.sdp.gamma_hat = 0.995;
  SolveDiagnostic loose = tight;
  loose.sdp.gamma_hat = 0.9;
  rec.solves = {tight, loose};
  const ReportAggregates agg = compute_aggregates({rec});
  CHECK(agg.solves == 2);
  CHECK(agg.tight_solves == 1);
}

TEST_CASE("run records survive a JSON round-trip bit for bit") {
  ValidationReport report;
  report.config.benchmark = "chained_solvers";
  report.config.input_mode = InputMode::Biased;
  report.config.model_mode = ModelMode::Misfit;
  report.config.method = Method::DPBound;
  report.config.trials = 2;
  report.config.base_seed = 987654321;
  report.config.validation_samples = 37;
  report.config.model_samples = 211;
  report.config.confidence = 0.975;
  report.config.lengthscale_overrides = {0.1, 2.0 / 3.0, 31.0};
  report.config.gp_restarts = 4;
  report.config.misfit_train_samples = 55;
  report.config.ground_truth_samples = 123456;

  RunRecord good = make_record(0, 0.123456789012345678, 0.01);
  SolveDiagnostic solve;
  solve.source = 0;
  solve.target = 3;
  solve.bound = 1.0 / 3.0;
  solve.sdp.opt_relax = 0.2030405060708090;
  solve.sdp.opt_orig = 0.2 + 1e-17;  // not exactly representable
  solve.sdp.gap_upper = solve.sdp.opt_relax - solve.sdp.opt_orig;
  solve.sdp.gamma_hat = 0.999999;
  solve.sdp.solver_status = "optimal";
  solve.sdp.cut_rounds = 2;
  solve.sdp.cuts_added = 117;
  solve.sdp.wall_time_ms = 814.25;
  good.solves = {solve};
  RunRecord failed = make_record(1, 0.0, 0.01, false);
  report.records = {good, failed};
  report.aggregates = compute_aggregates(report.records);

  const std::string text = report_to_json(report);
  const ValidationReport back = report_from_json(text);

  CHECK(back.config.benchmark == report.config.benchmark);
  CHECK(back.config.input_mode == report.config.input_mode);
  CHECK(back.config.model_mode == report.config.model_mode);
  CHECK(back.config.method == report.config.method);
  CHECK(back.config.trials == report.config.trials);
  CHECK(back.config.base_seed == report.config.base_seed);
  CHECK(back.config.validation_samples == report.config.validation_samples);
  CHECK(back.config.model_samples == report.config.model_samples);
  CHECK(back.config.confidence == report.config.confidence);
  CHECK(back.config.lengthscale_overrides == report.config.lengthscale_overrides);
  CHECK(back.config.gp_restarts == report.config.gp_restarts);
  CHECK(back.config.misfit_train_samples == report.config.misfit_train_samples);
  CHECK(back.config.ground_truth_samples == report.config.ground_truth_samples);

  REQUIRE(back.records.size() == 2);
  CHECK(back.records[0].trial == 0);
  CHECK(back.records[0].seed == good.seed);
  CHECK(back.records[0].ok);
  CHECK(back.records[0].status == "ok");
  CHECK(back.records[0].f_max == good.f_max);  // exact
  CHECK(back.records[0].ground_truth_pfail == good.ground_truth_pfail);
  CHECK(back.records[0].valid == good.valid);
  CHECK(back.records[0].wall_time_ms == good.wall_time_ms);
  REQUIRE(back.records[0].solves.size() == 1);
  const SolveDiagnostic& s = back.records[0].solves[0];
  CHECK(s.source == solve.source);
  CHECK(s.target == solve.target);
  CHECK(s.bound == solve.bound);
  CHECK(s.sdp.opt_relax == solve.sdp.opt_relax);
  CHECK(s.sdp.opt_orig == solve.sdp.opt_orig);
  CHECK(s.sdp.gamma_hat == solve.sdp.gamma_hat);
  CHECK(s.sdp.solver_status == solve.sdp.solver_status);
  CHECK(s.sdp.cut_rounds == solve.sdp.cut_rounds);
  CHECK(s.sdp.cuts_added == solve.sdp.cuts_added);
  CHECK(s.sdp.wall_time_ms == solve.sdp.wall_time_ms);

  CHECK_FALSE(back.records[1].ok);
  CHECK(std::isnan(back.records[1].f_max));  // null in JSON, NaN in memory
  CHECK(back.records[1].status == "solver exploded");
  CHECK(back.aggregates.invalidness == doctest::Approx(0.5));

  CHECK_THROWS_AS(report_from_json("[]"), std::invalid_argument);
  CHECK_THROWS(report_from_json("{\"not\": \"an array\"}"));
}

TEST_CASE("summary rows merge reports of the same cell") {
  ValidationReport a;
  a.config.benchmark = "alpha";
  a.config.method = Method::Mccp;
  a.records = {make_record(0, 0.02, 0.01), make_record(1, 0.005, 0.01)};
  ValidationReport b = a;  // same cell, later trials
  b.records = {make_record(2, 0.03, 0.01)};
  ValidationReport c;
  c.config.benchmark = "beta";
  c.config.method = Method::Mccp;
  c.records = {make_record(0, 0.001, 0.01)};

  const std::vector<SummaryRow> rows = aggregate({a, b, c});
  REQUIRE(rows.size() == 2);
  CHECK(rows[0].benchmark == "alpha");
  CHECK(rows[0].aggregates.runs == 3);
  CHECK(rows[0].aggregates.valid_runs == 2);
  CHECK(rows[0].ground_truth_pfail == doctest::Approx(0.01));
  CHECK(rows[1].benchmark == "beta");
  CHECK(rows[1].aggregates.invalidness == doctest::Approx(1.0));

  // The quadrant roll-up pools the two benchmarks.
  const std::vector<QuadrantSummary> quads = quadrant_rollup({a, b, c});
  REQUIRE(quads.size() == 1);
  CHECK(quads[0].method == Method::Mccp);
  CHECK(quads[0].runs == 4);
  CHECK(quads[0].invalidness == doctest::Approx(2.0 / 4.0));

  CHECK_THROWS_AS(aggregate({}), std::invalid_argument);

  for (ReportFormat format :
       {ReportFormat::Table, ReportFormat::Csv, ReportFormat::Json}) {
    const std::string text = format_reports({a, b, c}, format);
    CHECK(text.find("alpha") != std::string::npos);
    CHECK(text.find("beta") != std::string::npos);
  }
  CHECK(format_reports({a}, ReportFormat::Csv).find("benchmark,input,model") == 0);
}

TEST_CASE("run_validation rejects malformed configurations") {
  RunConfig cfg;
  cfg.benchmark = "chained_solvers";
  cfg.trials = 0;
  CHECK_THROWS_AS(run_validation(cfg), std::invalid_argument);
  cfg.trials = 1;
  cfg.confidence = 1.0;
  CHECK_THROWS_AS(run_validation(cfg), std::invalid_argument);
  cfg.confidence = 0.95;
  cfg.benchmark = "no_such_benchmark";
  CHECK_THROWS(run_validation(cfg));
  cfg.benchmark = "chained_solvers";
  cfg.ground_truth_samples = 100;
  CHECK_THROWS_AS(run_validation(cfg), std::invalid_argument);
  cfg.ground_truth_samples = 50000;
  cfg.lengthscale_overrides = {1.0};  // wrong count for the route kernels
  CHECK_THROWS_AS(run_validation(cfg), std::invalid_argument);
}

TEST_CASE("Monte-Carlo baseline cells complete and respect confidence ordering") {
  HarnessCache cache;
  RunConfig cfg;
  cfg.benchmark = "chained_solvers";
  cfg.method = Method::Mccp;
  cfg.trials = 3;
  cfg.model_samples = 300;
  cfg.ground_truth_samples = 50000;

  const ValidationReport at95 = run_validation(cfg, &cache);
  cfg.confidence = 0.99;
  const ValidationReport at99 = run_validation(cfg, &cache);

  REQUIRE(at95.records.size() == 3);
  REQUIRE(at99.records.size() == 3);
  for (int t = 0; t < 3; ++t) {
    const RunRecord& lo = at95.records[static_cast<std::size_t>(t)];
    const RunRecord& hi = at99.records[static_cast<std::size_t>(t)];
    CHECK(lo.ok);
    CHECK(lo.status == "ok");
    CHECK(lo.seed == cfg.base_seed + static_cast<std::uint64_t>(t));
    CHECK(lo.f_max > 0.0);
    CHECK(lo.f_max <= 1.0);
    CHECK(lo.solves.empty());  // no propagation solves in this method
    CHECK(lo.ground_truth_pfail > 0.004);
    CHECK(lo.ground_truth_pfail < 0.02);
    CHECK(lo.ground_truth_pfail == hi.ground_truth_pfail);
    // Same simulated runs, stricter confidence: the bound can only grow.
    CHECK(hi.f_max >= lo.f_max);
  }
  CHECK(at95.aggregates.runs == 3);
  CHECK(at95.aggregates.completed == 3);

  // Determinism: a fresh cache reproduces the bounds bit for bit.
  cfg.confidence = 0.95;
  const ValidationReport again = run_validation(cfg, nullptr);
  for (int t = 0; t < 3; ++t)
    CHECK(again.records[static_cast<std::size_t>(t)].f_max ==
          at95.records[static_cast<std::size_t>(t)].f_max);
}

TEST_CASE("discrepancy propagation cell produces a valid certified bound") {
  RunConfig cfg;
  cfg.benchmark = "chained_solvers";
  cfg.method = Method::DPBound;
  cfg.trials = 1;
  cfg.ground_truth_samples = 200000;

  const ValidationReport report = run_validation(cfg);
  REQUIRE(report.records.size() == 1);
  const RunRecord& rec = report.records[0];
  INFO("status: ", rec.status);
  REQUIRE(rec.ok);
  CHECK(rec.f_max >= rec.ground_truth_pfail);  // the point of the method
  CHECK(rec.valid);
  CHECK(rec.f_max <= 1.0);
  REQUIRE_FALSE(rec.solves.empty());
  for (const SolveDiagnostic& solve : rec.solves) {
    CHECK(solve.source >= 0);
    CHECK(solve.target >= 1);
    CHECK(solve.bound >= 0.0);
    CHECK(solve.sdp.gamma_hat <= 1.0 + 1e-9);
    CHECK(solve.sdp.wall_time_ms > 0.0);
    CHECK(solve.sdp.opt_relax + 1e-6 >= solve.sdp.opt_orig);
  }
  CHECK(report.aggregates.solves == static_cast<int>(rec.solves.size()));
}

TEST_CASE("a one-benchmark sweep walks the full configuration grid") {
  SweepOptions options;
  options.benchmarks = {"chained_solvers"};
  options.trials = 1;
  options.mccp_confidences = {0.95};
  options.gp_restarts = 3;
  std::vector<std::string> seen;
  options.progress = [&](const std::string& line) { seen.push_back(line); };

  const std::vector<ValidationReport> reports = run_sweep(options);
  REQUIRE(reports.size() == 12);  // 2 inputs x 2 models x 3 methods
  CHECK(seen.size() == 12);

  std::size_t at = 0;
  for (InputMode input : {InputMode::Perfect, InputMode::Biased}) {
    for (ModelMode model : {ModelMode::Perfect, ModelMode::Misfit}) {
      for (Method method : {Method::DPBound, Method::Mccp, Method::SurrModel}) {
        const RunConfig& cfg = reports[at].config;
        CHECK(cfg.benchmark == "chained_solvers");
        CHECK(cfg.input_mode == input);
        CHECK(cfg.model_mode == model);
        CHECK(cfg.method == method);
        CHECK(reports[at].records.size() == 1);
        INFO("cell ", seen[at], " status: ", reports[at].records[0].status);
        CHECK(reports[at].records[0].ok);
        ++at;
      }
    }
  }

  // Propagation bounds hold in every quadrant of this sweep.
  for (const ValidationReport& report : reports)
    if (report.config.method == Method::DPBound)
      CHECK(report.aggregates.invalidness == 0.0);

  const std::vector<QuadrantSummary> quads = quadrant_rollup(reports);
  CHECK(quads.size() == 12);  // one benchmark: quadrant = cell
}

TEST_CASE("linear-Gaussian walkthrough separates the three scenarios") {
  const GaussianIllustration misfit =
      gaussian_illustration(GaussianCase::MisfitModel);
  // Shared input sample: the input route shows no discrepancy at all, the
  // output route exposes the +0.8 shift.
  CHECK(misfit.b01 < 1e-3);
  CHECK(misfit.b12 > 0.05);
  CHECK(misfit.f_max > misfit.naive_tail);
  CHECK(misfit.f_max <= 1.0);
  CHECK(misfit.alpha.size() == 100);
  CHECK(misfit.alpha.sum() == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(misfit.alpha.minCoeff() >= -1e-8);
  CHECK(misfit.grid.size() == misfit.alpha_grid.size());
  CHECK(misfit.alpha_grid.sum() == doctest::Approx(1.0).epsilon(1e-6));

  const GaussianIllustration biased =
      gaussian_illustration(GaussianCase::BiasedInput);
  // The model is exact; the discrepancy enters through the input sample.
  CHECK(biased.b01 > 0.05);
  CHECK(biased.f_max > biased.naive_tail);

  const GaussianIllustration perfect =
      gaussian_illustration(GaussianCase::Perfect);
  CHECK(perfect.b01 == 0.0);  // identical weighted samples
  CHECK(perfect.b12 < 0.02);
  CHECK(perfect.f_max >= perfect.naive_tail);
  CHECK(perfect.f_max < perfect.naive_tail + 0.1);
  CHECK(perfect.naive_tail > 0.0);

  // Deterministic by seed.
  const GaussianIllustration again =
      gaussian_illustration(GaussianCase::MisfitModel);
  CHECK(again.b12 == misfit.b12);
  CHECK(again.f_max == misfit.f_max);
}
