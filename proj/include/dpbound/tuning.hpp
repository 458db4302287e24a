#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

namespace dpbound {

// Evaluates a lengthscale vector end to end and returns the resulting
// worst-case failure probability F_max. Throwing marks the candidate as
// failed without aborting the search.
using TuningPipeline = std::function<double(const Eigen::VectorXd&)>;

// One evaluated candidate, in evaluation order.
struct TuningCandidate {
  int index = 0;
  Eigen::VectorXd lengthscales;
  // Valid probability in [0, 1] when ok, NaN otherwise.
  double f_max = 0.0;
  bool ok = false;
  // "ok", or "failed: <reason>".
  std::string status;
};

struct TuningResult {
  Eigen::VectorXd best_lengthscales;
  double best_f_max = 0.0;
  std::vector<TuningCandidate> trace;
};

struct TuningOptions {
  // Total number of pipeline evaluations, split half random exploration and
  // half coordinate refinement around the incumbent.
  int budget = 40;
  std::uint64_t seed = 0;
  // Evaluated first (consuming exploration budget) so known-good settings,
  // e.g. published lengthscale tables, are always part of the comparison.
  std::vector<Eigen::VectorXd> initial_candidates;
};

// Per-parameter positive search ranges sampled log-uniformly. The wide
// default [1e-8, 5e3] suits inter-component signal scales; the final
// threshold-comparison kernel should instead use a range proportional to the
// output grid span (see default_search_space).
using TuningSpace = std::vector<std::pair<double, double>>;

// Ranges for `parameters` lengthscales: [1e-8, 5e3] everywhere except the
// last entry, which is scaled to the output span as
// [1e-4 * output_span, 10 * output_span]. Throws std::invalid_argument when
// parameters < 1 or output_span <= 0.
TuningSpace default_search_space(int parameters, double output_span);

// Seeded random-plus-refinement lengthscale search minimizing F_max.
//
// Phase 1 draws ceil(budget / 2) log-uniform candidates from `space`
// (initial candidates first); phase 2 spends the rest on coordinate
// refinement in log-space around the incumbent: axis-aligned steps that
// alternate direction, cycle through the coordinates, and halve after each
// full cycle. The incumbent is the successful candidate with the smallest
// F_max, ties resolved to the earliest.
//
// A pipeline exception, a non-finite value, or a value outside [0, 1] marks
// that candidate failed in the trace and the search continues. Throws
// std::invalid_argument on an empty or non-positive space or budget < 1 and
// std::runtime_error when every candidate failed.
TuningResult search_lengthscales(const TuningPipeline& pipeline,
                                 const TuningSpace& space,
                                 const TuningOptions& options = {});

// CSV trace: header "index,lengthscales,f_max,status"; lengthscales are
// semicolon-separated inside one field; f_max is empty for failed rows.
void write_tuning_csv(const std::vector<TuningCandidate>& trace,
                      std::ostream& out);

}  // namespace dpbound
