#pragma once

#include <Eigen/Dense>

#include <string>
#include <vector>

#include "dpbound/conic.hpp"
#include "dpbound/empirical.hpp"
#include "dpbound/graph.hpp"
#include "dpbound/kernels.hpp"

namespace dpbound {

struct SdpDiagnostics {
  double opt_relax = 0.0;  // optimum of the lifted relaxation (upper reading)
  double opt_orig = 0.0;   // original objective at the extracted weighting
  double gap_upper = 0.0;  // opt_relax - opt_orig
  double gamma_hat = 1.0;  // opt_orig / opt_relax, or 1 when opt_relax <= 0
  std::string solver_status;
  int cut_rounds = 0;
  int cuts_added = 0;
  double wall_time_ms = 0.0;
};

struct BoundResult {
  double value = 0.0;         // discrepancy bound for the objective route
  Eigen::VectorXd alpha_hat;  // extracted weighting over validation points
  SdpDiagnostics diagnostics;
};

// One incoming discrepancy constraint: the weighted validation points must
// stay within `bound` of the reference marginal in kernel discrepancy.
struct RouteBoundInput {
  SignalRoute route;
  KernelSpec kernel;
  Eigen::MatrixXd points;     // n x d validation signals on this route
  Eigen::MatrixXd reference;  // m x d reference marginal sample
  double bound = 0.0;
};

// Objective route: solve_bound maximizes the discrepancy between the weighted
// validation outputs and the reference marginal on this route.
struct OutputObjective {
  SignalRoute route;
  KernelSpec kernel;
  Eigen::MatrixXd points;
  Eigen::MatrixXd reference;
};

// Precomputed kernel data for one route term of a bound program.
struct SdpRouteTerm {
  SignalRoute route;
  Eigen::MatrixXd K;   // gram of the validation signals
  Eigen::VectorXd k;   // per-point mean cross-kernel against the reference
  double constant = 0.0;  // mean kernel within the reference sample
  double bound = 0.0;     // incoming bound (unused on the objective term)
};

struct SdpProgram {
  int n = 0;  // number of validation points being reweighted
  std::vector<SdpRouteTerm> inputs;
  SdpRouteTerm objective;
};

struct SolveOptions {
  int max_cut_rounds = 40;
  int max_cuts_per_round = 200;
  double cut_tolerance = 1e-8;
  // Stop cutting once a round fails to lower the relaxation optimum by this
  // relative amount. Near-discrete kernels saturate the lift at its analytic
  // ceiling, where entrywise cuts tighten nothing at quadratic cost; the
  // bound stays an upper bound wherever the loop stops.
  double cut_improvement_tol = 1e-3;
  ConicSettings solver;
};

// Assembles the kernel data for the lifted weighting program. The weighting
// variable is lifted to a bordered positive-semidefinite matrix
// [[A, alpha], [alpha', 1]] with alpha = A 1, sum(alpha) = 1, alpha >= 0, and
// entrywise nonnegativity of A enforced lazily through cutting planes.
// Supports up to 1000 validation points.
SdpProgram build_sdp(std::vector<RouteBoundInput> inputs,
                     OutputObjective objective);

// Maximizes the squared objective-route discrepancy over the lifted feasible
// set and returns B = sqrt(max(opt_relax, 0)) together with the extracted
// weighting and solve diagnostics. Throws when an incoming constraint is
// unsatisfiable over the validation support or when the conic solver fails.
BoundResult solve_bound(const SdpProgram& program,
                        const SolveOptions& options = {});

// Simplex-constrained minimum of alpha'K alpha - 2 k'alpha + constant via
// accelerated projected gradient; used to pre-check feasibility of bound
// programs and to name the offending route in error messages.
double min_route_discrepancy_sq(const Eigen::MatrixXd& K,
                                const Eigen::VectorXd& k, double constant,
                                int iterations = 500);

// Projection of an arbitrary vector onto the probability simplex.
Eigen::VectorXd project_to_simplex(const Eigen::VectorXd& v);

enum class SlackRule { None, Concentration };

struct InputBoundOptions {
  SlackRule slack = SlackRule::None;
  double delta = 0.05;  // only used with SlackRule::Concentration
};

// Empirical discrepancy between a collected sample and a reference sample on
// an input route, optionally inflated by a sqrt(log(1/delta)/n_min)
// concentration term.
double estimate_input_bound(const WeightedSamples& sample,
                            const WeightedSamples& reference,
                            const KernelSpec& kernel,
                            const InputBoundOptions& options = {});

std::vector<double> estimate_input_bounds(
    const std::vector<WeightedSamples>& samples,
    const std::vector<WeightedSamples>& references,
    const std::vector<KernelSpec>& kernels,
    const InputBoundOptions& options = {});

// Validation data for one component: inputs are concatenated in the same
// route order the component map consumes, outputs are the observed responses.
struct ComponentValidation {
  Eigen::MatrixXd inputs;
  Eigen::MatrixXd outputs;
};

struct PropagationInput {
  const ComponentGraph* graph = nullptr;
  std::vector<ComponentValidation> validation;   // one entry per component
  std::vector<Eigen::MatrixXd> route_marginals;  // aligned with all_routes()
  std::vector<KernelSpec> kernels;               // aligned with all_routes()
  // Bounds for routes leaving the global input (route.source == 0); entries
  // for other routes are ignored.
  std::vector<double> input_route_bounds;
};

struct SolveRecord {
  int route_index = -1;  // into graph->all_routes()
  BoundResult result;
};

struct PropagationResult {
  std::vector<double> route_bounds;  // aligned with all_routes()
  std::vector<SolveRecord> solves;   // ascending component order
  double tpi_bound = 0.0;
};

// Walks the components in topological (index) order, solving one bound
// program per outgoing route using the already-available incoming bounds,
// and finishes with the total-performance-indicator route.
PropagationResult run_propagation(const PropagationInput& input,
                                  const SolveOptions& options = {});

}  // namespace dpbound
