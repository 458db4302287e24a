#include "dpbound/propagation.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>
#include <sstream>
#include <stdexcept>
#include <utility>

namespace dpbound {

namespace {

std::string route_label(const SignalRoute& route) {
  std::ostringstream os;
  os << route.source << "->" << route.target;
  return os.str();
}

// Effective squared bound used inside the conic program: a hair of relative
// and absolute inflation keeps the feasible set strictly interior even when
// the nominal bound is zero.
double effective_bound_sq(double bound) {
  const double b = bound * (1.0 + 1e-9);
  // The absolute floor keeps a strictly feasible interior at the solver's
  // working precision when the bound is exactly attained (e.g. zero bound
  // with matching data); it costs at most sqrt(1e-7) on a zero bound.
  return b * b + 1e-7;
}

SdpRouteTerm make_route_term(const SignalRoute& route, const KernelSpec& kernel,
                             const Eigen::MatrixXd& points,
                             const Eigen::MatrixXd& reference, double bound) {
  if (points.rows() == 0 || reference.rows() == 0)
    throw std::invalid_argument("bound program: empty sample on route " +
                                route_label(route));
  if (points.cols() != reference.cols())
    throw std::invalid_argument(
        "bound program: sample/reference dimension mismatch on route " +
        route_label(route));
  SdpRouteTerm term;
  term.route = route;
  term.K = gram(kernel, points, points);
  term.k = gram(kernel, points, reference).rowwise().mean();
  term.constant = gram(kernel, reference, reference).mean();
  term.bound = bound;
  return term;
}

struct CutKey {
  int i = 0;
  int j = 0;
  bool operator<(const CutKey& other) const {
    return std::tie(i, j) < std::tie(other.i, other.j);
  }
};

// Assembles the standard-form conic program for the bordered lift with the
// currently active entrywise cuts.
ConicProblem assemble_lifted_program(const SdpProgram& program,
                                     const std::vector<CutKey>& cuts) {
  const int n = program.n;
  const int order = n + 1;
  const int num_routes = static_cast<int>(program.inputs.size());
  const int num_cuts = static_cast<int>(cuts.size());
  const int n_orth = num_routes + 2 * n + num_cuts;
  const int psd_off = n_orth;
  const int psd_len = svec_dim(order);
  const int num_vars = n_orth + psd_len;
  const int num_rows = num_routes + 2 + 3 * n + num_cuts;

  const double inv_sqrt2 = 1.0 / std::sqrt(2.0);
  auto sv = [&](int a, int b) {  // svec coordinate of entry (a, b), a >= b
    return psd_off + svec_index(a, b, order);
  };

  std::vector<Eigen::Triplet<double>> trips;
  trips.reserve(static_cast<size_t>(num_routes + 1) * psd_len +
                static_cast<size_t>(n) * (n + 4) + 3 * num_cuts + 8);
  Eigen::VectorXd b = Eigen::VectorXd::Zero(num_rows);
  int row = 0;

  // Incoming route constraints: Tr[K A] - 2 k'alpha + slack = beff^2 - const.
  for (int r = 0; r < num_routes; ++r) {
    const SdpRouteTerm& term = program.inputs[r];
    for (int j = 0; j < n; ++j) {
      trips.emplace_back(row, sv(j, j), term.K(j, j));
      for (int i = j + 1; i < n; ++i)
        trips.emplace_back(row, sv(i, j), std::sqrt(2.0) * term.K(i, j));
    }
    for (int i = 0; i < n; ++i)
      trips.emplace_back(row, sv(n, i), -std::sqrt(2.0) * term.k[i]);
    trips.emplace_back(row, r, 1.0);  // slack
    b[row] = effective_bound_sq(term.bound) - term.constant;
    ++row;
  }

  // Corner of the bordered matrix equals one.
  trips.emplace_back(row, sv(n, n), 1.0);
  b[row] = 1.0;
  ++row;

  // Border sums to one: sum_i alpha_i = 1.
  for (int i = 0; i < n; ++i) trips.emplace_back(row, sv(n, i), inv_sqrt2);
  b[row] = 1.0;
  ++row;

  // Row-sum link: sum_j A_ij = alpha_i.
  for (int i = 0; i < n; ++i) {
    trips.emplace_back(row, sv(i, i), 1.0);
    for (int j = 0; j < n; ++j)
      if (j != i)
        trips.emplace_back(row, sv(std::max(i, j), std::min(i, j)),
                           inv_sqrt2);
    trips.emplace_back(row, sv(n, i), -inv_sqrt2);
    ++row;
  }

  // Border nonnegativity: alpha_i = slack_i >= 0.
  for (int i = 0; i < n; ++i) {
    trips.emplace_back(row, sv(n, i), inv_sqrt2);
    trips.emplace_back(row, num_routes + i, -1.0);
    ++row;
  }

  // Diagonal dominance: A_ii <= alpha_i.  Exact lifts satisfy
  // A_ii = alpha_i^2 <= alpha_i on the simplex; together with positive
  // semidefiniteness this keeps the whole matrix block bounded even before
  // any entrywise cuts are in play.
  for (int i = 0; i < n; ++i) {
    trips.emplace_back(row, sv(i, i), 1.0);
    trips.emplace_back(row, sv(n, i), -inv_sqrt2);
    trips.emplace_back(row, num_routes + n + i, 1.0);
    ++row;
  }

  // Entrywise cuts: A_ij = slack >= 0.
  for (int t = 0; t < num_cuts; ++t) {
    trips.emplace_back(row, sv(cuts[t].i, cuts[t].j), inv_sqrt2);
    trips.emplace_back(row, num_routes + 2 * n + t, -1.0);
    ++row;
  }

  // Objective: maximize Tr[K_out A] - 2 k_out'alpha, i.e. minimize its
  // negation; the constant term is reinstated after the solve.
  Eigen::VectorXd c = Eigen::VectorXd::Zero(num_vars);
  for (int j = 0; j < n; ++j) {
    c[sv(j, j)] = -program.objective.K(j, j);
    for (int i = j + 1; i < n; ++i)
      c[sv(i, j)] = -std::sqrt(2.0) * program.objective.K(i, j);
  }
  for (int i = 0; i < n; ++i)
    c[sv(n, i)] = std::sqrt(2.0) * program.objective.k[i];

  ConicProblem problem;
  problem.A.resize(num_rows, num_vars);
  problem.A.setFromTriplets(trips.begin(), trips.end());
  problem.A.makeCompressed();
  problem.b = std::move(b);
  problem.c = std::move(c);
  problem.cones.orthant = n_orth;
  problem.cones.psd = {order};
  return problem;
}

}  // namespace

Eigen::VectorXd project_to_simplex(const Eigen::VectorXd& v) {
  const int n = static_cast<int>(v.size());
  std::vector<double> u(v.data(), v.data() + n);
  std::sort(u.begin(), u.end(), std::greater<double>());
  double cumulative = 0.0;
  double theta = 0.0;
  int support = 0;
  for (int j = 0; j < n; ++j) {
    cumulative += u[j];
    const double candidate = (cumulative - 1.0) / (j + 1);
    if (u[j] - candidate > 0.0) {
      theta = candidate;
      support = j + 1;
    }
  }
  (void)support;
  return (v.array() - theta).cwiseMax(0.0).matrix();
}

double min_route_discrepancy_sq(const Eigen::MatrixXd& K,
                                const Eigen::VectorXd& k, double constant,
                                int iterations) {
  const int n = static_cast<int>(K.rows());
  // Lipschitz constant of the gradient 2(K alpha - k) via power iteration.
  Eigen::VectorXd p = Eigen::VectorXd::Constant(n, 1.0 / std::sqrt(n));
  double lam = 1.0;
  for (int it = 0; it < 30; ++it) {
    Eigen::VectorXd q = K.selfadjointView<Eigen::Lower>() * p;
    lam = q.norm();
    if (lam <= 0.0) break;
    p = q / lam;
  }
  const double step = 1.0 / std::max(2.0 * lam * 1.01, 1e-12);

  auto value = [&](const Eigen::VectorXd& a) {
    return a.dot(K.selfadjointView<Eigen::Lower>() * a) - 2.0 * k.dot(a) +
           constant;
  };

  Eigen::VectorXd x = Eigen::VectorXd::Constant(n, 1.0 / n);
  Eigen::VectorXd yv = x;
  double t = 1.0;
  double best = value(x);
  for (int it = 0; it < iterations; ++it) {
    const Eigen::VectorXd grad =
        2.0 * (K.selfadjointView<Eigen::Lower>() * yv - k);
    Eigen::VectorXd x_next = project_to_simplex(yv - step * grad);
    const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
    yv = x_next + ((t - 1.0) / t_next) * (x_next - x);
    x = std::move(x_next);
    t = t_next;
    best = std::min(best, value(x));
  }
  return best;
}

SdpProgram build_sdp(std::vector<RouteBoundInput> inputs,
                     OutputObjective objective) {
  const int n = static_cast<int>(objective.points.rows());
  if (n < 1) throw std::invalid_argument("build_sdp: no validation points");
  if (n > 1000)
    throw std::invalid_argument(
        "build_sdp: more than 1000 validation points are not supported");

  SdpProgram program;
  program.n = n;
  for (const RouteBoundInput& input : inputs) {
    if (input.points.rows() != n)
      throw std::invalid_argument(
          "build_sdp: validation point count differs between routes");
    if (!(input.bound >= 0.0) || !std::isfinite(input.bound))
      throw std::invalid_argument(
          "build_sdp: incoming bound must be finite and nonnegative on route " +
          route_label(input.route));
    program.inputs.push_back(make_route_term(
        input.route, input.kernel, input.points, input.reference, input.bound));
  }
  program.objective = make_route_term(objective.route, objective.kernel,
                                      objective.points, objective.reference,
                                      0.0);
  return program;
}

BoundResult solve_bound(const SdpProgram& program, const SolveOptions& options) {
  const auto t_start = std::chrono::steady_clock::now();
  const int n = program.n;
  if (n < 1) throw std::invalid_argument("solve_bound: empty program");

  // Feasibility pre-check: every incoming constraint must be achievable by
  // some weighting of the validation points on its own.
  for (const SdpRouteTerm& term : program.inputs) {
    const double fmin =
        min_route_discrepancy_sq(term.K, term.k, term.constant);
    const double budget = term.bound * term.bound * (1.0 + 1e-6) + 1e-12;
    if (fmin > budget) {
      std::ostringstream os;
      os << "bound program infeasible on route " << route_label(term.route)
         << ": minimum achievable discrepancy "
         << std::sqrt(std::max(fmin, 0.0)) << " exceeds the incoming bound "
         << term.bound;
      throw std::runtime_error(os.str());
    }
  }

  std::vector<CutKey> cuts;
  std::set<CutKey> cut_set;
  ConicSolution sol;
  Eigen::MatrixXd Z;
  int rounds = 0;
  double prev_relax = std::numeric_limits<double>::infinity();

  for (int round = 0; round <= options.max_cut_rounds; ++round) {
    rounds = round;
    const ConicProblem problem = assemble_lifted_program(program, cuts);
    sol = solve_conic(problem, options.solver);

    if (sol.status == SolverStatus::PrimalInfeasible) {
      std::ostringstream os;
      os << "bound program reported infeasible by the conic solver;"
         << " incoming bounds:";
      for (const SdpRouteTerm& term : program.inputs)
        os << ' ' << route_label(term.route) << "=" << term.bound;
      throw std::runtime_error(os.str());
    }
    const bool near_optimal = sol.primal_res <= 1e-6 &&
                              sol.dual_res <= 1e-6 && sol.rel_gap <= 1e-5;
    if (sol.status != SolverStatus::Optimal && !near_optimal) {
      throw std::runtime_error("bound solver failed with status " +
                               to_string(sol.status));
    }

    const int psd_off = static_cast<int>(program.inputs.size()) + 2 * n +
                        static_cast<int>(cuts.size());
    Z = smat(sol.x.segment(psd_off, svec_dim(n + 1)));

    if (round == options.max_cut_rounds) break;
    const double cur_relax = std::max(-sol.primal_obj, -sol.dual_obj) +
                             program.objective.constant;
    if (round > 0 && options.cut_improvement_tol > 0.0 &&
        prev_relax - cur_relax <
            options.cut_improvement_tol * std::max(std::abs(prev_relax), 1e-9))
      break;
    prev_relax = cur_relax;
    // Collect the most negative entries of the weight matrix block.
    std::vector<std::pair<double, CutKey>> violations;
    for (int j = 0; j < n; ++j)
      for (int i = j + 1; i < n; ++i)
        if (Z(i, j) < -options.cut_tolerance && !cut_set.count({i, j}))
          violations.push_back({Z(i, j), {i, j}});
    if (violations.empty()) break;
    std::sort(violations.begin(), violations.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
    const int take = std::min<int>(options.max_cuts_per_round,
                                   static_cast<int>(violations.size()));
    for (int t = 0; t < take; ++t) {
      cuts.push_back(violations[t].second);
      cut_set.insert(violations[t].second);
    }
  }

  BoundResult result;
  result.alpha_hat = Z.row(n).head(n).transpose();

  const SdpRouteTerm& out = program.objective;
  // Conservative reading of the relaxation optimum: the dual objective of the
  // minimization certifies an upper bound on the maximized quadratic.
  const double relax_primal = -sol.primal_obj + out.constant;
  const double relax_dual = -sol.dual_obj + out.constant;
  result.diagnostics.opt_relax = std::max(relax_primal, relax_dual);
  const Eigen::VectorXd& a = result.alpha_hat;
  result.diagnostics.opt_orig = std::max(
      0.0, a.dot(out.K.selfadjointView<Eigen::Lower>() * a) -
               2.0 * out.k.dot(a) + out.constant);
  result.diagnostics.gap_upper =
      result.diagnostics.opt_relax - result.diagnostics.opt_orig;
  result.diagnostics.gamma_hat =
      result.diagnostics.opt_relax > 0.0
          ? result.diagnostics.opt_orig / result.diagnostics.opt_relax
          : 1.0;
  result.diagnostics.solver_status = to_string(sol.status);
  result.diagnostics.cut_rounds = rounds;
  result.diagnostics.cuts_added = static_cast<int>(cuts.size());
  result.diagnostics.wall_time_ms =
      std::chrono::duration<double, std::milli>(
          std::chrono::steady_clock::now() - t_start)
          .count();
  result.value = std::sqrt(std::max(result.diagnostics.opt_relax, 0.0));
  return result;
}

double estimate_input_bound(const WeightedSamples& sample,
                            const WeightedSamples& reference,
                            const KernelSpec& kernel,
                            const InputBoundOptions& options) {
  double bound = mmd_biased(kernel, sample, reference);
  if (options.slack == SlackRule::Concentration) {
    if (!(options.delta > 0.0) || !(options.delta < 1.0))
      throw std::invalid_argument(
          "estimate_input_bound: delta must lie in (0, 1)");
    const double n_min =
        static_cast<double>(std::min(sample.size(), reference.size()));
    bound += std::sqrt(std::log(1.0 / options.delta) / n_min);
  }
  return bound;
}

std::vector<double> estimate_input_bounds(
    const std::vector<WeightedSamples>& samples,
    const std::vector<WeightedSamples>& references,
    const std::vector<KernelSpec>& kernels,
    const InputBoundOptions& options) {
  if (samples.size() != references.size() || samples.size() != kernels.size())
    throw std::invalid_argument(
        "estimate_input_bounds: mismatched argument lengths");
  std::vector<double> bounds;
  bounds.reserve(samples.size());
  for (size_t i = 0; i < samples.size(); ++i)
    bounds.push_back(
        estimate_input_bound(samples[i], references[i], kernels[i], options));
  return bounds;
}

PropagationResult run_propagation(const PropagationInput& input,
                                  const SolveOptions& options) {
  if (input.graph == nullptr)
    throw std::invalid_argument("run_propagation: missing graph");
  const ComponentGraph& graph = *input.graph;
  const auto problems = graph.validate();
  if (!problems.empty())
    throw std::invalid_argument("run_propagation: invalid graph: " +
                                problems.front());
  const std::vector<SignalRoute> routes = graph.all_routes();
  const int num_routes = static_cast<int>(routes.size());
  const int num_components = graph.num_components();

  if (static_cast<int>(input.validation.size()) != num_components)
    throw std::invalid_argument(
        "run_propagation: one validation set per component is required");
  if (static_cast<int>(input.route_marginals.size()) != num_routes ||
      static_cast<int>(input.kernels.size()) != num_routes ||
      static_cast<int>(input.input_route_bounds.size()) != num_routes)
    throw std::invalid_argument(
        "run_propagation: route-aligned inputs must match all_routes()");

  PropagationResult result;
  result.route_bounds.assign(num_routes, 0.0);

  for (int idx = 0; idx < num_routes; ++idx) {
    if (routes[idx].source != 0) continue;
    const double bound = input.input_route_bounds[idx];
    if (!std::isfinite(bound) || bound < 0.0)
      throw std::invalid_argument(
          "run_propagation: input route bounds must be finite and "
          "nonnegative");
    result.route_bounds[idx] = bound;
  }

  for (int c = 1; c <= num_components; ++c) {
    const ComponentValidation& val = input.validation[c - 1];
    const int expected_in = graph.component(c).input_dim();
    if (static_cast<int>(val.inputs.cols()) != expected_in ||
        static_cast<int>(val.outputs.cols()) !=
            graph.component(c).output_dim ||
        val.inputs.rows() != val.outputs.rows() || val.inputs.rows() == 0)
      throw std::invalid_argument(
          "run_propagation: validation data shape mismatch for component " +
          std::to_string(c));

    // Incoming constraints, sliced from the concatenated validation inputs
    // in the same sorted-route order the component map consumes.
    std::vector<RouteBoundInput> incoming;
    int offset = 0;
    for (int idx = 0; idx < num_routes; ++idx) {
      if (routes[idx].target != c) continue;
      const int width = static_cast<int>(routes[idx].columns.size());
      RouteBoundInput rb;
      rb.route = routes[idx];
      rb.kernel = input.kernels[idx];
      rb.points = val.inputs.middleCols(offset, width);
      rb.reference = input.route_marginals[idx];
      rb.bound = result.route_bounds[idx];
      incoming.push_back(std::move(rb));
      offset += width;
    }
    if (offset != expected_in)
      throw std::invalid_argument(
          "run_propagation: route widths do not cover the inputs of "
          "component " +
          std::to_string(c));

    for (int idx = 0; idx < num_routes; ++idx) {
      if (routes[idx].source != c) continue;
      OutputObjective objective;
      objective.route = routes[idx];
      objective.kernel = input.kernels[idx];
      objective.points.resize(val.outputs.rows(),
                              static_cast<int>(routes[idx].columns.size()));
      for (size_t j = 0; j < routes[idx].columns.size(); ++j)
        objective.points.col(static_cast<int>(j)) =
            val.outputs.col(routes[idx].columns[j]);
      objective.reference = input.route_marginals[idx];

      BoundResult solved = solve_bound(build_sdp(incoming, objective), options);
      result.route_bounds[idx] = solved.value;
      result.solves.push_back({idx, std::move(solved)});
    }
  }

  result.tpi_bound = result.route_bounds.back();
  return result;
}

}  // namespace dpbound
