#include "dpbound/failure.hpp"

#include <Eigen/Cholesky>
#include <algorithm>
#include <cmath>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "dpbound/propagation.hpp"

namespace dpbound {

namespace {

// Tiny inflation of the squared budget so that an exactly attained bound
// (e.g. matching data with bound zero) keeps a strictly feasible interior
// the solver can actually see at its working precision.
double effective_bound_sq(double bound) {
  const double inflated = bound * (1.0 + 1e-9);
  return inflated * inflated + 1e-7;
}

double scalar_lengthscale(const KernelSpec& kernel) {
  if (kernel.lengthscales.size() != 1)
    throw std::invalid_argument(
        "failure program: the output kernel must be scalar (one lengthscale)");
  return kernel.lengthscales[0];
}

double grid_spacing(const Eigen::VectorXd& grid) {
  const int G = static_cast<int>(grid.size());
  if (G < 2) throw std::invalid_argument("failure program: grid needs >= 2 points");
  const double spacing = (grid[G - 1] - grid[0]) / (G - 1);
  if (!(spacing > 0.0))
    throw std::invalid_argument("failure program: grid must be increasing");
  for (int v = 1; v < G; ++v) {
    const double step = grid[v] - grid[v - 1];
    if (std::abs(step - spacing) > 1e-6 * spacing)
      throw std::invalid_argument(
          "failure program: grid must be equally spaced");
  }
  return spacing;
}

Eigen::MatrixXd column_matrix(const Eigen::VectorXd& grid) {
  Eigen::MatrixXd X(grid.size(), 1);
  X.col(0) = grid;
  return X;
}

// Cholesky factor of the grid Gram matrix, escalating the jitter a few times
// if needed; the matrix is strictly positive definite with distinct points.
Eigen::MatrixXd gram_cholesky(const Eigen::MatrixXd& K) {
  Eigen::MatrixXd A = K;
  double jitter = 0.0;
  for (int attempt = 0; attempt < 6; ++attempt) {
    Eigen::LLT<Eigen::MatrixXd> llt(A);
    if (llt.info() == Eigen::Success) return llt.matrixL();
    const double bump =
        (jitter == 0.0 ? 1e-12 : jitter * 100.0) * K.diagonal().maxCoeff();
    A = K + bump * Eigen::MatrixXd::Identity(K.rows(), K.cols());
    jitter = bump;
  }
  throw std::runtime_error(
      "failure program: grid Gram matrix is not positive definite");
}

}  // namespace

double default_tail_threshold(double threshold, double spacing) {
  return threshold - 1.5 * spacing;
}

Eigen::VectorXd build_grid(const WeightedSamples& q_y,
                           const FailureProgramConfig& cfg) {
  validate(q_y);
  if (q_y.dim() != 1)
    throw std::invalid_argument("build_grid: output samples must be scalar");
  if (!(cfg.grid_min < cfg.grid_max))
    throw std::invalid_argument("build_grid: grid_min must be below grid_max");

  std::vector<int> outliers;
  for (int i = 0; i < q_y.size(); ++i) {
    const double y = q_y.points(i, 0);
    if (y < cfg.grid_min || y > cfg.grid_max) outliers.push_back(i);
  }
  if (!outliers.empty()) {
    std::ostringstream os;
    os << "build_grid: " << outliers.size() << " sample(s) outside ["
       << cfg.grid_min << ", " << cfg.grid_max << "]:";
    const int show = std::min<int>(8, static_cast<int>(outliers.size()));
    for (int i = 0; i < show; ++i)
      os << " y[" << outliers[i] << "]=" << q_y.points(outliers[i], 0);
    if (static_cast<int>(outliers.size()) > show) os << " ...";
    throw std::invalid_argument(os.str());
  }

  const double target = scalar_lengthscale(cfg.kernel) / 5.0;
  const double span = cfg.grid_max - cfg.grid_min;
  const int intervals =
      std::max(1, static_cast<int>(std::ceil(span / target - 1e-12)));
  if (intervals > 200000)
    throw std::invalid_argument(
        "build_grid: grid would need more than 200001 points; widen the "
        "lengthscale or narrow the range");
  const int G = intervals + 1;
  Eigen::VectorXd grid(G);
  for (int v = 0; v < G; ++v)
    grid[v] = cfg.grid_min + span * static_cast<double>(v) / intervals;
  return grid;
}

double estimate_lipschitz(const WeightedSamples& q_y, int bins) {
  validate(q_y);
  if (q_y.dim() != 1)
    throw std::invalid_argument(
        "estimate_lipschitz: output samples must be scalar");
  if (bins < 2)
    throw std::invalid_argument("estimate_lipschitz: need at least 2 bins");
  const double lo = q_y.points.col(0).minCoeff();
  const double hi = q_y.points.col(0).maxCoeff();
  if (!(hi > lo))
    throw std::invalid_argument(
        "estimate_lipschitz: all points coincide, density is degenerate");

  const double width = (hi - lo) / bins;
  Eigen::VectorXd mass = Eigen::VectorXd::Zero(bins);
  for (int i = 0; i < q_y.size(); ++i) {
    int b = static_cast<int>((q_y.points(i, 0) - lo) / width);
    b = std::min(std::max(b, 0), bins - 1);
    mass[b] += q_y.weights[i];
  }
  // Bin density is mass / width; the slope estimate divides the density
  // difference by the bin width once more.
  double lip = 0.0;
  for (int b = 0; b + 1 < bins; ++b)
    lip = std::max(lip, std::abs(mass[b + 1] - mass[b]) / (width * width));
  return lip;
}

FailureBoundResult failure_bound(const Eigen::VectorXd& grid,
                                 const WeightedSamples& q_y, double bound,
                                 const FailureProgramConfig& cfg,
                                 const ConicSettings& solver) {
  validate(q_y);
  if (q_y.dim() != 1)
    throw std::invalid_argument(
        "failure_bound: output samples must be scalar");
  if (!(bound >= 0.0) || !std::isfinite(bound))
    throw std::invalid_argument(
        "failure_bound: the discrepancy bound must be finite and >= 0");
  if (!(cfg.lipschitz >= 0.0))
    throw std::invalid_argument("failure_bound: lipschitz must be >= 0");

  const int G = static_cast<int>(grid.size());
  const double spacing = grid_spacing(grid);
  const double ell = scalar_lengthscale(cfg.kernel);
  if (spacing > ell / 5.0 * (1.0 + 1e-9))
    throw std::invalid_argument(
        "failure_bound: grid spacing exceeds lengthscale / 5");
  if (!(cfg.threshold > grid[0]))
    throw std::invalid_argument(
        "failure_bound: threshold must lie above the first grid point");

  const Eigen::MatrixXd Xg = column_matrix(grid);
  const Eigen::MatrixXd K = gram(cfg.kernel, Xg, Xg, /*add_jitter=*/true);
  const Eigen::VectorXd k =
      gram(cfg.kernel, Xg, q_y.points) * q_y.weights;
  const double c_mm =
      q_y.weights.dot(gram(cfg.kernel, q_y.points, q_y.points) *
                      q_y.weights);
  // Budgets beyond the largest achievable discrepancy are capped: the
  // constraint stays vacuous either way, and the cap keeps the program data
  // well scaled (a raw bound like 1e3 would put ~1e6 into the right-hand
  // side and drown the simplex row in relative tolerance).
  const double quad_max =
      K.diagonal().maxCoeff() + 2.0 * k.cwiseAbs().maxCoeff() + c_mm;
  const double beff_sq = std::min(effective_bound_sq(bound), quad_max + 1.0);

  const double min_sq = min_route_discrepancy_sq(K, k, c_mm);
  if (min_sq > beff_sq * (1.0 + 1e-6) + 1e-12) {
    std::ostringstream os;
    os << "failure program infeasible: no grid distribution meets the "
          "discrepancy budget "
       << bound << "; the minimal achievable discrepancy is about "
       << std::sqrt(std::max(min_sq, 0.0));
    throw std::runtime_error(os.str());
  }

  // Variable layout: [alpha (G) | monotonicity slacks | Lipschitz slack
  // pairs | second-order-cone block u (G + 2)]. The cone encodes
  // ||L'alpha||^2 <= rho(alpha) with rho = beff_sq - c_mm + 2 k'alpha via
  // u = ((rho+1)/2, L'alpha, (rho-1)/2).
  std::vector<int> mono;  // v with a constraint alpha_v <= alpha_{v-1}
  if (cfg.monotonicity)
    for (int v = 1; v < G; ++v)
      if (grid[v] >= cfg.tail_threshold) mono.push_back(v);
  const bool use_lip = std::isfinite(cfg.lipschitz);
  const int lip_edges = use_lip ? G - 1 : 0;
  const double lip_budget = cfg.lipschitz_on_weights
                                ? cfg.lipschitz * spacing
                                : cfg.lipschitz * spacing * spacing;

  const int num_mono = static_cast<int>(mono.size());
  const int n_orth = G + num_mono + 2 * lip_edges;
  const int soc_off = n_orth;
  const int soc_dim = G + 2;
  const int num_vars = n_orth + soc_dim;
  const int num_rows = 1 + soc_dim + num_mono + 2 * lip_edges;

  const Eigen::MatrixXd L = gram_cholesky(K);
  const double c0 = beff_sq - c_mm;

  std::vector<Eigen::Triplet<double>> trips;
  trips.reserve(static_cast<size_t>(G) * (G + 4) + 3 * (num_mono + lip_edges));
  Eigen::VectorXd b = Eigen::VectorXd::Zero(num_rows);
  int row = 0;

  // Probability simplex: weights sum to one.
  for (int v = 0; v < G; ++v) trips.emplace_back(row, v, 1.0);
  b[row] = 1.0;
  ++row;

  // u_0 - k'alpha = (c0 + 1) / 2.
  for (int v = 0; v < G; ++v) trips.emplace_back(row, v, -k[v]);
  trips.emplace_back(row, soc_off, 1.0);
  b[row] = 0.5 * (c0 + 1.0);
  ++row;

  // u_{1..G} = L' alpha.
  for (int i = 0; i < G; ++i) {
    for (int j = i; j < G; ++j)
      trips.emplace_back(row, j, -L(j, i));
    trips.emplace_back(row, soc_off + 1 + i, 1.0);
    ++row;
  }

  // u_{G+1} - k'alpha = (c0 - 1) / 2.
  for (int v = 0; v < G; ++v) trips.emplace_back(row, v, -k[v]);
  trips.emplace_back(row, soc_off + G + 1, 1.0);
  b[row] = 0.5 * (c0 - 1.0);
  ++row;

  // Non-increasing tail: alpha_v - alpha_{v-1} + slack = 0.
  for (int t = 0; t < num_mono; ++t) {
    const int v = mono[t];
    trips.emplace_back(row, v, 1.0);
    trips.emplace_back(row, v - 1, -1.0);
    trips.emplace_back(row, G + t, 1.0);
    ++row;
  }

  // Lipschitz band: |alpha_{v+1} - alpha_v| <= lip_budget via two slacks.
  for (int e = 0; e < lip_edges; ++e) {
    trips.emplace_back(row, e + 1, 1.0);
    trips.emplace_back(row, e, -1.0);
    trips.emplace_back(row, G + num_mono + 2 * e, 1.0);
    b[row] = lip_budget;
    ++row;
    trips.emplace_back(row, e, 1.0);
    trips.emplace_back(row, e + 1, -1.0);
    trips.emplace_back(row, G + num_mono + 2 * e + 1, 1.0);
    b[row] = lip_budget;
    ++row;
  }

  // Maximize the mass strictly above the threshold.
  Eigen::VectorXd c = Eigen::VectorXd::Zero(num_vars);
  for (int v = 0; v < G; ++v)
    if (grid[v] > cfg.threshold) c[v] = -1.0;

  ConicProblem problem;
  problem.A.resize(num_rows, num_vars);
  problem.A.setFromTriplets(trips.begin(), trips.end());
  problem.A.makeCompressed();
  problem.b = std::move(b);
  problem.c = std::move(c);
  problem.cones.orthant = n_orth;
  problem.cones.soc = {soc_dim};

  const ConicSolution sol = solve_conic(problem, solver);
  if (sol.status == SolverStatus::PrimalInfeasible) {
    std::ostringstream os;
    os << "failure program infeasible under the shape constraints "
          "(monotonicity/Lipschitz); the budget alone admits a distribution "
          "at discrepancy "
       << std::sqrt(std::max(min_sq, 0.0)) << " within the bound " << bound;
    throw std::runtime_error(os.str());
  }
  const bool near_optimal = sol.primal_res <= 1e-6 && sol.dual_res <= 1e-6 &&
                            std::abs(sol.rel_gap) <= 1e-5;
  if (sol.status != SolverStatus::Optimal && !near_optimal)
    throw std::runtime_error("failure bound solver failed with status " +
                             to_string(sol.status));

  FailureBoundResult result;
  result.alpha_star = sol.x.head(G).cwiseMax(0.0);
  // The dual objective certifies the maximum; take the larger reading so
  // numerical slack never pushes the reported bound below the optimum.
  result.f_max = std::clamp(std::max(-sol.primal_obj, -sol.dual_obj), 0.0, 1.0);

  const Eigen::VectorXd& a = result.alpha_star;
  const double quad = a.dot(K.selfadjointView<Eigen::Lower>() * a) -
                      2.0 * k.dot(a) + c_mm;
  const double tol = 1e-6;
  if (beff_sq - quad <= tol) result.binding.push_back("budget");
  if (a.minCoeff() <= tol) result.binding.push_back("nonnegativity");
  for (int v : mono)
    if (a[v - 1] - a[v] <= tol) {
      result.binding.push_back("monotonicity");
      break;
    }
  if (use_lip)
    for (int e = 0; e < lip_edges; ++e)
      if (std::abs(a[e + 1] - a[e]) >= lip_budget - tol) {
        result.binding.push_back("lipschitz");
        break;
      }
  return result;
}

void write_failure_csv(const Eigen::VectorXd& grid,
                       const Eigen::VectorXd& alpha, std::ostream& out) {
  out << "g,alpha\n";
  for (int v = 0; v < grid.size(); ++v)
    out << grid[v] << ',' << alpha[v] << '\n';
}

}  // namespace dpbound
