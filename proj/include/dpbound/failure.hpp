#pragma once

#include <Eigen/Dense>
#include <iosfwd>
#include <limits>
#include <string>
#include <vector>

#include "dpbound/conic.hpp"
#include "dpbound/empirical.hpp"
#include "dpbound/kernels.hpp"

namespace dpbound {

// Configuration of the worst-case failure program over a grid of candidate
// output values. A candidate output distribution is a weight vector alpha on
// the grid; the program maximizes the probability mass above `threshold`
// subject to the discrepancy budget against the model output sample and
// optional shape constraints on the weights.
struct FailureProgramConfig {
  double grid_min = 0.0;
  double grid_max = 1.0;
  // Failure means the scalar output exceeds this value.
  double threshold = 0.5;
  // Weights must be non-increasing for grid points at or above this value
  // (only when monotonicity is on). The conventional choice is
  // default_tail_threshold(threshold, spacing).
  double tail_threshold = 0.5;
  // Lipschitz budget for the reconstructed density; +infinity disables the
  // constraint.
  double lipschitz = std::numeric_limits<double>::infinity();
  bool monotonicity = true;
  // Weights stand for density times grid spacing, so the Lipschitz budget on
  // adjacent weights defaults to lipschitz * spacing^2. This flag switches to
  // the literal weight-space reading, lipschitz * spacing.
  bool lipschitz_on_weights = false;
  // Scalar kernel used for the discrepancy; the grid spacing may not exceed
  // one fifth of its lengthscale.
  KernelSpec kernel = sqexp_kernel(1.0);
};

struct FailureBoundResult {
  // Worst-case probability of exceeding the threshold, in [0, 1].
  double f_max = 0.0;
  // Maximizing grid weights (nonnegative, sums to one).
  Eigen::VectorXd alpha_star;
  // Constraint families active at the optimum within 1e-6; subset of
  // {"budget", "nonnegativity", "monotonicity", "lipschitz"}.
  std::vector<std::string> binding;
};

// tau' = tau - 1.5 * spacing: the non-increasing tail starts just below the
// threshold so the constraint also covers the grid point straddling it.
double default_tail_threshold(double threshold, double spacing);

// Equally spaced grid over [cfg.grid_min, cfg.grid_max] with the smallest
// point count whose spacing is at most lengthscale / 5. Throws
// std::invalid_argument when the range is empty or any q_y point falls
// outside the range (the message lists the outliers).
Eigen::VectorXd build_grid(const WeightedSamples& q_y,
                           const FailureProgramConfig& cfg);

// Largest slope of a density-normalized histogram of q_y: with bin masses
// m_i and width w, returns max_i |m_{i+1} - m_i| / w^2. Throws when all
// points coincide (no density to speak of).
double estimate_lipschitz(const WeightedSamples& q_y, int bins = 100);

// Solves the failure program: maximize the alpha-mass strictly above
// cfg.threshold subject to
//   - alpha in the probability simplex,
//   - weighted-grid discrepancy to q_y at most `bound` (second-order cone
//     via a Cholesky factor of the grid Gram matrix),
//   - optional non-increasing weights for grid values >= cfg.tail_threshold,
//   - optional Lipschitz budget on adjacent weight differences.
// A threshold at or above the last grid point yields f_max = 0. Throws
// std::invalid_argument on malformed inputs (threshold not above the first
// grid point, uneven or too-coarse grid) and std::runtime_error when the
// program is infeasible (reporting the minimal achievable discrepancy) or
// the solver fails.
FailureBoundResult failure_bound(const Eigen::VectorXd& grid,
                                 const WeightedSamples& q_y, double bound,
                                 const FailureProgramConfig& cfg,
                                 const ConicSettings& solver = {});

// CSV dump of the worst-case distribution: header "g,alpha", one grid point
// per row. Used for plotting worst-case output distributions.
void write_failure_csv(const Eigen::VectorXd& grid,
                       const Eigen::VectorXd& alpha, std::ostream& out);

}  // namespace dpbound
