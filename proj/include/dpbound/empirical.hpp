#pragma once

#include <Eigen/Dense>
#include <iosfwd>
#include <vector>

#include "dpbound/kernels.hpp"

namespace dpbound {

// Weighted Dirac mixture: sum_i weights[i] * delta_{points.row(i)}.
struct WeightedSamples {
  Eigen::MatrixXd points;   // n x d, one sample per row
  Eigen::VectorXd weights;  // n, nonnegative, sums to 1

  static WeightedSamples uniform(Eigen::MatrixXd pts);

  int size() const { return static_cast<int>(points.rows()); }
  int dim() const { return static_cast<int>(points.cols()); }
};

// Throws std::invalid_argument when weights are negative beyond tolerance,
// do not sum to 1 (within 1e-9), or the set is empty.
void validate(const WeightedSamples& ws);

// A directed signal connection in the component DAG: selected columns of the
// source signal (component c' output, or the global input when source == 0)
// feeding the target component's input block.
struct SignalRoute {
  int source = 0;
  int target = 1;
  std::vector<int> columns;
};

// Projection onto a column subset; weights are untouched.
WeightedSamples marginal(const WeightedSamples& ws, const std::vector<int>& columns);
WeightedSamples marginal(const WeightedSamples& ws, const SignalRoute& route);

// Biased (V-statistic) squared MMD between two weighted Dirac mixtures:
//   wP' Kpp wP - 2 wP' Kpq wQ + wQ' Kqq wQ,
// clamped at 0 to absorb roundoff. mmd_biased is its square root.
double mmd_biased_sq(const KernelSpec& k, const WeightedSamples& P,
                     const WeightedSamples& Q);
double mmd_biased(const KernelSpec& k, const WeightedSamples& P,
                  const WeightedSamples& Q);

// Unbiased (U-statistic) estimate of squared MMD for uniformly weighted sets
// of >= 2 points; returns sign(m2)*sqrt(|m2|), which may be negative.
// Within-set means exclude the diagonal. For equally sized sets the cross
// term also excludes matched-index pairs (the classical equal-size
// U-statistic, which is exactly 0 when P == Q); for unequal sizes the full
// cross mean is used.
double mmd_unbiased(const KernelSpec& k, const WeightedSamples& P,
                    const WeightedSamples& Q);

// Debugging dumps: one row per point, the last column is the weight.
void write_csv(const WeightedSamples& ws, std::ostream& out);
WeightedSamples read_csv(std::istream& in);

}  // namespace dpbound
