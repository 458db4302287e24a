#pragma once

#include <Eigen/Dense>

namespace dpbound {

enum class KernelFamily { SquaredExponential, InverseMultiquadric };

// Positive-definite kernel with per-dimension (ARD) or shared lengthscales.
// Conventions (both normalized so k(x,x) = 1):
//   SquaredExponential: k(x,y) = exp(-1/2 * sum_d (x_d-y_d)^2 / l_d^2)
//   InverseMultiquadric: k(x,y) = (1 + sum_d (x_d-y_d)^2 / l_d^2)^exponent
struct KernelSpec {
  KernelFamily family = KernelFamily::SquaredExponential;
  Eigen::VectorXd lengthscales;  // size 1 => shared across all dimensions
  double imq_exponent = -0.5;
  double jitter = 1e-10;
};

KernelSpec sqexp_kernel(double lengthscale);
KernelSpec sqexp_kernel(const Eigen::VectorXd& lengthscales);
KernelSpec imq_kernel(double lengthscale);
KernelSpec imq_kernel(const Eigen::VectorXd& lengthscales);

double eval_kernel(const KernelSpec& k, const Eigen::VectorXd& x,
                   const Eigen::VectorXd& y);

// Gram matrix K[i][j] = k(X_i, Y_j) for row-major point sets (one point per
// row). add_jitter adds k.jitter to the diagonal and requires X.rows() ==
// Y.rows() (intended for X == Y, ahead of a Cholesky factorization).
Eigen::MatrixXd gram(const KernelSpec& k, const Eigen::MatrixXd& X,
                     const Eigen::MatrixXd& Y, bool add_jitter = false);

}  // namespace dpbound
