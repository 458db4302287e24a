#include "dpbound/kernels.hpp"

#include <cmath>
#include <stdexcept>

namespace dpbound {

namespace {

void check_lengthscales(const KernelSpec& k, int dim) {
  if (k.lengthscales.size() == 0) throw std::invalid_argument("kernel: empty lengthscales");
  if ((k.lengthscales.array() <= 0.0).any())
    throw std::invalid_argument("kernel: lengthscales must be positive");
  if (k.lengthscales.size() != 1 && k.lengthscales.size() != dim)
    throw std::invalid_argument("kernel: lengthscale count does not match dimension");
  if (!(k.imq_exponent > -1.0 && k.imq_exponent < 0.0))
    throw std::invalid_argument("kernel: imq_exponent must lie in (-1, 0)");
}

// Per-dimension inverse lengthscales, broadcast if shared.
Eigen::ArrayXd inv_lengthscales(const KernelSpec& k, int dim) {
  Eigen::ArrayXd inv(dim);
  if (k.lengthscales.size() == 1)
    inv.setConstant(1.0 / k.lengthscales[0]);
  else
    inv = k.lengthscales.array().inverse();
  return inv;
}

double apply_profile(const KernelSpec& k, double r2) {
  if (k.family == KernelFamily::SquaredExponential) return std::exp(-0.5 * r2);
  return std::pow(1.0 + r2, k.imq_exponent);
}

}  // namespace

KernelSpec sqexp_kernel(double lengthscale) {
  KernelSpec k;
  k.family = KernelFamily::SquaredExponential;
  k.lengthscales = Eigen::VectorXd::Constant(1, lengthscale);
  return k;
}

KernelSpec sqexp_kernel(const Eigen::VectorXd& lengthscales) {
  KernelSpec k;
  k.family = KernelFamily::SquaredExponential;
  k.lengthscales = lengthscales;
  return k;
}

KernelSpec imq_kernel(double lengthscale) {
  KernelSpec k;
  k.family = KernelFamily::InverseMultiquadric;
  k.lengthscales = Eigen::VectorXd::Constant(1, lengthscale);
  return k;
}

KernelSpec imq_kernel(const Eigen::VectorXd& lengthscales) {
  KernelSpec k;
  k.family = KernelFamily::InverseMultiquadric;
  k.lengthscales = lengthscales;
  return k;
}

double eval_kernel(const KernelSpec& k, const Eigen::VectorXd& x,
                   const Eigen::VectorXd& y) {
  if (x.size() != y.size()) throw std::invalid_argument("eval_kernel: dimension mismatch");
  check_lengthscales(k, static_cast<int>(x.size()));
  Eigen::ArrayXd inv = inv_lengthscales(k, static_cast<int>(x.size()));
  double r2 = ((x - y).array() * inv).square().sum();
  return apply_profile(k, r2);
}

Eigen::MatrixXd gram(const KernelSpec& k, const Eigen::MatrixXd& X,
                     const Eigen::MatrixXd& Y, bool add_jitter) {
  if (X.cols() != Y.cols()) throw std::invalid_argument("gram: dimension mismatch");
  check_lengthscales(k, static_cast<int>(X.cols()));
  Eigen::ArrayXd inv = inv_lengthscales(k, static_cast<int>(X.cols()));

  Eigen::MatrixXd Xs = X.array().rowwise() * inv.transpose();
  Eigen::MatrixXd Ys = Y.array().rowwise() * inv.transpose();
  Eigen::VectorXd xn = Xs.rowwise().squaredNorm();
  Eigen::VectorXd yn = Ys.rowwise().squaredNorm();
  Eigen::MatrixXd R2 = (-2.0 * Xs * Ys.transpose()).colwise() + xn;
  R2.rowwise() += yn.transpose();
  R2 = R2.cwiseMax(0.0);  // clamp tiny negative squared distances from roundoff

  Eigen::MatrixXd K(X.rows(), Y.rows());
  if (k.family == KernelFamily::SquaredExponential)
    K = (-0.5 * R2.array()).exp();
  else
    K = (1.0 + R2.array()).pow(k.imq_exponent);

  if (add_jitter) {
    if (X.rows() != Y.rows())
      throw std::invalid_argument("gram: jitter requires a square Gram matrix");
    K.diagonal().array() += k.jitter;
  }
  return K;
}

}  // namespace dpbound
