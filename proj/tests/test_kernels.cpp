#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Cholesky>
#include <cmath>

#include "dpbound/kernels.hpp"
#include "dpbound/rng.hpp"

using namespace dpbound;

namespace {
Eigen::VectorXd vec1(double x) { return Eigen::VectorXd::Constant(1, x); }
}  // namespace

TEST_CASE("squared-exponential convention") {
  KernelSpec k = sqexp_kernel(1.0);
  CHECK(eval_kernel(k, vec1(0.7), vec1(0.7)) == doctest::Approx(1.0));
  // exp(-r^2/2) = 1/2 at r = sqrt(2 ln 2)
  CHECK(eval_kernel(k, vec1(0.0), vec1(std::sqrt(2.0 * std::log(2.0)))) ==
        doctest::Approx(0.5).epsilon(1e-12));
  KernelSpec k3 = sqexp_kernel(3.0);
  CHECK(eval_kernel(k3, vec1(0.0), vec1(3.0)) == doctest::Approx(std::exp(-0.5)).epsilon(1e-12));
}

TEST_CASE("inverse-multiquadric convention") {
  KernelSpec k = imq_kernel(1.0);
  CHECK(eval_kernel(k, vec1(0.0), vec1(1.0)) == doctest::Approx(std::pow(2.0, -0.5)).epsilon(1e-12));
  CHECK(eval_kernel(k, vec1(2.0), vec1(2.0)) == doctest::Approx(1.0));
  KernelSpec k2 = imq_kernel(2.0);  // r^2/l^2 = 1 at |dx| = 2
  CHECK(eval_kernel(k2, vec1(0.0), vec1(2.0)) == doctest::Approx(std::pow(2.0, -0.5)).epsilon(1e-12));
}

TEST_CASE("ARD lengthscales match the per-dimension formula") {
  Eigen::VectorXd ls(3);
  ls << 0.5, 2.0, 7.0;
  KernelSpec k = sqexp_kernel(ls);
  Eigen::VectorXd x(3), y(3);
  x << 0.1, -0.4, 2.0;
  y << -0.3, 0.9, 1.0;
  double r2 = 0;
  for (int d = 0; d < 3; ++d) r2 += std::pow((x[d] - y[d]) / ls[d], 2);
  CHECK(eval_kernel(k, x, y) == doctest::Approx(std::exp(-0.5 * r2)).epsilon(1e-12));

  KernelSpec ki = imq_kernel(ls);
  CHECK(eval_kernel(ki, x, y) == doctest::Approx(std::pow(1.0 + r2, -0.5)).epsilon(1e-12));
}

TEST_CASE("gram basics") {
  KernelSpec k = sqexp_kernel(1.0);
  Eigen::MatrixXd X(2, 1), Y(1, 1);
  X << 0, 1;
  Y << 0;
  Eigen::MatrixXd G = gram(k, X, Y);
  REQUIRE(G.rows() == 2);
  REQUIRE(G.cols() == 1);
  CHECK(G(0, 0) == doctest::Approx(1.0));
  CHECK(G(1, 0) == doctest::Approx(std::exp(-0.5)).epsilon(1e-12));

  Eigen::MatrixXd single(1, 1);
  single << 4.2;
  CHECK(gram(k, single, single)(0, 0) == doctest::Approx(1.0));

  Eigen::MatrixXd Gj = gram(k, X, X, true);
  CHECK(Gj(0, 0) == doctest::Approx(1.0 + 1e-10));
  CHECK(Gj(1, 1) == doctest::Approx(1.0 + 1e-10));
  CHECK(Gj(0, 1) == doctest::Approx(std::exp(-0.5)).epsilon(1e-12));
}

TEST_CASE("gram agrees with eval_kernel entrywise") {
  Rng rng(7);
  Eigen::MatrixXd X(6, 2), Y(5, 2);
  for (int i = 0; i < X.size(); ++i) X.data()[i] = rng.uniform(-2, 2);
  for (int i = 0; i < Y.size(); ++i) Y.data()[i] = rng.uniform(-2, 2);
  for (KernelSpec k : {sqexp_kernel(0.7), imq_kernel(1.3)}) {
    Eigen::MatrixXd G = gram(k, X, Y);
    for (int i = 0; i < X.rows(); ++i)
      for (int j = 0; j < Y.rows(); ++j)
        CHECK(G(i, j) ==
              doctest::Approx(eval_kernel(k, X.row(i).transpose(), Y.row(j).transpose()))
                  .epsilon(1e-13));
  }
}

TEST_CASE("symmetry and positive definiteness with jitter") {
  Rng rng(11);
  Eigen::MatrixXd X(300, 3);
  for (int i = 0; i < X.size(); ++i) X.data()[i] = rng.uniform(-5, 5);
  for (KernelSpec k : {sqexp_kernel(1.0), imq_kernel(2.0)}) {
    Eigen::MatrixXd G = gram(k, X, X, true);
    CHECK((G - G.transpose()).cwiseAbs().maxCoeff() < 1e-14);
    Eigen::LLT<Eigen::MatrixXd> llt(G);
    CHECK(llt.info() == Eigen::Success);
  }
}

TEST_CASE("kernel value strictly decreases with distance") {
  for (KernelSpec k : {sqexp_kernel(1.5), imq_kernel(1.5)}) {
    double prev = 2.0;
    for (double r = 0.0; r < 10.0; r += 0.25) {
      double v = eval_kernel(k, vec1(0.0), vec1(r));
      CHECK(v < prev);
      CHECK(v > 0.0);
      CHECK(v <= 1.0);
      prev = v;
    }
  }
}

TEST_CASE("input validation") {
  KernelSpec k = sqexp_kernel(1.0);
  Eigen::VectorXd x(2), y(3);
  x.setZero();
  y.setZero();
  CHECK_THROWS_AS(eval_kernel(k, x, y), std::invalid_argument);

  KernelSpec bad = sqexp_kernel(-1.0);
  CHECK_THROWS_AS(eval_kernel(bad, x, x), std::invalid_argument);

  Eigen::VectorXd ls(3);
  ls << 1, 1, 1;
  KernelSpec mism = sqexp_kernel(ls);
  CHECK_THROWS_AS(eval_kernel(mism, x, x), std::invalid_argument);

  Eigen::MatrixXd X(2, 2), Y(3, 2);
  X.setZero();
  Y.setRandom();
  CHECK_THROWS_AS(gram(k, X, Y, true), std::invalid_argument);  // non-square jitter

  KernelSpec badexp = imq_kernel(1.0);
  badexp.imq_exponent = -1.5;
  CHECK_THROWS_AS(eval_kernel(badexp, x, x), std::invalid_argument);
}
