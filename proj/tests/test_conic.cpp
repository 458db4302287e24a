#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Dense>

#include <cmath>
#include <vector>

#include "dpbound/conic.hpp"
#include "dpbound/rng.hpp"

using dpbound::ConeSpec;
using dpbound::ConicProblem;
using dpbound::ConicSettings;
using dpbound::ConicSolution;
using dpbound::Rng;
using dpbound::SolverStatus;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

MatrixXd random_matrix(int rows, int cols, Rng& rng) {
  MatrixXd M(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) M(i, j) = rng.normal();
  return M;
}

MatrixXd random_orthogonal(int n, Rng& rng) {
  Eigen::HouseholderQR<MatrixXd> qr(random_matrix(n, n, rng));
  return qr.householderQ();
}

ConicProblem make_problem(const MatrixXd& A, const VectorXd& b,
                          const VectorXd& c, ConeSpec cones) {
  ConicProblem p;
  p.A = A.sparseView();
  p.A.makeCompressed();
  p.b = b;
  p.c = c;
  p.cones = std::move(cones);
  return p;
}

void check_cone_membership(const ConeSpec& cones, const VectorXd& v,
                           double tol) {
  int off = 0;
  for (int i = 0; i < cones.orthant; ++i) CHECK(v[off + i] >= -tol);
  off += cones.orthant;
  for (int dim : cones.soc) {
    CHECK(v[off] + tol >= v.segment(off + 1, dim - 1).norm());
    off += dim;
  }
  for (int order : cones.psd) {
    const MatrixXd S = dpbound::smat(v.segment(off, dpbound::svec_dim(order)));
    Eigen::SelfAdjointEigenSolver<MatrixXd> eig(S, Eigen::EigenvaluesOnly);
    const double scale = std::max(1.0, S.cwiseAbs().maxCoeff());
    CHECK(eig.eigenvalues().minCoeff() >= -tol * scale);
    off += dpbound::svec_dim(order);
  }
}

void check_optimal(const ConicProblem& p, const ConicSolution& sol,
                   double expected, double tol) {
  REQUIRE(sol.status == SolverStatus::Optimal);
  CHECK(sol.primal_res <= 1e-6);
  CHECK(sol.dual_res <= 1e-6);
  CHECK(std::abs(sol.primal_obj - expected) <= tol);
  CHECK(std::abs(sol.dual_obj - expected) <= tol);
  check_cone_membership(p.cones, sol.x, 1e-6);
  check_cone_membership(p.cones, sol.z, 1e-6);
}

// Builds a random instance with a known optimum by choosing a strictly
// complementary primal-dual pair (x*, z*) and setting b = A x*,
// c = A'y* + z*. Zero duality gap certifies both as optimal, so the optimal
// value is c'x* regardless of uniqueness.
struct PairInstance {
  ConicProblem problem;
  double optimum = 0.0;
};

PairInstance make_pair_instance(int m, const ConeSpec& cones, Rng& rng) {
  const int n = cones.total_dim();
  VectorXd xs = VectorXd::Zero(n);
  VectorXd zs = VectorXd::Zero(n);

  int off = 0;
  for (int i = 0; i < cones.orthant; ++i) {
    if (rng.uniform01() < 0.5)
      xs[i] = 0.5 + rng.uniform01();
    else
      zs[i] = 0.5 + rng.uniform01();
  }
  off += cones.orthant;

  for (size_t blk = 0; blk < cones.soc.size(); ++blk) {
    const int dim = cones.soc[blk];
    VectorXd d(dim - 1);
    for (int i = 0; i < dim - 1; ++i) d[i] = rng.normal();
    d.normalize();
    switch (blk % 3) {
      case 0: {  // both on the boundary, complementary directions
        const double t = 0.5 + rng.uniform01();
        const double s = 0.5 + rng.uniform01();
        xs[off] = t;
        xs.segment(off + 1, dim - 1) = t * d;
        zs[off] = s;
        zs.segment(off + 1, dim - 1) = -s * d;
        break;
      }
      case 1: {  // primal interior, dual zero
        xs[off] = 2.0 + rng.uniform01();
        for (int i = 0; i < dim - 1; ++i) xs[off + 1 + i] = rng.normal() * 0.3;
        break;
      }
      default: {  // primal zero, dual interior
        zs[off] = 2.0 + rng.uniform01();
        for (int i = 0; i < dim - 1; ++i) zs[off + 1 + i] = rng.normal() * 0.3;
        break;
      }
    }
    off += dim;
  }

  for (int order : cones.psd) {
    const MatrixXd Q = random_orthogonal(order, rng);
    VectorXd ex = VectorXd::Zero(order);
    VectorXd ez = VectorXd::Zero(order);
    const int k = std::max(1, order / 2);
    for (int i = 0; i < order; ++i) {
      if (i < k)
        ex[i] = 0.5 + rng.uniform01();
      else
        ez[i] = 0.5 + rng.uniform01();
    }
    xs.segment(off, dpbound::svec_dim(order)) =
        dpbound::svec(Q * ex.asDiagonal() * Q.transpose());
    zs.segment(off, dpbound::svec_dim(order)) =
        dpbound::svec(Q * ez.asDiagonal() * Q.transpose());
    off += dpbound::svec_dim(order);
  }

  const MatrixXd A = random_matrix(m, n, rng);
  VectorXd ys(m);
  for (int i = 0; i < m; ++i) ys[i] = rng.normal();

  PairInstance inst;
  inst.problem = make_problem(A, A * xs, A.transpose() * ys + zs, cones);
  inst.optimum = inst.problem.c.dot(xs);
  return inst;
}

}  // namespace

TEST_CASE("svec and smat invert each other and preserve inner products") {
  Rng rng(11);
  for (int order : {1, 2, 3, 6}) {
    MatrixXd S = random_matrix(order, order, rng);
    S = ((S + S.transpose()) / 2.0).eval();
    MatrixXd T = random_matrix(order, order, rng);
    T = ((T + T.transpose()) / 2.0).eval();
    const VectorXd vs = dpbound::svec(S);
    CHECK(vs.size() == dpbound::svec_dim(order));
    CHECK((dpbound::smat(vs) - S).cwiseAbs().maxCoeff() < 1e-14);
    const double direct = (S.array() * T.array()).sum();
    CHECK(vs.dot(dpbound::svec(T)) == doctest::Approx(direct).epsilon(1e-12));
  }
  CHECK(dpbound::svec_dim(3) == 6);
  CHECK(dpbound::svec_index(0, 0, 3) == 0);
  CHECK(dpbound::svec_index(2, 0, 3) == 2);
  CHECK(dpbound::svec_index(1, 1, 3) == 3);
  CHECK(dpbound::svec_index(2, 2, 3) == 5);
  CHECK(dpbound::svec_scale(1, 1) == 1.0);
  CHECK(dpbound::svec_scale(2, 1) == doctest::Approx(std::sqrt(2.0)));
}

TEST_CASE("linear program with a hand-solved optimum") {
  // max x1 + 2 x2 subject to x1 + x2 <= 1, x >= 0, via a slack variable.
  MatrixXd A(1, 3);
  A << 1.0, 1.0, 1.0;
  VectorXd b(1), c(3);
  b << 1.0;
  c << -1.0, -2.0, 0.0;
  ConeSpec cones;
  cones.orthant = 3;
  const auto sol = dpbound::solve_conic(make_problem(A, b, c, cones));
  check_optimal(make_problem(A, b, c, cones), sol, -2.0, 1e-7);
  CHECK(std::abs(sol.x[0]) < 1e-7);
  CHECK(sol.x[1] == doctest::Approx(1.0));
  CHECK(sol.y[0] == doctest::Approx(-2.0));
}

TEST_CASE("random linear programs match constructed optima") {
  Rng rng(2026);
  for (int trial = 0; trial < 10; ++trial) {
    ConeSpec cones;
    cones.orthant = 12;
    const auto inst = make_pair_instance(5, cones, rng);
    const auto sol = dpbound::solve_conic(inst.problem);
    check_optimal(inst.problem, sol, inst.optimum,
                  1e-5 * std::max(1.0, std::abs(inst.optimum)));
  }
}

TEST_CASE("second-order cone programs with hand-solved optima") {
  SUBCASE("maximize a linear form over the unit ball") {
    MatrixXd A(1, 3);
    A << 1.0, 0.0, 0.0;
    VectorXd b(1), c(3);
    b << 1.0;
    c << 0.0, -1.0, -1.0;
    ConeSpec cones;
    cones.soc = {3};
    const auto p = make_problem(A, b, c, cones);
    const auto sol = dpbound::solve_conic(p);
    check_optimal(p, sol, -std::sqrt(2.0), 1e-7);
    CHECK(sol.x[1] == doctest::Approx(1.0 / std::sqrt(2.0)));
    CHECK(sol.x[2] == doctest::Approx(1.0 / std::sqrt(2.0)));
  }
  SUBCASE("minimal cone height over a fixed tail is the tail norm") {
    MatrixXd A(2, 3);
    A << 0.0, 1.0, 0.0, 0.0, 0.0, 1.0;
    VectorXd b(2), c(3);
    b << 3.0, 4.0;
    c << 1.0, 0.0, 0.0;
    ConeSpec cones;
    cones.soc = {3};
    const auto p = make_problem(A, b, c, cones);
    const auto sol = dpbound::solve_conic(p);
    check_optimal(p, sol, 5.0, 1e-6);
  }
}

TEST_CASE("random second-order cone programs match constructed optima") {
  Rng rng(77);
  for (int trial = 0; trial < 10; ++trial) {
    ConeSpec cones;
    cones.orthant = 4;
    cones.soc = {3, 4, 5};
    const auto inst = make_pair_instance(6, cones, rng);
    const auto sol = dpbound::solve_conic(inst.problem);
    check_optimal(inst.problem, sol, inst.optimum,
                  1e-5 * std::max(1.0, std::abs(inst.optimum)));
  }
}

TEST_CASE("semidefinite program recovers the smallest eigenvalue") {
  Rng rng(5);
  for (int trial = 0; trial < 5; ++trial) {
    const int order = 5;
    MatrixXd C = random_matrix(order, order, rng);
    C = ((C + C.transpose()) / 2.0).eval();
    MatrixXd A(1, dpbound::svec_dim(order));
    A.row(0) = dpbound::svec(MatrixXd::Identity(order, order)).transpose();
    VectorXd b(1);
    b << 1.0;
    ConeSpec cones;
    cones.psd = {order};
    const auto p = make_problem(A, b, dpbound::svec(C), cones);
    const auto sol = dpbound::solve_conic(p);
    Eigen::SelfAdjointEigenSolver<MatrixXd> eig(C, Eigen::EigenvaluesOnly);
    check_optimal(p, sol, eig.eigenvalues().minCoeff(), 1e-6);
  }
}

TEST_CASE("random semidefinite programs match constructed optima") {
  Rng rng(404);
  for (int trial = 0; trial < 5; ++trial) {
    ConeSpec cones;
    cones.psd = {6};
    const auto inst = make_pair_instance(8, cones, rng);
    const auto sol = dpbound::solve_conic(inst.problem);
    check_optimal(inst.problem, sol, inst.optimum,
                  1e-5 * std::max(1.0, std::abs(inst.optimum)));
  }
}

TEST_CASE("mixed-cone instances match constructed optima") {
  Rng rng(909);
  for (int trial = 0; trial < 5; ++trial) {
    ConeSpec cones;
    cones.orthant = 5;
    cones.soc = {4};
    cones.psd = {4, 3};
    const auto inst = make_pair_instance(9, cones, rng);
    const auto sol = dpbound::solve_conic(inst.problem);
    check_optimal(inst.problem, sol, inst.optimum,
                  1e-5 * std::max(1.0, std::abs(inst.optimum)));
  }
}

TEST_CASE("infeasible programs are certified") {
  SUBCASE("orthant") {
    MatrixXd A(1, 2);
    A << 1.0, 1.0;
    VectorXd b(1), c(2);
    b << -1.0;
    c << 1.0, 1.0;
    ConeSpec cones;
    cones.orthant = 2;
    const auto sol = dpbound::solve_conic(make_problem(A, b, c, cones));
    CHECK(sol.status == SolverStatus::PrimalInfeasible);
  }
  SUBCASE("second-order") {
    MatrixXd A(1, 3);
    A << 1.0, 0.0, 0.0;
    VectorXd b(1), c(3);
    b << -2.0;
    c << 0.0, 0.1, 0.0;
    ConeSpec cones;
    cones.soc = {3};
    const auto sol = dpbound::solve_conic(make_problem(A, b, c, cones));
    CHECK(sol.status == SolverStatus::PrimalInfeasible);
  }
  SUBCASE("semidefinite") {
    MatrixXd A(1, 3);
    A << 1.0, 0.0, 0.0;  // pins the (0,0) entry of a 2x2 block
    VectorXd b(1), c(3);
    b << -1.0;
    c << 1.0, 0.0, 1.0;
    ConeSpec cones;
    cones.psd = {2};
    const auto sol = dpbound::solve_conic(make_problem(A, b, c, cones));
    CHECK(sol.status == SolverStatus::PrimalInfeasible);
  }
}

TEST_CASE("unbounded program is certified as dual infeasible") {
  MatrixXd A(1, 2);
  A << 1.0, -1.0;
  VectorXd b(1), c(2);
  b << 0.0;
  c << -1.0, 0.0;
  ConeSpec cones;
  cones.orthant = 2;
  const auto sol = dpbound::solve_conic(make_problem(A, b, c, cones));
  CHECK(sol.status == SolverStatus::DualInfeasible);
}

TEST_CASE("badly scaled rows and columns are equilibrated away") {
  // Same hand-solved linear program with one row blown up by 1e8 and one
  // variable rescaled by 1e6.
  MatrixXd A(1, 3);
  A << 1e8 * 1e-6, 1e8, 1e8;
  VectorXd b(1), c(3);
  b << 1e8;
  c << -1e-6, -2.0, 0.0;
  ConeSpec cones;
  cones.orthant = 3;
  const auto p = make_problem(A, b, c, cones);
  const auto sol = dpbound::solve_conic(p);
  REQUIRE(sol.status == SolverStatus::Optimal);
  CHECK(sol.primal_obj == doctest::Approx(-2.0).epsilon(1e-6));
}

TEST_CASE("solves are deterministic") {
  Rng rng(31);
  ConeSpec cones;
  cones.orthant = 3;
  cones.soc = {3};
  cones.psd = {3};
  const auto inst = make_pair_instance(5, cones, rng);
  const auto first = dpbound::solve_conic(inst.problem);
  const auto second = dpbound::solve_conic(inst.problem);
  REQUIRE(first.status == second.status);
  CHECK((first.x - second.x).cwiseAbs().maxCoeff() == 0.0);
  CHECK((first.y - second.y).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("moderately large semidefinite block stays accurate") {
  Rng rng(1234);
  ConeSpec cones;
  cones.orthant = 10;
  cones.psd = {40};
  const auto inst = make_pair_instance(50, cones, rng);
  const auto sol = dpbound::solve_conic(inst.problem);
  check_optimal(inst.problem, sol, inst.optimum,
                1e-4 * std::max(1.0, std::abs(inst.optimum)));
}
