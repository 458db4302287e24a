#pragma once

#include <Eigen/Dense>
#include <Eigen/SparseCore>

#include <string>
#include <vector>

namespace dpbound {

// Cone membership for the variable vector of a conic program, in a fixed
// packing order: nonnegative-orthant coordinates first, then each
// second-order cone block, then each semidefinite block in svec form.
struct ConeSpec {
  int orthant = 0;
  std::vector<int> soc;  // block dimensions, each >= 2
  std::vector<int> psd;  // matrix orders, each >= 1

  int total_dim() const;
  int barrier_degree() const;
};

// Standard-form conic program:  min c'x  s.t.  A x = b,  x in K.
struct ConicProblem {
  Eigen::SparseMatrix<double> A;
  Eigen::VectorXd b;
  Eigen::VectorXd c;
  ConeSpec cones;
};

enum class SolverStatus {
  Optimal,
  PrimalInfeasible,
  DualInfeasible,
  MaxIterations,
  NumericalFailure,
};

std::string to_string(SolverStatus status);

struct ConicSettings {
  int max_iterations = 100;
  double rel_gap_tol = 1e-7;
  double feas_tol = 1e-8;
  // Nearly degenerate instances can stall just shy of the strict tolerances.
  // When progress stops, the best iterate seen so far is returned and still
  // reported as optimal if it meets these reduced tolerances.
  double reduced_rel_gap_tol = 1e-5;
  double reduced_feas_tol = 1e-6;
  int stall_iterations = 10;
  bool verbose = false;
};

struct ConicSolution {
  SolverStatus status = SolverStatus::NumericalFailure;
  Eigen::VectorXd x;
  Eigen::VectorXd y;
  Eigen::VectorXd z;
  double primal_obj = 0.0;
  double dual_obj = 0.0;
  double rel_gap = 0.0;    // complementarity gap over max(1, |objectives|)
  double primal_res = 0.0; // ||Ax - b|| / (1 + ||b||)
  double dual_res = 0.0;   // ||A'y + z - c|| / (1 + ||c||)
  int iterations = 0;
};

// Primal-dual interior-point method with Nesterov-Todd scaling and a
// Mehrotra predictor-corrector step. Supports any mix of orthant,
// second-order, and semidefinite blocks.
ConicSolution solve_conic(const ConicProblem& problem,
                          const ConicSettings& settings = {});

// Symmetric vectorization used for semidefinite blocks: the lower triangle is
// stacked column by column and off-diagonal entries are scaled by sqrt(2), so
// svec(S) . svec(T) equals the Frobenius inner product <S, T>.
int svec_dim(int order);
int svec_index(int row, int col, int order);  // requires row >= col
double svec_scale(int row, int col);
Eigen::VectorXd svec(const Eigen::MatrixXd& S);
Eigen::MatrixXd smat(const Eigen::VectorXd& v);

}  // namespace dpbound
