#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <sstream>

#include "dpbound/empirical.hpp"
#include "dpbound/rng.hpp"

using namespace dpbound;

// Independent brute-force estimators, written as plain double sums with no
// shared code with the library implementation.
namespace reference {

double biased_sq(const KernelSpec& k, const WeightedSamples& P, const WeightedSamples& Q) {
  double s = 0;
  for (int i = 0; i < P.size(); ++i)
    for (int j = 0; j < P.size(); ++j)
      s += P.weights[i] * P.weights[j] *
           eval_kernel(k, P.points.row(i).transpose(), P.points.row(j).transpose());
  for (int i = 0; i < P.size(); ++i)
    for (int j = 0; j < Q.size(); ++j)
      s -= 2.0 * P.weights[i] * Q.weights[j] *
           eval_kernel(k, P.points.row(i).transpose(), Q.points.row(j).transpose());
  for (int i = 0; i < Q.size(); ++i)
    for (int j = 0; j < Q.size(); ++j)
      s += Q.weights[i] * Q.weights[j] *
           eval_kernel(k, Q.points.row(i).transpose(), Q.points.row(j).transpose());
  return s;
}

double unbiased(const KernelSpec& k, const WeightedSamples& P, const WeightedSamples& Q) {
  const int n = P.size(), m = Q.size();
  double spp = 0, sqq = 0, spq = 0;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      if (i != j)
        spp += eval_kernel(k, P.points.row(i).transpose(), P.points.row(j).transpose());
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j)
      if (i != j)
        sqq += eval_kernel(k, Q.points.row(i).transpose(), Q.points.row(j).transpose());
  // cross term: matched-index pairs are excluded when the sets have equal
  // size (classical equal-size U-statistic), included otherwise
  double cross_den;
  if (n == m) {
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < m; ++j)
        if (i != j)
          spq += eval_kernel(k, P.points.row(i).transpose(), Q.points.row(j).transpose());
    cross_den = double(n) * (n - 1);
  } else {
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < m; ++j)
        spq += eval_kernel(k, P.points.row(i).transpose(), Q.points.row(j).transpose());
    cross_den = double(n) * m;
  }
  double m2 = spp / (double(n) * (n - 1)) - 2.0 * spq / cross_den + sqq / (double(m) * (m - 1));
  return (m2 >= 0 ? 1.0 : -1.0) * std::sqrt(std::abs(m2));
}

WeightedSamples random_set(Rng& rng, int max_points, int dim, bool uniform_weights) {
  int n = 1 + static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(max_points)));
  Eigen::MatrixXd pts(n, dim);
  for (int i = 0; i < pts.size(); ++i) pts.data()[i] = rng.uniform(-3, 3);
  if (uniform_weights) return WeightedSamples::uniform(pts);
  Eigen::VectorXd w(n);
  for (int i = 0; i < n; ++i) w[i] = rng.uniform(0.05, 1.0);
  w /= w.sum();
  return WeightedSamples{pts, w};
}

}  // namespace reference

namespace {
WeightedSamples dirac(double x) {
  Eigen::MatrixXd p(1, 1);
  p << x;
  return WeightedSamples::uniform(p);
}
}  // namespace

TEST_CASE("uniform construction and validation") {
  Eigen::MatrixXd pts(4, 2);
  pts.setRandom();
  WeightedSamples ws = WeightedSamples::uniform(pts);
  CHECK(ws.weights.sum() == doctest::Approx(1.0));
  CHECK(ws.weights.minCoeff() == doctest::Approx(0.25));
  CHECK_NOTHROW(validate(ws));

  WeightedSamples bad = ws;
  bad.weights[0] = -0.1;
  CHECK_THROWS_AS(validate(bad), std::invalid_argument);
  bad = ws;
  bad.weights[0] += 0.5;
  CHECK_THROWS_AS(validate(bad), std::invalid_argument);
}

TEST_CASE("marginal projections") {
  Eigen::MatrixXd pts(2, 2);
  pts << 1, 2, 3, 4;
  WeightedSamples ws{pts, Eigen::VectorXd::Constant(2, 0.5)};

  WeightedSamples m0 = marginal(ws, std::vector<int>{0});
  CHECK(m0.points(0, 0) == 1);
  CHECK(m0.points(1, 0) == 3);
  CHECK(m0.weights[0] == 0.5);

  WeightedSamples all = marginal(ws, std::vector<int>{0, 1});
  CHECK((all.points - ws.points).cwiseAbs().maxCoeff() == 0.0);

  Eigen::VectorXd w(2);
  w << 0.3, 0.7;
  WeightedSamples ws2{pts, w};
  WeightedSamples m1 = marginal(ws2, std::vector<int>{1});
  CHECK(m1.points(0, 0) == 2);
  CHECK(m1.points(1, 0) == 4);
  CHECK(m1.weights[0] == doctest::Approx(0.3));
  CHECK(m1.weights.sum() == doctest::Approx(ws2.weights.sum()));  // weight preserved

  SignalRoute route{0, 1, {1}};
  WeightedSamples mr = marginal(ws2, route);
  CHECK(mr.points(0, 0) == 2);

  CHECK_THROWS_AS(marginal(ws, std::vector<int>{2}), std::invalid_argument);
}

TEST_CASE("mmd_biased closed forms") {
  KernelSpec k = sqexp_kernel(1.0);

  CHECK(mmd_biased(k, dirac(0.3), dirac(0.3)) <= 1e-7);

  // two Diracs: sqrt(2 - 2 exp(-1/2))
  double expect = std::sqrt(2.0 - 2.0 * std::exp(-0.5));
  CHECK(mmd_biased(k, dirac(0.0), dirac(1.0)) == doctest::Approx(expect).epsilon(1e-10));
  CHECK(expect == doctest::Approx(0.8871).epsilon(1e-4));

  // uniform on {0,1} vs dirac at 0
  Eigen::MatrixXd p(2, 1);
  p << 0, 1;
  double got = mmd_biased(k, WeightedSamples::uniform(p), dirac(0.0));
  CHECK(got == doctest::Approx(0.44355).epsilon(1e-4));
}

TEST_CASE("biased estimator matches brute force on random weighted sets") {
  Rng rng(515);
  for (int trial = 0; trial < 100; ++trial) {
    KernelSpec k = (trial % 2 == 0) ? sqexp_kernel(rng.uniform(0.3, 2.0))
                                    : imq_kernel(rng.uniform(0.3, 2.0));
    int dim = 1 + static_cast<int>(rng.uniform_int(3));
    WeightedSamples P = reference::random_set(rng, 10, dim, false);
    WeightedSamples Q = reference::random_set(rng, 10, dim, false);
    double brute = std::sqrt(std::max(reference::biased_sq(k, P, Q), 0.0));
    CHECK(std::abs(mmd_biased(k, P, Q) - brute) < 1e-10);
    CHECK(std::abs(mmd_biased_sq(k, P, Q) - std::max(reference::biased_sq(k, P, Q), 0.0)) < 1e-10);
  }
}

TEST_CASE("unbiased estimator matches brute force and the textbook examples") {
  KernelSpec k = sqexp_kernel(1.0);

  Eigen::MatrixXd p(2, 1);
  p << 0, 1;
  CHECK(mmd_unbiased(k, WeightedSamples::uniform(p), WeightedSamples::uniform(p)) ==
        doctest::Approx(0.0).epsilon(1e-12));

  Eigen::MatrixXd zz(2, 1);
  zz << 0, 0;
  CHECK(mmd_unbiased(k, WeightedSamples::uniform(zz), WeightedSamples::uniform(zz)) ==
        doctest::Approx(0.0));

  Eigen::MatrixXd far(2, 1);
  far << 10, 11;
  double u = mmd_unbiased(k, WeightedSamples::uniform(p), WeightedSamples::uniform(far));
  double b = mmd_biased(k, WeightedSamples::uniform(p), WeightedSamples::uniform(far));
  CHECK(u > 0.0);
  CHECK(u >= b - 0.5);

  Rng rng(626);
  for (int trial = 0; trial < 100; ++trial) {
    KernelSpec kr = (trial % 2 == 0) ? sqexp_kernel(rng.uniform(0.3, 2.0))
                                     : imq_kernel(rng.uniform(0.3, 2.0));
    int dim = 1 + static_cast<int>(rng.uniform_int(2));
    WeightedSamples P = reference::random_set(rng, 10, dim, true);
    WeightedSamples Q = reference::random_set(rng, 10, dim, true);
    if (P.size() < 2 || Q.size() < 2) continue;
    CHECK(std::abs(mmd_unbiased(kr, P, Q) - reference::unbiased(kr, P, Q)) < 1e-10);
  }
}

TEST_CASE("unbiased estimator input validation") {
  KernelSpec k = sqexp_kernel(1.0);
  Eigen::MatrixXd p(2, 1);
  p << 0, 1;
  CHECK_THROWS_AS(mmd_unbiased(k, dirac(0.0), WeightedSamples::uniform(p)), std::invalid_argument);
  Eigen::VectorXd w(2);
  w << 0.2, 0.8;
  WeightedSamples nonuni{p, w};
  CHECK_THROWS_AS(mmd_unbiased(k, nonuni, WeightedSamples::uniform(p)), std::invalid_argument);
}

TEST_CASE("mmd_biased is symmetric and satisfies the triangle inequality") {
  Rng rng(737);
  KernelSpec k = sqexp_kernel(1.0);
  for (int trial = 0; trial < 50; ++trial) {
    WeightedSamples P = reference::random_set(rng, 8, 2, false);
    WeightedSamples Q = reference::random_set(rng, 8, 2, false);
    WeightedSamples R = reference::random_set(rng, 8, 2, false);
    CHECK(std::abs(mmd_biased(k, P, Q) - mmd_biased(k, Q, P)) < 1e-12);
    CHECK(mmd_biased(k, P, R) <= mmd_biased(k, P, Q) + mmd_biased(k, Q, R) + 1e-9);
  }
}

TEST_CASE("biased/unbiased difference equals the diagonal correction") {
  Rng rng(848);
  for (int trial = 0; trial < 30; ++trial) {
    KernelSpec k = sqexp_kernel(rng.uniform(0.5, 1.5));
    WeightedSamples P = reference::random_set(rng, 10, 1, true);
    WeightedSamples Q = reference::random_set(rng, 10, 1, true);
    const int n = P.size(), m = Q.size();
    if (n < 2 || m < 2 || n == m) continue;
    // Unequal sizes: the cross means coincide, so V - U differs only in the
    // within-set diagonal correction, which has a closed form.
    double spp = 0, sqq = 0, dpp = 0, dqq = 0;
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        double v = eval_kernel(k, P.points.row(i).transpose(), P.points.row(j).transpose());
        spp += v;
        if (i == j) dpp += v;
      }
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < m; ++j) {
        double v = eval_kernel(k, Q.points.row(i).transpose(), Q.points.row(j).transpose());
        sqq += v;
        if (i == j) dqq += v;
      }
    double correction = (dpp * n - spp) / (double(n) * n * (n - 1)) +
                        (dqq * m - sqq) / (double(m) * m * (m - 1));
    double v2 = reference::biased_sq(k, P, Q);
    double u = mmd_unbiased(k, P, Q);
    double u2 = (u >= 0 ? 1.0 : -1.0) * u * u;
    CHECK(v2 - u2 == doctest::Approx(correction).epsilon(1e-9).scale(1.0));
  }
}

TEST_CASE("csv round trip") {
  Eigen::MatrixXd pts(3, 2);
  pts << 1.5, -2.25, 0.125, 3.75, -0.5, 0.0625;
  Eigen::VectorXd w(3);
  w << 0.2, 0.3, 0.5;
  WeightedSamples ws{pts, w};
  std::stringstream ss;
  write_csv(ws, ss);
  WeightedSamples back = read_csv(ss);
  CHECK((back.points - ws.points).cwiseAbs().maxCoeff() == 0.0);
  CHECK((back.weights - ws.weights).cwiseAbs().maxCoeff() == 0.0);
}
