#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "dpbound/rng.hpp"

using dpbound::Rng;

TEST_CASE("identical seeds reproduce identical streams") {
  Rng a(1234), b(1234);
  for (int i = 0; i < 100; ++i) CHECK(a.uniform01() == b.uniform01());
  Rng c(1234), d(1234);
  for (int i = 0; i < 100; ++i) CHECK(c.normal() == d.normal());
}

TEST_CASE("different seeds differ") {
  Rng a(1), b(2);
  int same = 0;
  for (int i = 0; i < 50; ++i) same += (a.uniform01() == b.uniform01());
  CHECK(same < 5);
}

TEST_CASE("derive is independent of parent consumption") {
  Rng a(77), b(77);
  b.uniform01();
  b.normal();
  Rng ca = a.derive("stream", 3);
  Rng cb = b.derive("stream", 3);
  for (int i = 0; i < 20; ++i) CHECK(ca.uniform01() == cb.uniform01());
}

TEST_CASE("derived streams with different tags or indices decorrelate") {
  Rng root(99);
  Rng s1 = root.derive("alpha");
  Rng s2 = root.derive("beta");
  Rng s3 = root.derive("alpha", 1);
  CHECK(s1.uniform01() != s2.uniform01());
  CHECK(root.derive("alpha").uniform01() != s3.uniform01());
}

TEST_CASE("uniform01 stays inside [0,1) and uniform(a,b) inside [a,b]") {
  Rng r(5);
  for (int i = 0; i < 10000; ++i) {
    double u = r.uniform01();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
    double v = r.uniform(-3.0, 2.0);
    CHECK(v >= -3.0);
    CHECK(v <= 2.0);
  }
}

TEST_CASE("normal moments are roughly standard") {
  Rng r(2026);
  const int n = 200000;
  double s = 0, s2 = 0;
  for (int i = 0; i < n; ++i) {
    double x = r.normal();
    s += x;
    s2 += x * x;
  }
  double mean = s / n;
  double var = s2 / n - mean * mean;
  CHECK(std::abs(mean) < 0.01);
  CHECK(std::abs(var - 1.0) < 0.02);
}

TEST_CASE("lognormal is exp of normal with matching parameters") {
  Rng a(404), b(404);
  for (int i = 0; i < 10; ++i) {
    double x = a.lognormal(1.5, 0.75);
    double y = std::exp(b.normal(1.5, 0.75));
    CHECK(x == doctest::Approx(y).epsilon(1e-15));
    CHECK(x > 0.0);
  }
}

TEST_CASE("uniform_int respects the range") {
  Rng r(31);
  std::vector<int> counts(7, 0);
  for (int i = 0; i < 7000; ++i) {
    auto v = r.uniform_int(7);
    REQUIRE(v < 7);
    counts[static_cast<int>(v)]++;
  }
  for (int c : counts) CHECK(c > 700);  // crude uniformity check
}
