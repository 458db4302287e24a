#include "dpbound/benchmarks.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>
#include <sstream>
#include <stdexcept>

#include "dpbound/rng.hpp"

namespace dpbound {

namespace {

constexpr double kPi = 3.14159265358979323846;
constexpr double kSqrt2 = 1.41421356237309504880;

Eigen::VectorXd scalar(double v) { return Eigen::VectorXd::Constant(1, v); }

Component deterministic(int output_dim, std::vector<SignalRoute> incoming,
                        std::function<Eigen::VectorXd(const Eigen::VectorXd&)> f) {
  Component c;
  c.output_dim = output_dim;
  c.incoming = std::move(incoming);
  c.map = [f = std::move(f)](const Eigen::VectorXd& x, Rng&) { return f(x); };
  return c;
}

// ---------------------------------------------------------------------------
// Controlled Solvers: four chained solvers over a 16-dimensional raw input.
// Raw columns carry the non-intermediate signals in ascending original index:
// [x1..x5, x7, x8, x10..x14, x16..x19]; x6, x9, x15 are component outputs.
// ---------------------------------------------------------------------------

BenchmarkSpec controlled_solvers() {
  BenchmarkSpec spec;
  spec.name = BenchmarkName::ControlledSolvers;
  spec.label = "controlled_solvers";

  ComponentGraph g(16);
  // Sobol g-function on the first five raw inputs.
  g.add_component(deterministic(1, {{0, 0, {0, 1, 2, 3, 4}}}, [](const Eigen::VectorXd& v) {
    static const double a[5] = {12.0, 2.0, 3.0, 4.0, 45.0};
    double prod = 1.0;
    for (int i = 0; i < 5; ++i)
      prod *= (std::abs(4.0 * v[i] - 2.0) + a[i]) / (1.0 + a[i]);
    return scalar(prod);
  }));
  // Ishigami-type map on (x7, x8, f1). Incoming order: raw pair, then f1.
  g.add_component(deterministic(1, {{0, 0, {5, 6}}, {1, 0, {0}}},
                                [](const Eigen::VectorXd& v) {
                                  const double x7 = v[0], x8 = v[1], f1 = v[2];
                                  return scalar(std::sin(f1) +
                                                0.7 * std::sin(x7) * std::sin(x7) +
                                                0.1 * std::pow(x8, 4) * std::sin(f1));
                                }));
  // Polynomial-trigonometric map on (x10..x14, f2).
  g.add_component(deterministic(1, {{0, 0, {7, 8, 9, 10, 11}}, {2, 0, {0}}},
                                [](const Eigen::VectorXd& v) {
                                  const double x10 = v[0], x11 = v[1], x12 = v[2];
                                  const double x13 = v[3], x14 = v[4], f2 = v[5];
                                  return scalar(x10 * x10 * std::atan(1.0 - x14) +
                                                x11 * x12 * x13 * x13 * x13 +
                                                3.0 * f2);
                                }));
  // Final solver on (x16..x19, f3).
  g.add_component(deterministic(1, {{0, 0, {12, 13, 14, 15}}, {3, 0, {0}}},
                                [](const Eigen::VectorXd& v) {
                                  const double x16 = v[0], x17 = v[1];
                                  const double x18 = v[2], x19 = v[3], f3 = v[4];
                                  return scalar(std::sin(x19) * x18 + f3 * x16 + x17);
                                }));
  spec.system = std::move(g);

  spec.perfect_input = [](int n, std::uint64_t seed) {
    Rng rng(seed);
    Eigen::MatrixXd x(n, 16);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < 16; ++j) x(i, j) = rng.uniform01();
    return x;
  };
  // Raw column 14 is the original x18 (the multiplicative gain of the final
  // solver), narrowed to [0, 0.8].
  spec.biased_input = [](int n, std::uint64_t seed) {
    Rng rng(seed);
    Eigen::MatrixXd x(n, 16);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < 16; ++j) {
        const double u = rng.uniform01();
        x(i, j) = (j == 14) ? 0.8 * u : u;
      }
    return x;
  };

  // Channel lengthscales in route order: raw groups alternate with the
  // intermediate outputs; all squared-exponential.
  spec.kernels = {sqexp_kernel(1e-6),  // x1..x5  -> solver 1
                  sqexp_kernel(5e1),   // x7, x8  -> solver 2
                  sqexp_kernel(1e-6),  // f1      -> solver 2
                  sqexp_kernel(5e1),   // x10..x14 -> solver 3
                  sqexp_kernel(1e-6),  // f2      -> solver 3
                  sqexp_kernel(1e-6),  // x16..x19 -> solver 4
                  sqexp_kernel(1e-6),  // f3      -> solver 4
                  sqexp_kernel(6.397)};  // TPI

  spec.failure = {-5.0, 60.0, 14.51, 0.28};
  spec.reference_threshold = 14.51;
  return spec;
}

// ---------------------------------------------------------------------------
// Chained Solvers: two univariate maps. The square root restricts the first
// map to nonnegative inputs, so it consumes the raw U[0, 6] input and the
// second map consumes its output.
// ---------------------------------------------------------------------------

double chained_f1(double x) {
  return std::exp(std::sqrt(x)) * std::sin(x) + 6.0 * std::exp(-(x - 2.0) * (x - 2.0)) +
         2.5 * std::exp(-3.0 * (x - 1.0) * (x - 1.0));
}

double chained_f2(double x) {
  return std::sin(x) + 0.3 * x * std::sin(3.4 * x + 0.5);
}

BenchmarkSpec chained_solvers() {
  BenchmarkSpec spec;
  spec.name = BenchmarkName::ChainedSolvers;
  spec.label = "chained_solvers";

  ComponentGraph g(1);
  g.add_component(deterministic(1, {{0, 0, {0}}}, [](const Eigen::VectorXd& v) {
    return scalar(chained_f1(v[0]));
  }));
  g.add_component(deterministic(1, {{1, 0, {0}}}, [](const Eigen::VectorXd& v) {
    return scalar(chained_f2(v[0]));
  }));
  spec.system = std::move(g);

  spec.perfect_input = [](int n, std::uint64_t seed) {
    Rng rng(seed);
    Eigen::MatrixXd x(n, 1);
    for (int i = 0; i < n; ++i) x(i, 0) = rng.uniform(0.0, 6.0);
    return x;
  };
  // Mixture 0.9 U[0,6] + 0.1 U[4,6]: mostly correct support, upper-range mass
  // inflated so the model TPI drifts away from the threshold.
  spec.biased_input = [](int n, std::uint64_t seed) {
    Rng rng(seed);
    Eigen::MatrixXd x(n, 1);
    for (int i = 0; i < n; ++i) {
      const bool tail = rng.uniform01() >= 0.9;
      x(i, 0) = tail ? rng.uniform(4.0, 6.0) : rng.uniform(0.0, 6.0);
    }
    return x;
  };

  spec.kernels = {sqexp_kernel(1e-8), sqexp_kernel(1e-8), imq_kernel(1.218)};
  spec.failure = {-8.0, 5.0, 1.459, 99.0};
  spec.reference_threshold = 1.459;
  return spec;
}

// ---------------------------------------------------------------------------
// Borehole: water flow through a borehole. Inputs in column order
// (r_w, r, T_u, H_u, T_l, H_l, L, K_w).
// ---------------------------------------------------------------------------

double borehole_flow(double rw, double r, double Tu, double Hu, double Tl,
                     double Hl, double L, double Kw) {
  const double lg = std::log(r / rw);
  const double denom = lg * (1.0 + 2.0 * L * Tu / (lg * rw * rw * Kw) + Tu / Tl);
  return 2.0 * kPi * Tu * (Hu - Hl) / denom;
}

Eigen::MatrixXd borehole_inputs(int n, std::uint64_t seed, double hu_hi) {
  Rng rng(seed);
  Eigen::MatrixXd x(n, 8);
  for (int i = 0; i < n; ++i) {
    x(i, 0) = rng.normal(0.10, 0.0161812);       // r_w
    x(i, 1) = rng.lognormal(7.71, 1.0056);       // r
    x(i, 2) = rng.uniform(63070.0, 115600.0);    // T_u
    x(i, 3) = rng.uniform(990.0, hu_hi);         // H_u
    x(i, 4) = rng.uniform(63.1, 116.0);          // T_l
    x(i, 5) = rng.uniform(700.0, 820.0);         // H_l
    x(i, 6) = rng.uniform(1120.0, 1680.0);       // L
    x(i, 7) = rng.uniform(9855.0, 12045.0);      // K_w
  }
  return x;
}

void borehole_samplers(BenchmarkSpec* spec) {
  spec->perfect_input = [](int n, std::uint64_t seed) {
    return borehole_inputs(n, seed, 1110.0);
  };
  spec->biased_input = [](int n, std::uint64_t seed) {
    return borehole_inputs(n, seed, 1010.0);
  };
}

BenchmarkSpec borehole_single() {
  BenchmarkSpec spec;
  spec.name = BenchmarkName::BoreholeSingle;
  spec.label = "borehole_single";

  ComponentGraph g(8);
  g.add_component(deterministic(1, {{0, 0, {0, 1, 2, 3, 4, 5, 6, 7}}},
                                [](const Eigen::VectorXd& v) {
                                  return scalar(borehole_flow(v[0], v[1], v[2], v[3],
                                                              v[4], v[5], v[6], v[7]));
                                }));
  spec.system = std::move(g);
  borehole_samplers(&spec);

  Eigen::VectorXd ls(8);
  ls << 10.599, 6.587, 24.609, 32.369, 46.431, 23.046, 12.943, 2.734;
  spec.kernels = {sqexp_kernel(ls), sqexp_kernel(23.578)};
  spec.failure = {-35.0, 600.0, 157.1, 0.0006};
  spec.reference_threshold = 157.1;
  return spec;
}

BenchmarkSpec borehole_compositional() {
  BenchmarkSpec spec;
  spec.name = BenchmarkName::BoreholeCompositional;
  spec.label = "borehole_compositional";

  ComponentGraph g(8);
  // y1 = 2 pi T_u (H_u - H_l)
  g.add_component(deterministic(1, {{0, 0, {2, 3, 5}}}, [](const Eigen::VectorXd& v) {
    return scalar(2.0 * kPi * v[0] * (v[1] - v[2]));
  }));
  // y2 = 2 L T_u / (ln(r/r_w) r_w^2 K_w)
  g.add_component(deterministic(1, {{0, 0, {0, 1, 2, 6, 7}}},
                                [](const Eigen::VectorXd& v) {
                                  const double rw = v[0], r = v[1], Tu = v[2];
                                  const double L = v[3], Kw = v[4];
                                  return scalar(2.0 * L * Tu /
                                                (std::log(r / rw) * rw * rw * Kw));
                                }));
  // y3 = T_u / T_l
  g.add_component(deterministic(1, {{0, 0, {2, 4}}}, [](const Eigen::VectorXd& v) {
    return scalar(v[0] / v[1]);
  }));
  // y4 = ln(r/r_w) (1 + y2 + y3)
  g.add_component(deterministic(1, {{0, 0, {0, 1}}, {2, 0, {0}}, {3, 0, {0}}},
                                [](const Eigen::VectorXd& v) {
                                  const double rw = v[0], r = v[1];
                                  const double y2 = v[2], y3 = v[3];
                                  return scalar(std::log(r / rw) * (1.0 + y2 + y3));
                                }));
  // TPI = y1 / y4
  g.add_component(deterministic(1, {{1, 0, {0}}, {4, 0, {0}}},
                                [](const Eigen::VectorXd& v) {
                                  return scalar(v[0] / v[1]);
                                }));
  spec.system = std::move(g);
  borehole_samplers(&spec);

  Eigen::VectorXd raw4(2);
  raw4 << 5.0e3, 1.0e-1;
  spec.kernels = {sqexp_kernel(5.0e3),   // (T_u, H_u, H_l) -> y1
                  sqexp_kernel(1.0e-1),  // (r_w, r, T_u, L, K_w) -> y2
                  sqexp_kernel(3.198e3), // (T_u, T_l) -> y3
                  sqexp_kernel(raw4),    // (r_w, r) -> y4
                  sqexp_kernel(5.0e3),   // y2 -> y4
                  sqexp_kernel(5.0e3),   // y3 -> y4
                  sqexp_kernel(1.0e-1),  // y1 -> TPI component
                  sqexp_kernel(5.0e3),   // y4 -> TPI component
                  imq_kernel(2.634)};    // TPI
  spec.failure = {-35.0, 600.0, 157.1, 0.0006};
  spec.reference_threshold = 157.1;
  return spec;
}

// ---------------------------------------------------------------------------
// Branin (maximization form): f_max - a (x2 - b x1^2 + c x1 - r)^2
//                             + s (1 - t) cos(x1) + s.
// ---------------------------------------------------------------------------

constexpr double kBraninA = 1.0;
const double kBraninB = 5.1 / (4.0 * kPi * kPi);
const double kBraninC = 5.0 / kPi;
constexpr double kBraninR = 6.0;
constexpr double kBraninS = 10.0;
const double kBraninT = 1.0 / (8.0 * kPi);
constexpr double kBraninFmax = 312.0;

double branin_square(double x1, double x2) {
  const double inner = x2 - kBraninB * x1 * x1 + kBraninC * x1 - kBraninR;
  return inner * inner;
}

void branin_samplers(BenchmarkSpec* spec) {
  spec->perfect_input = [](int n, std::uint64_t seed) {
    Rng rng(seed);
    Eigen::MatrixXd x(n, 2);
    for (int i = 0; i < n; ++i) {
      x(i, 0) = rng.uniform(-5.0, 10.0);
      x(i, 1) = rng.uniform(0.0, 15.0);
    }
    return x;
  };
  // Mixture with alpha = 0.10 on the perfect part: most of the mass sits in
  // the upper corner of the rectangle.
  spec->biased_input = [](int n, std::uint64_t seed) {
    Rng rng(seed);
    Eigen::MatrixXd x(n, 2);
    for (int i = 0; i < n; ++i) {
      const bool wide1 = rng.uniform01() < 0.10;
      x(i, 0) = wide1 ? rng.uniform(-5.0, 10.0) : rng.uniform(8.0, 10.0);
      const bool wide2 = rng.uniform01() < 0.10;
      x(i, 1) = wide2 ? rng.uniform(0.0, 15.0) : rng.uniform(12.0, 15.0);
    }
    return x;
  };
}

BenchmarkSpec branin_single() {
  BenchmarkSpec spec;
  spec.name = BenchmarkName::BraninSingle;
  spec.label = "branin_single";

  ComponentGraph g(2);
  g.add_component(deterministic(1, {{0, 0, {0, 1}}}, [](const Eigen::VectorXd& v) {
    return scalar(kBraninFmax - kBraninA * branin_square(v[0], v[1]) +
                  kBraninS * (1.0 - kBraninT) * std::cos(v[0]) + kBraninS);
  }));
  spec.system = std::move(g);
  branin_samplers(&spec);

  spec.kernels = {sqexp_kernel(0.003), sqexp_kernel(21.161)};
  spec.failure = {-35.0, 700.0, 330.82, 0.005};
  spec.reference_threshold = 330.82;
  return spec;
}

BenchmarkSpec branin_compositional() {
  BenchmarkSpec spec;
  spec.name = BenchmarkName::BraninCompositional;
  spec.label = "branin_compositional";

  ComponentGraph g(2);
  g.add_component(deterministic(1, {{0, 0, {0, 1}}}, [](const Eigen::VectorXd& v) {
    return scalar(branin_square(v[0], v[1]));
  }));
  g.add_component(deterministic(1, {{0, 0, {0, 1}}}, [](const Eigen::VectorXd& v) {
    return scalar((1.0 - kBraninT) * std::cos(v[0]));
  }));
  g.add_component(deterministic(1, {{1, 0, {0}}, {2, 0, {0}}},
                                [](const Eigen::VectorXd& v) {
                                  return scalar(kBraninFmax - kBraninA * v[0] +
                                                kBraninS * v[1] + kBraninS);
                                }));
  spec.system = std::move(g);
  branin_samplers(&spec);

  spec.kernels = {imq_kernel(1e-8),    // inputs -> square term
                  imq_kernel(1e-8),    // inputs -> cosine term
                  imq_kernel(500.0),   // square term -> combiner
                  imq_kernel(1e-8),    // cosine term -> combiner
                  imq_kernel(26.064)}; // TPI
  spec.failure = {-35.0, 700.0, 330.82, 0.005};
  spec.reference_threshold = 330.82;
  return spec;
}

// ---------------------------------------------------------------------------
// Four Branch: min of four branch responses plus 10, p = 6.
// ---------------------------------------------------------------------------

constexpr double kFourBranchP = 6.0;

double four_branch_1(double x1, double x2) {
  return 3.0 + 0.1 * (x1 - x2) * (x1 - x2) - (x1 + x2) / kSqrt2;
}
double four_branch_2(double x1, double x2) {
  return 3.0 + 0.1 * (x1 - x2) * (x1 - x2) + (x1 + x2) / kSqrt2;
}
double four_branch_3(double x1, double x2) {
  return (x1 - x2) + kFourBranchP / kSqrt2;
}
double four_branch_4(double x1, double x2) {
  return (x1 - x2) - kFourBranchP / kSqrt2;
}
double four_branch_min(double x1, double x2) {
  return std::min(std::min(four_branch_1(x1, x2), four_branch_2(x1, x2)),
                  std::min(four_branch_3(x1, x2), four_branch_4(x1, x2))) +
         10.0;
}

void four_branch_samplers(BenchmarkSpec* spec) {
  spec->perfect_input = [](int n, std::uint64_t seed) {
    Rng rng(seed);
    Eigen::MatrixXd x(n, 2);
    for (int i = 0; i < n; ++i) {
      x(i, 0) = rng.normal();
      x(i, 1) = rng.normal();
    }
    return x;
  };
  // Mixture 0.8 N(0,1) + 0.2 N(0,0.9) per coordinate: slightly lighter tails,
  // pulling the TPI away from the threshold.
  spec->biased_input = [](int n, std::uint64_t seed) {
    Rng rng(seed);
    Eigen::MatrixXd x(n, 2);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < 2; ++j) {
        const bool narrow = rng.uniform01() >= 0.8;
        x(i, j) = rng.normal() * (narrow ? 0.9 : 1.0);
      }
    return x;
  };
}

BenchmarkSpec four_branch_single() {
  BenchmarkSpec spec;
  spec.name = BenchmarkName::FourBranchSingle;
  spec.label = "four_branch_single";

  ComponentGraph g(2);
  g.add_component(deterministic(1, {{0, 0, {0, 1}}}, [](const Eigen::VectorXd& v) {
    return scalar(four_branch_min(v[0], v[1]));
  }));
  spec.system = std::move(g);
  four_branch_samplers(&spec);

  Eigen::VectorXd ls(2);
  ls << 0.201, 0.198;
  spec.kernels = {sqexp_kernel(ls), sqexp_kernel(10.0)};
  spec.failure = {0.0, 30.0, 9.693, 0.005};
  spec.reference_threshold = 9.693;
  return spec;
}

BenchmarkSpec four_branch_compositional() {
  BenchmarkSpec spec;
  spec.name = BenchmarkName::FourBranchCompositional;
  spec.label = "four_branch_compositional";

  ComponentGraph g(2);
  using Branch = double (*)(double, double);
  static const Branch branches[4] = {four_branch_1, four_branch_2,
                                     four_branch_3, four_branch_4};
  for (int b = 0; b < 4; ++b) {
    g.add_component(deterministic(1, {{0, 0, {0, 1}}},
                                  [b](const Eigen::VectorXd& v) {
                                    return scalar(branches[b](v[0], v[1]));
                                  }));
  }
  g.add_component(deterministic(
      1, {{1, 0, {0}}, {2, 0, {0}}, {3, 0, {0}}, {4, 0, {0}}},
      [](const Eigen::VectorXd& v) {
        return scalar(std::min(std::min(v[0], v[1]), std::min(v[2], v[3])) + 10.0);
      }));
  spec.system = std::move(g);
  four_branch_samplers(&spec);

  Eigen::VectorXd ls(2);
  ls << 2.018, 1.983;
  spec.kernels = {sqexp_kernel(ls),     // inputs -> branch 1
                  sqexp_kernel(ls),     // inputs -> branch 2
                  sqexp_kernel(ls),     // inputs -> branch 3
                  sqexp_kernel(ls),     // inputs -> branch 4
                  sqexp_kernel(2.472),  // branch 1 -> min
                  sqexp_kernel(2.374),  // branch 2 -> min
                  sqexp_kernel(2.077),  // branch 3 -> min
                  sqexp_kernel(2.077),  // branch 4 -> min
                  sqexp_kernel(10.0)};  // TPI
  spec.failure = {0.0, 30.0, 9.693, 0.005};
  spec.reference_threshold = 9.693;
  return spec;
}

}  // namespace

std::vector<BenchmarkName> all_benchmarks() {
  return {BenchmarkName::ControlledSolvers,  BenchmarkName::ChainedSolvers,
          BenchmarkName::BoreholeSingle,     BenchmarkName::BoreholeCompositional,
          BenchmarkName::BraninSingle,       BenchmarkName::BraninCompositional,
          BenchmarkName::FourBranchSingle,   BenchmarkName::FourBranchCompositional};
}

std::string to_string(BenchmarkName name) {
  switch (name) {
    case BenchmarkName::ControlledSolvers: return "controlled_solvers";
    case BenchmarkName::ChainedSolvers: return "chained_solvers";
    case BenchmarkName::BoreholeSingle: return "borehole_single";
    case BenchmarkName::BoreholeCompositional: return "borehole_compositional";
    case BenchmarkName::BraninSingle: return "branin_single";
    case BenchmarkName::BraninCompositional: return "branin_compositional";
    case BenchmarkName::FourBranchSingle: return "four_branch_single";
    case BenchmarkName::FourBranchCompositional: return "four_branch_compositional";
  }
  throw std::invalid_argument("unknown benchmark enum value");
}

BenchmarkName parse_benchmark_name(const std::string& label) {
  for (BenchmarkName name : all_benchmarks())
    if (to_string(name) == label) return name;
  std::ostringstream msg;
  msg << "unknown benchmark '" << label << "'; known:";
  for (BenchmarkName name : all_benchmarks()) msg << " " << to_string(name);
  throw std::invalid_argument(msg.str());
}

namespace {

// Thresholds are recalibrated so the true failure probability sits at 1%
// under this codebase's samplers (published reference values assume details
// of the original stack that are not recoverable, e.g. composition order and
// raw-index conventions; where those are unambiguous the recalibration lands
// on the reference). Memoized per benchmark, seeded from the name only.
double calibrated_threshold(const BenchmarkSpec& spec) {
  static std::mutex mutex;
  static std::map<std::string, double> cache;
  {
    const std::lock_guard<std::mutex> lock(mutex);
    const auto it = cache.find(spec.label);
    if (it != cache.end()) return it->second;
  }
  const std::uint64_t seed =
      splitmix64(hash_tag(spec.label) ^ hash_tag("threshold-calibration"));
  const double tau =
      calibrate_threshold(spec.system, spec.perfect_input, 0.01, 1000000, seed);
  const std::lock_guard<std::mutex> lock(mutex);
  cache.emplace(spec.label, tau);
  return tau;
}

}  // namespace

BenchmarkSpec make_benchmark(BenchmarkName name, std::uint64_t seed) {
  BenchmarkSpec spec;
  switch (name) {
    case BenchmarkName::ControlledSolvers: spec = controlled_solvers(); break;
    case BenchmarkName::ChainedSolvers: spec = chained_solvers(); break;
    case BenchmarkName::BoreholeSingle: spec = borehole_single(); break;
    case BenchmarkName::BoreholeCompositional: spec = borehole_compositional(); break;
    case BenchmarkName::BraninSingle: spec = branin_single(); break;
    case BenchmarkName::BraninCompositional: spec = branin_compositional(); break;
    case BenchmarkName::FourBranchSingle: spec = four_branch_single(); break;
    case BenchmarkName::FourBranchCompositional:
      spec = four_branch_compositional();
      break;
  }
  spec.base_seed = seed;
  const auto problems = spec.system.validate();
  if (!problems.empty())
    throw std::logic_error("benchmark graph is malformed: " + problems.front());
  if (static_cast<int>(spec.kernels.size()) !=
      static_cast<int>(spec.system.all_routes().size()))
    throw std::logic_error("benchmark kernel list misaligned with its routes");
  spec.failure.threshold = calibrated_threshold(spec);
  if (spec.failure.threshold <= spec.failure.grid_min ||
      spec.failure.threshold >= spec.failure.grid_max)
    throw std::logic_error("benchmark threshold outside its grid range");
  return spec;
}

BenchmarkSpec make_benchmark(const std::string& label, std::uint64_t seed) {
  return make_benchmark(parse_benchmark_name(label), seed);
}

Eigen::VectorXd sample_tpi(const ComponentGraph& system, const InputSampler& sampler,
                           int n, std::uint64_t seed) {
  if (n < 1) throw std::invalid_argument("sample_tpi needs n >= 1");
  const int batch = 131072;
  Eigen::VectorXd out(n);
  const Rng root(seed);
  int done = 0;
  for (int b = 0; done < n; ++b) {
    const int take = std::min(batch, n - done);
    const std::uint64_t draw_seed =
        root.derive("tpi-batch", static_cast<std::uint64_t>(b)).seed();
    const std::uint64_t sim_seed =
        root.derive("tpi-sim", static_cast<std::uint64_t>(b)).seed();
    const Eigen::MatrixXd inputs = sampler(take, draw_seed);
    out.segment(done, take) = system.simulate(inputs, sim_seed).tpi();
    done += take;
  }
  return out;
}

double calibrate_threshold(const ComponentGraph& system, const InputSampler& sampler,
                           double target, int n, std::uint64_t seed) {
  if (n < 10000) throw std::invalid_argument("calibration needs n >= 10^4");
  if (!(target > 0.0) || !(target < 1.0))
    throw std::invalid_argument("calibration target must be in (0, 1)");
  const Eigen::VectorXd tpi = sample_tpi(system, sampler, n, seed);
  if (tpi.maxCoeff() - tpi.minCoeff() <= 0.0)
    throw std::runtime_error("TPI distribution is degenerate (constant)");
  return signed_quantile(tpi, 1.0 - target);
}

double tail_probability(const ComponentGraph& system, const InputSampler& sampler,
                        double tau, int n, std::uint64_t seed) {
  const Eigen::VectorXd tpi = sample_tpi(system, sampler, n, seed);
  return static_cast<double>((tpi.array() > tau).count()) /
         static_cast<double>(n);
}

MisfitModels make_misfit_models(const BenchmarkSpec& spec, std::uint64_t seed,
                                int train_samples, int gp_restarts) {
  if (train_samples < 2)
    throw std::invalid_argument("misfit models need at least 2 training samples");
  const Rng root(seed);
  const Eigen::MatrixXd inputs =
      spec.perfect_input(train_samples, root.derive("misfit-train").seed());
  const SignalTable table =
      spec.system.simulate(inputs, root.derive("misfit-train-sim").seed());

  MisfitModels out;
  const int C = spec.system.num_components();
  out.gps.resize(static_cast<std::size_t>(C));
  out.train.resize(static_cast<std::size_t>(C));
  for (int c = 1; c <= C; ++c) {
    const Eigen::MatrixXd& X = table.comp_inputs[static_cast<std::size_t>(c - 1)];
    const Eigen::MatrixXd& Y = table.comp_outputs[static_cast<std::size_t>(c - 1)];
    out.train[static_cast<std::size_t>(c - 1)] = {X, Y};
    auto& per_dim = out.gps[static_cast<std::size_t>(c - 1)];
    for (int j = 0; j < Y.cols(); ++j) {
      const std::uint64_t fit_seed =
          root.derive("misfit-gp", static_cast<std::uint64_t>(c) * 1000 +
                                       static_cast<std::uint64_t>(j))
              .seed();
      per_dim.push_back(gp_fit(X, Y.col(j), KernelFamily::SquaredExponential,
                               fit_seed, gp_restarts));
    }
  }
  out.graph = gp_mean_composite(spec.system, out.gps);
  return out;
}

std::vector<ComponentValidation> make_validation_data(const BenchmarkSpec& spec,
                                                      int V, std::uint64_t seed) {
  if (V < 2) throw std::invalid_argument("validation needs V >= 2");
  const Rng root(seed);
  const Eigen::MatrixXd inputs =
      spec.perfect_input(V, root.derive("validation").seed());
  const SignalTable table =
      spec.system.simulate(inputs, root.derive("validation-sim").seed());
  std::vector<ComponentValidation> out;
  out.reserve(static_cast<std::size_t>(spec.system.num_components()));
  for (int c = 1; c <= spec.system.num_components(); ++c)
    out.push_back({table.comp_inputs[static_cast<std::size_t>(c - 1)],
                   table.comp_outputs[static_cast<std::size_t>(c - 1)]});
  return out;
}

namespace {

std::string kernel_line(const KernelSpec& k) {
  std::ostringstream os;
  os << (k.family == KernelFamily::SquaredExponential ? "sqexp" : "imq");
  os << " lengthscales=[";
  for (int i = 0; i < k.lengthscales.size(); ++i) {
    if (i) os << ", ";
    os << k.lengthscales[i];
  }
  os << "]";
  return os.str();
}

}  // namespace

std::string describe(const BenchmarkSpec& spec) {
  std::ostringstream os;
  os << "benchmark: " << spec.label << "\n";
  os << "input dimension: " << spec.system.input_dim() << "\n";
  os << "components: " << spec.system.num_components() << "\n";
  const auto routes = spec.system.all_routes();
  os << "routes (source -> target [columns] : kernel):\n";
  for (std::size_t r = 0; r < routes.size(); ++r) {
    os << "  " << routes[r].source << " -> " << routes[r].target << " [";
    for (std::size_t i = 0; i < routes[r].columns.size(); ++i) {
      if (i) os << ", ";
      os << routes[r].columns[i];
    }
    os << "] : " << kernel_line(spec.kernels[r]) << "\n";
  }
  os << "failure grid: [" << spec.failure.grid_min << ", " << spec.failure.grid_max
     << "]\n";
  os << "threshold: " << spec.failure.threshold
     << " (reference calibration " << spec.reference_threshold << ")\n";
  os << "lipschitz constant: " << spec.failure.lipschitz << "\n";
  os << "base seed: " << spec.base_seed << "\n";
  return os.str();
}

}  // namespace dpbound
