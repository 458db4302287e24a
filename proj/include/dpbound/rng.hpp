#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string_view>

namespace dpbound {

// splitmix64 finalizer; used to decorrelate derived stream seeds.
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// FNV-1a on a tag string, for naming independent substreams.
inline std::uint64_t hash_tag(std::string_view tag) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : tag) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

// Deterministic random stream. Distribution transforms are implemented here
// (not via std:: distributions, whose algorithms are implementation-defined)
// so identical seeds give bit-identical sequences on every platform.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : seed_(seed), engine_(splitmix64(seed)) {}

  std::uint64_t seed() const { return seed_; }

  // Independent child stream for a named purpose. Depends only on the parent
  // seed (not on how much of the parent stream was consumed).
  Rng derive(std::string_view tag, std::uint64_t index = 0) const {
    std::uint64_t s = splitmix64(seed_ ^ hash_tag(tag));
    s = splitmix64(s ^ (0x9e3779b97f4a7c15ULL + index));
    return Rng(s);
  }

  // Uniform on [0, 1) with 53 random bits.
  double uniform01() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double a, double b) { return a + (b - a) * uniform01(); }

  // Standard normal via Box-Muller (pairs cached).
  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    constexpr double two_pi = 6.283185307179586476925286766559;
    double u1 = 1.0 - uniform01();  // (0, 1]: keeps log() finite
    double u2 = uniform01();
    double r = std::sqrt(-2.0 * std::log(u1));
    double th = two_pi * u2;
    spare_ = r * std::sin(th);
    have_spare_ = true;
    return r * std::cos(th);
  }

  double normal(double mean, double stddev) { return mean + stddev * normal(); }

  double lognormal(double mu, double sigma) { return std::exp(normal(mu, sigma)); }

  // Uniform integer in [0, n), n >= 1 (Lemire's multiply-shift; tiny bias
  // < 2^-64 is irrelevant for our sample sizes and keeps the draw count fixed).
  std::uint64_t uniform_int(std::uint64_t n) {
    unsigned __int128 m = static_cast<unsigned __int128>(engine_()) * n;
    return static_cast<std::uint64_t>(m >> 64);
  }

  std::uint64_t next_u64() { return engine_(); }

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace dpbound
