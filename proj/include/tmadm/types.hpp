#pragma once

// Core aliases, constants, and a deterministic RNG used across the library.
//
// All randomness flows through tmadm::Rng, a splitmix64-based generator with
// explicit seeding and a portable Box-Muller normal source. The standard
// <random> distributions are implementation-defined, which would break the
// byte-identical-CSV determinism contract across toolchains; this generator
// produces the same stream everywhere.

#include <Eigen/Dense>

#include <cmath>
#include <complex>
#include <cstdint>
#include <numbers>
#include <numeric>
#include <vector>

namespace tmadm {

using cxd = std::complex<double>;
using CMat = Eigen::MatrixXcd;
using CVec = Eigen::VectorXcd;
using RMat = Eigen::MatrixXd;
using RVec = Eigen::VectorXd;

inline constexpr double kPi = std::numbers::pi_v<double>;

// Unnormalized sinc: sin(x)/x with the removable singularity patched at 0.
inline double sinc(double x) {
  if (std::abs(x) < 1e-14) return 1.0;
  return std::sin(x) / x;
}

inline double deg2rad(double deg) { return deg * kPi / 180.0; }
inline double rad2deg(double rad) { return rad * 180.0 / kPi; }

// Wrap an angle to (-pi, pi].
inline double wrap_angle(double a) {
  double w = std::fmod(a + kPi, 2.0 * kPi);
  if (w < 0) w += 2.0 * kPi;
  const double r = w - kPi;
  return r == -kPi ? kPi : r;  // keep the boundary on the closed end
}

namespace detail {
// splitmix64 finalizer (public-domain construction).
inline std::uint64_t splitmix64_next(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9E3779B97F4A7C15ull);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}
}  // namespace detail

// Derive an independent stream seed from (master seed, cell index, trial
// index). Used by the experiment harness so that every grid cell / Monte-Carlo
// trial owns its own reproducible stream regardless of execution order. Each
// index is injected only after the previous word has been through a full
// avalanche, so nearby (cell, trial) pairs cannot cancel in the low bits.
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t cell,
                                 std::uint64_t trial = 0) {
  std::uint64_t s = master;
  s = detail::splitmix64_next(s) ^ (0xA0761D6478BD642Full + cell);
  s = detail::splitmix64_next(s) ^ (0xE7037ED1A0B428DBull + trial);
  return detail::splitmix64_next(s);
}

// Deterministic RNG: splitmix64 core, uniform doubles in [0,1), Box-Muller
// normals (cached spare), bounded integers, and Fisher-Yates permutations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() { return detail::splitmix64_next(state_); }

  // Uniform double in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // Standard normal via Box-Muller; generates pairs, caches the spare.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 2.0 * kPi * u2;
    spare_ = r * std::sin(a);
    has_spare_ = true;
    return r * std::cos(a);
  }

  // Circularly symmetric complex Gaussian with total variance `var`
  // (var/2 per real component).
  cxd cnormal(double var = 1.0) {
    const double s = std::sqrt(var / 2.0);
    return {s * normal(), s * normal()};
  }

  // Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n) { return next_u64() % n; }

  // Uniform random permutation of {0, ..., n-1} (Fisher-Yates).
  std::vector<int> permutation(int n) {
    std::vector<int> p(static_cast<std::size_t>(n));
    std::iota(p.begin(), p.end(), 0);
    for (int i = n - 1; i > 0; --i) {
      const int j = static_cast<int>(below(static_cast<std::uint64_t>(i) + 1));
      std::swap(p[static_cast<std::size_t>(i)], p[static_cast<std::size_t>(j)]);
    }
    return p;
  }

  // Random bit.
  int bit() { return static_cast<int>(next_u64() >> 63); }

 private:
  std::uint64_t state_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace tmadm
