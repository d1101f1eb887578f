#include <catch2/catch_amalgamated.hpp>

#include "tmadm/types.hpp"

#include <cmath>
#include <set>
#include <vector>

using namespace tmadm;

TEST_CASE("sinc patches the removable singularity", "[types]") {
  CHECK(sinc(0.0) == 1.0);
  CHECK(sinc(1e-15) == 1.0);
  CHECK(sinc(kPi / 2.0) == Catch::Approx(2.0 / kPi).epsilon(1e-14));
  CHECK(std::abs(sinc(kPi)) < 1e-15);
  CHECK(sinc(-kPi / 2.0) == Catch::Approx(2.0 / kPi).epsilon(1e-14));
}

TEST_CASE("degree/radian conversions round-trip", "[types]") {
  for (double d : {-170.0, -45.0, 0.0, 30.0, 60.0, 90.0, 179.0})
    CHECK(rad2deg(deg2rad(d)) == Catch::Approx(d).margin(1e-12));
  CHECK(deg2rad(180.0) == Catch::Approx(kPi));
}

TEST_CASE("wrap_angle maps onto the half-open principal interval", "[types]") {
  CHECK(wrap_angle(0.0) == 0.0);
  CHECK(wrap_angle(0.25) == Catch::Approx(0.25));
  CHECK(wrap_angle(-0.25) == Catch::Approx(-0.25));
  CHECK(wrap_angle(kPi) == Catch::Approx(kPi));
  CHECK(wrap_angle(-kPi) == Catch::Approx(kPi));
  CHECK(wrap_angle(3.0 * kPi) == Catch::Approx(kPi));
  CHECK(std::abs(wrap_angle(2.0 * kPi)) < 1e-12);
  CHECK(wrap_angle(kPi + 0.5) == Catch::Approx(-kPi + 0.5));
  for (double a = -20.0; a <= 20.0; a += 0.37) {
    const double w = wrap_angle(a);
    CHECK(w > -kPi - 1e-15);
    CHECK(w <= kPi + 1e-15);
    // Same angle modulo 2*pi.
    CHECK(std::abs(std::remainder(w - a, 2.0 * kPi)) < 1e-9);
  }
}

TEST_CASE("derive_seed is deterministic and stream-separating", "[types]") {
  CHECK(derive_seed(1, 2, 3) == derive_seed(1, 2, 3));
  CHECK(derive_seed(1, 2) == derive_seed(1, 2, 0));

  // Nearby (master, cell, trial) triples land on distinct seeds.
  std::set<std::uint64_t> seen;
  for (std::uint64_t m : {0ull, 1ull, 2ull})
    for (std::uint64_t c = 0; c < 8; ++c)
      for (std::uint64_t t = 0; t < 8; ++t) seen.insert(derive_seed(m, c, t));
  CHECK(seen.size() == 3 * 8 * 8);
}

TEST_CASE("Rng streams are reproducible", "[types]") {
  Rng a(42), b(42), c(43);
  bool all_equal = true;
  bool any_diff_from_c = false;
  for (int i = 0; i < 1000; ++i) {
    const auto x = a.next_u64();
    all_equal = all_equal && (x == b.next_u64());
    any_diff_from_c = any_diff_from_c || (x != c.next_u64());
  }
  CHECK(all_equal);
  CHECK(any_diff_from_c);
}

TEST_CASE("uniform draws lie in [0,1) with the right mean", "[types]") {
  Rng r(7);
  double sum = 0.0;
  constexpr int n = 200000;
  for (int i = 0; i < n; ++i) {
    const double u = r.uniform();
    REQUIRE(u >= 0.0);
    REQUIRE(u < 1.0);
    sum += u;
  }
  CHECK(sum / n == Catch::Approx(0.5).margin(0.005));
}

TEST_CASE("normal draws have zero mean and unit variance", "[types]") {
  Rng r(11);
  double sum = 0.0, sum2 = 0.0;
  constexpr int n = 200000;
  for (int i = 0; i < n; ++i) {
    const double x = r.normal();
    sum += x;
    sum2 += x * x;
  }
  const double mean = sum / n;
  CHECK(mean == Catch::Approx(0.0).margin(0.01));
  CHECK(sum2 / n - mean * mean == Catch::Approx(1.0).margin(0.02));
}

TEST_CASE("complex normals carry the requested total variance", "[types]") {
  Rng r(13);
  const double var = 0.37;
  double acc = 0.0;
  cxd mean_acc = 0.0;
  constexpr int n = 100000;
  for (int i = 0; i < n; ++i) {
    const cxd z = r.cnormal(var);
    acc += std::norm(z);
    mean_acc += z;
  }
  CHECK(acc / n == Catch::Approx(var).epsilon(0.02));
  CHECK(std::abs(mean_acc) / n < 0.01);
}

TEST_CASE("permutations are valid and reproducible", "[types]") {
  Rng r(5);
  for (int trial = 0; trial < 50; ++trial) {
    const auto p = r.permutation(9);
    std::set<int> s(p.begin(), p.end());
    REQUIRE(p.size() == 9);
    REQUIRE(s.size() == 9);
    REQUIRE(*s.begin() == 0);
    REQUIRE(*s.rbegin() == 8);
  }
  Rng x(99), y(99);
  CHECK(x.permutation(16) == y.permutation(16));
}

TEST_CASE("random bits are balanced", "[types]") {
  Rng r(17);
  int ones = 0;
  constexpr int n = 100000;
  for (int i = 0; i < n; ++i) ones += r.bit();
  CHECK(static_cast<double>(ones) / n == Catch::Approx(0.5).margin(0.01));
}
