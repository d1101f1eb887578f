#include <catch2/catch_amalgamated.hpp>

#include "tmadm/constellation.hpp"
#include "tmadm/types.hpp"

#include <bit>
#include <cmath>
#include <vector>

using namespace tmadm;

TEST_CASE("PSK orders must be powers of two", "[constellation]") {
  CHECK_THROWS_AS(make_psk(0), std::invalid_argument);
  CHECK_THROWS_AS(make_psk(1), std::invalid_argument);
  CHECK_THROWS_AS(make_psk(3), std::invalid_argument);
  CHECK_THROWS_AS(make_psk(12), std::invalid_argument);
  CHECK_NOTHROW(make_psk(2));
  CHECK_NOTHROW(make_psk(16));
}

TEST_CASE("axis-aligned PSK points are exact", "[constellation]") {
  const Constellation b = make_psk(2);
  REQUIRE(b.points.size() == 2);
  CHECK(b.points[0] == cxd(1.0, 0.0));
  CHECK(b.points[1] == cxd(-1.0, 0.0));

  const Constellation q = make_psk(4);
  CHECK(q.points[0] == cxd(1.0, 0.0));
  CHECK(q.points[1] == cxd(0.0, 1.0));
  CHECK(q.points[2] == cxd(-1.0, 0.0));
  CHECK(q.points[3] == cxd(0.0, -1.0));
}

TEST_CASE("every PSK point has unit modulus", "[constellation]") {
  for (int M : {2, 4, 8, 16, 32}) {
    const Constellation c = make_psk(M);
    for (const cxd& p : c.points) CHECK(std::abs(std::abs(p) - 1.0) < 1e-15);
  }
}

TEST_CASE("adjacent circle positions differ in exactly one bit", "[constellation]") {
  for (int M : {4, 8, 16}) {
    const Constellation c = make_psk(M);
    for (int i = 0; i < M; ++i) {
      const auto a = c.label_of_point[static_cast<std::size_t>(i)];
      const auto b = c.label_of_point[static_cast<std::size_t>((i + 1) % M)];
      CHECK(std::popcount(a ^ b) == 1);
    }
  }
}

TEST_CASE("label maps are mutually inverse", "[constellation]") {
  for (int M : {2, 4, 8, 16}) {
    const Constellation c = make_psk(M);
    for (std::uint32_t i = 0; i < static_cast<std::uint32_t>(M); ++i) {
      CHECK(c.point_of_label[c.label_of_point[i]] == i);
      CHECK(c.label_of_point[c.point_of_label[i]] == i);
    }
  }
}

TEST_CASE("modulate/demodulate round-trips random bits", "[constellation]") {
  Rng r(3);
  for (int M : {2, 4, 8, 16}) {
    const Constellation c = make_psk(M);
    std::vector<int> bits(static_cast<std::size_t>(240));
    for (auto& b : bits) b = r.bit();
    const auto symbols = modulate(bits, c);
    REQUIRE(symbols.size() == bits.size() / static_cast<std::size_t>(c.bits_per_symbol));
    CHECK(demodulate(symbols, c) == bits);
  }
}

TEST_CASE("small perturbations do not flip decisions", "[constellation]") {
  Rng r(4);
  const Constellation c = make_psk(8);
  std::vector<int> bits(300);
  for (auto& b : bits) b = r.bit();
  auto symbols = modulate(bits, c);
  // Half the minimum distance for 8-PSK is sin(pi/8) ~ 0.38.
  for (auto& s : symbols) s += 0.1 * std::exp(cxd(0.0, 2.0 * kPi * r.uniform()));
  CHECK(demodulate(symbols, c) == bits);
}

TEST_CASE("ragged bitstreams are rejected", "[constellation]") {
  const Constellation c = make_psk(4);
  CHECK_THROWS_AS(modulate(std::vector<int>{1, 0, 1}, c), std::invalid_argument);
}

TEST_CASE("decision ties break toward the first circle position", "[constellation]") {
  const Constellation b = make_psk(2);
  const auto bits = demodulate({cxd(0.0, 0.0)}, b);
  REQUIRE(bits.size() == 1);
  CHECK(bits[0] == static_cast<int>(b.label_of_point[0]));
}

TEST_CASE("bit error rate counts differing positions", "[constellation]") {
  CHECK(ber({0, 1, 1, 0}, {0, 1, 1, 0}) == 0.0);
  CHECK(ber({0, 1, 1, 0}, {1, 1, 1, 0}) == Catch::Approx(0.25));
  CHECK(ber({0, 0, 0, 0}, {1, 1, 1, 1}) == 1.0);
  CHECK(ber({}, {}) == 0.0);
  CHECK_THROWS_AS(ber({0, 1}, {0}), std::invalid_argument);
}
