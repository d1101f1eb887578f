#include <catch2/catch_amalgamated.hpp>

#include "tmadm/constellation.hpp"
#include "tmadm/tma.hpp"
#include "tmadm/types.hpp"

#include <cmath>
#include <complex>
#include <vector>

using namespace tmadm;

namespace {

// Independent brute-force reference for the noiseless received frames:
// every quantity is recomputed from scalars (ON durations, ON instants,
// steering phases) with explicit triple loops, bypassing the library's
// generator/Toeplitz construction entirely.
CMat brute_force_frames(const std::vector<cxd>& symbols, const TmaParams& p,
                        int K, double phi) {
  const auto H = static_cast<Eigen::Index>(symbols.size() / static_cast<std::size_t>(K));
  CMat Y(K, H);
  const double scale = 1.0 / std::sqrt(static_cast<double>(p.N) * K);
  for (Eigen::Index t = 0; t < H; ++t) {
    for (int i = 0; i < K; ++i) {
      cxd acc = 0.0;
      for (int l = 0; l < K; ++l) {
        const int m = i - l;
        cxd vm_sum = 0.0;
        for (int n = 0; n < p.N; ++n) {
          const double tau = p.tau_on[static_cast<std::size_t>(n)];
          const cxd a = p.delta_tau * sinc(m * kPi * p.delta_tau) *
                        std::exp(cxd(0.0, -m * kPi * (2.0 * tau + p.delta_tau)));
          vm_sum += a * std::exp(cxd(0.0, n * kPi * phi));
        }
        acc += vm_sum * symbols[static_cast<std::size_t>(t) * K + static_cast<std::size_t>(l)];
      }
      Y(i, t) = scale * acc;
    }
  }
  return Y;
}

TmaParams ladder(int N, int h) {
  TmaParams p;
  p.N = N;
  p.delta_tau = static_cast<double>(h) / N;
  p.tau_on.resize(static_cast<std::size_t>(N));
  for (int n = 0; n < N; ++n) p.tau_on[static_cast<std::size_t>(n)] = static_cast<double>(n) / N;
  return p;
}

}  // namespace

TEST_CASE("switching pattern validation accepts ladders and rejects violations",
          "[tma]") {
  CHECK(validate_params(ladder(7, 6)).empty());
  CHECK(validate_params(ladder(2, 1)).empty());

  TmaParams p = ladder(7, 6);
  p.delta_tau = 0.0;  // must be strictly positive
  CHECK_FALSE(validate_params(p).empty());

  p = ladder(7, 6);
  p.delta_tau = 0.3;  // off the 1/N grid
  CHECK_FALSE(validate_params(p).empty());

  p = ladder(7, 6);
  p.tau_on[2] = 0.123;  // off the 1/N grid
  CHECK_FALSE(validate_params(p).empty());

  p = ladder(7, 6);
  p.tau_on[3] = p.tau_on[4];  // ON instants must be pairwise distinct
  CHECK_FALSE(validate_params(p).empty());

  p = ladder(7, 6);
  p.tau_on.pop_back();  // wrong element count
  CHECK_FALSE(validate_params(p).empty());

  p = ladder(2, 1);
  p.N = 1;
  p.tau_on = {0.0};
  CHECK_FALSE(validate_params(p).empty());
}

TEST_CASE("harmonic coefficient matches its closed form", "[tma]") {
  TmaParams p = ladder(4, 1);
  // Antenna 1 of the ladder switches on at tau = 0; at m=1, delta_tau=1/4:
  // (1/4)*sinc(pi/4)*exp(-j*pi/4) = (1-j)/(2*pi).
  const cxd a = harmonic_coefficient(1, 1, p);
  CHECK(a.real() == Catch::Approx(1.0 / (2.0 * kPi)).epsilon(1e-14));
  CHECK(a.imag() == Catch::Approx(-1.0 / (2.0 * kPi)).epsilon(1e-14));

  // The zeroth harmonic is the ON duration itself, for every element.
  Rng r(2);
  for (int trial = 0; trial < 10; ++trial) {
    const TmaParams q = random_params(r, 5);
    for (int n = 1; n <= q.N; ++n) {
      const cxd a0 = harmonic_coefficient(0, n, q);
      CHECK(a0.real() == Catch::Approx(q.delta_tau).epsilon(1e-14));
      CHECK(std::abs(a0.imag()) < 1e-15);
    }
  }
}

TEST_CASE("mixing matrix is Toeplitz with the generator on its diagonals",
          "[tma]") {
  const TmaParams p = ladder(5, 3);
  const Geometry g = Geometry::from_degrees(60.0, 40.0);
  const MixingMatrix mm = mixing_matrix(p, 12, g);
  REQUIRE(mm.matrix.rows() == 12);
  REQUIRE(mm.matrix.cols() == 12);
  const double scale = 1.0 / std::sqrt(5.0 * 12.0);
  for (int i = 0; i < 12; ++i)
    for (int l = 0; l < 12; ++l)
      CHECK(std::abs(mm.matrix(i, l) - mm.gen(i - l) * scale) < 1e-15);
}

TEST_CASE("legitimate direction sees a scaled identity", "[tma]") {
  Rng r(6);
  for (int trial = 0; trial < 10; ++trial) {
    const TmaParams p = random_params(r, 4 + static_cast<int>(r.below(5)));
    const int K = p.N + 1 + static_cast<int>(r.below(12));
    const double theta0 = deg2rad(20.0 + 140.0 * r.uniform());
    const MixingMatrix mm = mixing_matrix(p, K, Geometry::from_angles(theta0, theta0));
    const double want = p.delta_tau * std::sqrt(static_cast<double>(p.N) / K);
    for (int i = 0; i < K; ++i)
      for (int l = 0; l < K; ++l) {
        if (i == l)
          CHECK(std::abs(mm.matrix(i, i) - cxd(want, 0.0)) < 1e-12);
        else
          CHECK(std::abs(mm.matrix(i, l)) < 1e-12);
      }
  }
}

TEST_CASE("main-diagonal closed form agrees with the matrix", "[tma]") {
  Rng r(8);
  for (int trial = 0; trial < 25; ++trial) {
    const int N = 2 + static_cast<int>(r.below(7));
    const TmaParams p = random_params(r, N);
    const int K = N + 1 + static_cast<int>(r.below(20));
    const double phi = -1.9 + 3.8 * r.uniform();
    const MixingMatrix mm = mixing_matrix(p, K, Geometry::from_phi(phi));
    const DiagClosedForm cf = diag_entry_closed_form(N, phi, p.delta_tau, K);
    const cxd want = cf.modulus * std::exp(cxd(0.0, cf.angle));
    CHECK(std::abs(mm.matrix(0, 0) - want) < 1e-12);
    CHECK(std::abs(mm.matrix(K / 2, K / 2) - want) < 1e-12);
  }
}

TEST_CASE("mixing matrix is 2-periodic in the geometric offset", "[tma]") {
  Rng r(9);
  for (int trial = 0; trial < 10; ++trial) {
    const TmaParams p = random_params(r, 6);
    const double phi = 0.05 + 1.9 * r.uniform();  // phi in (0,2), phi-2 in (-2,0)
    const MixingMatrix a = mixing_matrix(p, 10, Geometry::from_phi(phi));
    const MixingMatrix b = mixing_matrix(p, 10, Geometry::from_phi(phi - 2.0));
    CHECK((a.matrix - b.matrix).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("noiseless transmission matches the brute-force triple sum", "[tma]") {
  Rng r(10);
  const Constellation c = make_psk(4);
  for (int trial = 0; trial < 5; ++trial) {
    const int N = 2 + static_cast<int>(r.below(6));
    const TmaParams p = random_params(r, N);
    const int K = N + 1 + static_cast<int>(r.below(10));
    const int H = 3;
    const double phi = -1.9 + 3.8 * r.uniform();
    std::vector<int> bits(static_cast<std::size_t>(K * H * c.bits_per_symbol));
    for (auto& b : bits) b = r.bit();
    const auto symbols = modulate(bits, c);

    Rng noise_rng(1);
    const CMat got = transmit_frames(symbols, p, K, Geometry::from_phi(phi),
                                     NoiseModel{0.0}, noise_rng);
    const CMat want = brute_force_frames(symbols, p, K, phi);
    const double rel = (got - want).cwiseAbs().maxCoeff() /
                       want.cwiseAbs().maxCoeff();
    CHECK(rel < 1e-10);
  }
}

TEST_CASE("transmission rejects invalid patterns and ragged symbol streams",
          "[tma]") {
  Rng r(11);
  TmaParams bad = ladder(4, 1);
  bad.delta_tau = 0.37;
  const std::vector<cxd> symbols(8, cxd(1.0, 0.0));
  CHECK_THROWS_AS(transmit_frames(symbols, bad, 8, Geometry::from_phi(0.3),
                                  NoiseModel{0.0}, r),
                  std::invalid_argument);
  const TmaParams good = ladder(4, 1);
  const std::vector<cxd> ragged(7, cxd(1.0, 0.0));
  CHECK_THROWS_AS(transmit_frames(ragged, good, 8, Geometry::from_phi(0.3),
                                  NoiseModel{0.0}, r),
                  std::invalid_argument);
}

TEST_CASE("additive noise carries the requested per-subcarrier variance",
          "[tma]") {
  const TmaParams p = ladder(7, 6);
  const int K = 8, H = 4000;
  const Geometry g = Geometry::from_degrees(60.0, 40.0);
  const Constellation c = make_psk(2);
  Rng r(12);
  std::vector<int> bits(static_cast<std::size_t>(K * H));
  for (auto& b : bits) b = r.bit();
  const auto symbols = modulate(bits, c);
  const double sigma2 = 0.05;
  Rng n0(77), n1(77);
  const CMat clean = transmit_frames(symbols, p, K, g, NoiseModel{0.0}, n0);
  const CMat noisy = transmit_frames(symbols, p, K, g, NoiseModel{sigma2}, n1);
  const double measured = (noisy - clean).squaredNorm() / (K * H);
  CHECK(measured == Catch::Approx(sigma2).epsilon(0.05));
}

TEST_CASE("random pattern draws are always valid", "[tma]") {
  Rng r(13);
  for (int trial = 0; trial < 200; ++trial) {
    const int N = 2 + static_cast<int>(r.below(8));
    const TmaParams p = random_params(r, N);
    CHECK(validate_params(p).empty());
    CHECK(p.delta_tau >= 1.0 / N - 1e-15);
    CHECK(p.delta_tau <= static_cast<double>(N - 1) / N + 1e-15);
  }
  CHECK_THROWS_AS(random_params(r, 1), std::invalid_argument);
}
