#pragma once

// Time-modulated array (TMA) OFDM transmitter model.
//
// An N-element array is periodically switched so that each antenna n is ON
// for a normalized duration delta_tau starting at normalized instant
// tau_on[n]. The switching generates harmonics; at observation angle theta
// the K OFDM subcarriers mix through a K-by-K Toeplitz matrix V whose (i,l)
// entry is V_{i-l}/sqrt(N*K). Along the legitimate direction theta0 the
// matrix is diagonal (no scrambling); elsewhere the constellation is
// scrambled across subcarriers.
//
// Switching-pattern rules enforced here:
//   (C1) delta_tau and every tau_on[n] lie on the grid {h/N : h=0..N-1};
//   (C2) the tau_on are pairwise distinct and all antennas share one
//        delta_tau, so tau_on is a permutation of {0, 1/N, ..., (N-1)/N};
//   (C3) delta_tau > 0.
//
// The ON window may wrap past the period end; no special handling is needed
// because the harmonic coefficients below are used as the defining closed
// form (the time-domain square wave is never materialized).

#include "tmadm/types.hpp"

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace tmadm {

struct TmaParams {
  int N = 0;                    // antenna count
  double delta_tau = 0.0;       // common normalized ON duration, h/N
  std::vector<double> tau_on;   // N normalized ON instants, grid h/N
};

struct Geometry {
  double theta0_rad = 0.0;  // legitimate direction, in (0, pi)
  double theta_rad = 0.0;   // observation direction, in (0, pi)
  double phi = 0.0;         // cos(theta) - cos(theta0), in (-2, 2)

  static Geometry from_angles(double theta0_rad, double theta_rad) {
    Geometry g;
    g.theta0_rad = theta0_rad;
    g.theta_rad = theta_rad;
    g.phi = std::cos(theta_rad) - std::cos(theta0_rad);
    return g;
  }
  static Geometry from_degrees(double theta0_deg, double theta_deg) {
    return from_angles(deg2rad(theta0_deg), deg2rad(theta_deg));
  }
  // Synthesize a representative angle pair for a given offset phi:
  // cos(theta) = phi/2, cos(theta0) = -phi/2.
  static Geometry from_phi(double phi) {
    Geometry g;
    g.phi = phi;
    g.theta_rad = std::acos(phi / 2.0);
    g.theta0_rad = std::acos(-phi / 2.0);
    return g;
  }
};

struct MixingMatrix {
  int K = 0;
  int N = 0;
  std::vector<cxd> generator;  // V_m for m in [-(K-1), K-1]; index m + K - 1
  CMat matrix;                 // (i,l) = generator[i-l] / sqrt(N*K)

  const cxd& gen(int m) const {
    return generator[static_cast<std::size_t>(m + K - 1)];
  }
};

struct NoiseModel {
  double sigma2 = 0.0;  // per-subcarrier complex Gaussian variance
};

namespace detail {
// Distance from x to the nearest grid point h/N; also reports h.
inline bool on_grid(double x, int N, int& h_out) {
  const double scaled = x * N;
  const double r = std::round(scaled);
  h_out = static_cast<int>(r);
  return std::abs(scaled - r) < 1e-9;
}
}  // namespace detail

// Report every violated switching-pattern rule; empty list means valid.
inline std::vector<std::string> validate_params(const TmaParams& p) {
  std::vector<std::string> v;
  const int N = p.N;
  if (N < 2) {
    v.push_back("antenna count must be at least 2");
    return v;
  }
  if (p.tau_on.size() != static_cast<std::size_t>(N))
    v.push_back("tau_on must list exactly N instants");
  int h = 0;
  if (!detail::on_grid(p.delta_tau, N, h) || h < 0 || h > N - 1)
    v.push_back("(C1) delta_tau off the {h/N} grid");
  for (std::size_t n = 0; n < p.tau_on.size(); ++n) {
    if (!detail::on_grid(p.tau_on[n], N, h) || h < 0 || h > N - 1)
      v.push_back("(C1) tau_on[" + std::to_string(n) + "] off the {h/N} grid");
  }
  for (std::size_t a = 0; a < p.tau_on.size(); ++a)
    for (std::size_t b = a + 1; b < p.tau_on.size(); ++b)
      if (std::abs(p.tau_on[a] - p.tau_on[b]) < 1e-12)
        v.push_back("(C2) tau_on[" + std::to_string(a) + "] and tau_on[" +
                    std::to_string(b) + "] coincide");
  if (!(p.delta_tau > 0.0)) v.push_back("(C3) delta_tau must be positive");
  return v;
}

// Harmonic coefficient of antenna n (1-based) at harmonic m:
//   a_mn = delta_tau * sinc(m*pi*delta_tau) * exp(-j*m*pi*(2*tau_on[n-1] + delta_tau))
// with the unnormalized sinc.
inline cxd harmonic_coefficient(int m, int n, const TmaParams& p) {
  if (n < 1 || n > p.N) throw std::invalid_argument("antenna index out of range");
  const double dt = p.delta_tau;
  const double tau = p.tau_on[static_cast<std::size_t>(n - 1)];
  const double mag = dt * sinc(m * kPi * dt);
  const double ang = -m * kPi * (2.0 * tau + dt);
  return mag * cxd(std::cos(ang), std::sin(ang));
}

// Array response at harmonic m toward offset phi = cos(theta) - cos(theta0):
//   V_m = sum_n a_mn * exp(j*(n-1)*pi*phi)
// (the beam-steering weights toward theta0 are folded in).
inline cxd vm(int m, const TmaParams& p, const Geometry& g) {
  cxd acc(0.0, 0.0);
  for (int n = 1; n <= p.N; ++n) {
    const double ang = (n - 1) * kPi * g.phi;
    acc += harmonic_coefficient(m, n, p) * cxd(std::cos(ang), std::sin(ang));
  }
  return acc;
}

// Assemble the K-by-K Toeplitz mixing matrix: entry (i,l) = V_{i-l}/sqrt(N*K).
inline MixingMatrix mixing_matrix(const TmaParams& p, int K, const Geometry& g) {
  if (K < 2) throw std::invalid_argument("subcarrier count must be at least 2");
  MixingMatrix mm;
  mm.K = K;
  mm.N = p.N;
  mm.generator.resize(static_cast<std::size_t>(2 * K - 1));
  for (int m = -(K - 1); m <= K - 1; ++m)
    mm.generator[static_cast<std::size_t>(m + K - 1)] = vm(m, p, g);
  const double scale = 1.0 / std::sqrt(static_cast<double>(p.N) * K);
  mm.matrix.resize(K, K);
  for (int i = 0; i < K; ++i)
    for (int l = 0; l < K; ++l)
      mm.matrix(i, l) = mm.gen(i - l) * scale;
  return mm;
}

// Transmit symbol frames (K symbols per frame, frames are consecutive groups)
// through the mixing matrix at the observation angle and add circularly
// symmetric complex Gaussian noise of variance sigma2 per subcarrier.
// Returns a K-by-H matrix whose columns are the received frames.
inline CMat transmit_frames(const std::vector<cxd>& symbols, const TmaParams& p,
                            int K, const Geometry& g, const NoiseModel& noise,
                            Rng& rng) {
  const auto violations = validate_params(p);
  if (!violations.empty())
    throw std::invalid_argument("invalid switching pattern: " + violations.front());
  if (symbols.size() % static_cast<std::size_t>(K) != 0)
    throw std::invalid_argument("symbol count not divisible by frame size");
  const auto H = static_cast<Eigen::Index>(symbols.size() / static_cast<std::size_t>(K));
  const MixingMatrix mm = mixing_matrix(p, K, g);
  CMat S(K, H);
  for (Eigen::Index t = 0; t < H; ++t)
    for (int l = 0; l < K; ++l)
      S(l, t) = symbols[static_cast<std::size_t>(t) * static_cast<std::size_t>(K) +
                        static_cast<std::size_t>(l)];
  CMat Y = mm.matrix * S;
  if (noise.sigma2 > 0.0) {
    for (Eigen::Index t = 0; t < H; ++t)
      for (int i = 0; i < K; ++i) Y(i, t) += rng.cnormal(noise.sigma2);
  }
  return Y;
}

// Uniform draw over valid switching patterns: delta_tau uniform on
// {1/N, ..., (N-1)/N}, tau_on a uniform random permutation of
// {0, 1/N, ..., (N-1)/N}.
inline TmaParams random_params(Rng& rng, int N) {
  if (N < 2) throw std::invalid_argument("antenna count must be at least 2");
  TmaParams p;
  p.N = N;
  const int h = 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(N - 1)));
  p.delta_tau = static_cast<double>(h) / N;
  p.tau_on.resize(static_cast<std::size_t>(N));
  const std::vector<int> perm = rng.permutation(N);
  for (int n = 0; n < N; ++n)
    p.tau_on[static_cast<std::size_t>(n)] = static_cast<double>(perm[static_cast<std::size_t>(n)]) / N;
  return p;
}

// Closed form of the main-diagonal entry of the scaled mixing matrix
// (the m = 0 term; independent of the ON instants):
//   ratio R  = sin(N*pi*phi/2) / sin(pi*phi/2)   (-> N as phi -> 0)
//   angle    = (N-1)*pi*phi/2, plus pi when R < 0
//   modulus  = |delta_tau * R| / sqrt(N*K)
struct DiagClosedForm {
  double angle = 0.0;
  double modulus = 0.0;
};

inline DiagClosedForm diag_entry_closed_form(int N, double phi, double delta_tau,
                                             int K) {
  const double half = kPi * phi / 2.0;
  double R;
  if (std::abs(std::sin(half)) < 1e-300) {
    R = static_cast<double>(N);
  } else {
    R = std::sin(N * half) / std::sin(half);
  }
  DiagClosedForm out;
  out.angle = (N - 1) * half + (R < 0.0 ? kPi : 0.0);
  out.modulus = std::abs(delta_tau * R) / std::sqrt(static_cast<double>(N) * K);
  return out;
}

}  // namespace tmadm
