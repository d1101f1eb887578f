#pragma once

// Security conditions and scrambling defenses.
//
// Two structural conditions make the transmission safe against the
// separation attack: a rank-deficient mixing matrix (the linear system for
// the symbols is underdetermined) and non-uniqueness of the ON-OFF switching
// pattern (several parameter/symbol combinations explain the same received
// signal). Both occur at the special offsets phi = +-2i/N with ON instants
// on the (n-1)/N ladder. The defenses either steer the geometry onto those
// offsets (rotation), re-draw the ON instants every frame (pattern
// randomization), or reduce the symbol diversity (duplication), all without
// touching the legitimate receiver's SNR or diagonal mixing.

#include "tmadm/constellation.hpp"
#include "tmadm/tma.hpp"
#include "tmadm/types.hpp"

#include <algorithm>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace tmadm {

struct SecurityVerdict {
  bool rank_deficient = false;   // numerical evidence (relative sv threshold)
  bool analytic_predicate = false;  // analytic condition triggered
  double smallest_sv = 0.0;
  double largest_sv = 0.0;
  std::string notes;
};

// Numerical rank check of the mixing matrix at offset phi, plus the analytic
// predicate: phi in {+-2i/N}, ON instants exactly the ordered ladder
// (n-1)/N, and no positive integer i with i*N = K.
inline SecurityVerdict rank_deficiency_check(const TmaParams& p, int K,
                                             double phi) {
  SecurityVerdict v;
  const MixingMatrix mm = mixing_matrix(p, K, Geometry::from_phi(phi));
  Eigen::JacobiSVD<CMat> svd(mm.matrix);
  v.smallest_sv = svd.singularValues()(K - 1);
  v.largest_sv = svd.singularValues()(0);
  v.rank_deficient = v.smallest_sv < 1e-10 * v.largest_sv;

  bool ladder = true;
  for (int n = 0; n < p.N; ++n)
    if (std::abs(p.tau_on[static_cast<std::size_t>(n)] -
                 static_cast<double>(n) / p.N) > 1e-12)
      ladder = false;
  bool special_phi = false;
  for (int i = 1; 2.0 * i / p.N < 2.0 + 1e-12; ++i)
    if (std::abs(std::abs(phi) - 2.0 * i / p.N) < 1e-12) special_phi = true;
  bool multiple_hits_K = false;
  for (int i = 1; i * p.N <= K; ++i)
    if (i * p.N == K) multiple_hits_K = true;
  v.analytic_predicate = ladder && special_phi && !multiple_hits_K;
  v.notes = v.analytic_predicate
                ? "analytic rank-deficiency condition holds"
                : "analytic condition not triggered; numerical rank reported";
  return v;
}

// True iff the nonzero entries sit exactly at generator offsets m = 1 + iN
// and, consequently, consecutive nonzeros in every row and column are
// exactly N apart.
inline bool nonzero_spacing_check(const MixingMatrix& V, int N) {
  const int K = V.K;
  for (int m = -(K - 1); m <= K - 1; ++m) {
    const bool nonzero = std::abs(V.gen(m)) > 1e-12;
    const bool expected = ((m - 1) % N) == 0;  // m = 1 + iN, any integer i
    if (nonzero != expected) return false;
  }
  auto spacing_ok = [&](auto&& entry) {
    for (int fixed = 0; fixed < K; ++fixed) {
      int prev = -1;
      for (int idx = 0; idx < K; ++idx) {
        if (std::abs(entry(fixed, idx)) > 1e-12) {
          if (prev >= 0 && idx - prev != N) return false;
          prev = idx;
        }
      }
    }
    return true;
  };
  const CMat& A = V.matrix;
  if (!spacing_ok([&](int r, int c) { return A(r, c); })) return false;
  if (!spacing_ok([&](int c, int r) { return A(r, c); })) return false;
  return true;
}

// One switching-pattern/symbol configuration and the exhaustive search for
// groups of configurations producing identical received frames.
struct PatternWitness {
  double delta_tau = 0.0;
  std::vector<double> tau_on;
  std::vector<cxd> symbols;
};

struct AmbiguitySearchResult {
  std::vector<std::vector<PatternWitness>> groups;  // each holds >= 2 members
  bool budget_exceeded = false;
  std::uint64_t enumerated = 0;
};

// Exhaustively enumerate (delta_tau, tau permutation, symbol vector) for
// small N and K, group by the received vector y = V s quantized to a 1e-9
// grid, and return groups with at least two distinct members. Every group is
// re-verified exactly (1e-12) against its first member before being emitted.
inline AmbiguitySearchResult find_ambiguous_patterns(
    int N, int K, double phi, const Constellation& c,
    std::uint64_t search_budget = 1'000'000) {
  AmbiguitySearchResult res;
  std::map<std::vector<long long>, std::vector<PatternWitness>> buckets;

  std::vector<int> perm(static_cast<std::size_t>(N));
  const Geometry g = Geometry::from_phi(phi);
  const auto Kc = static_cast<std::uint64_t>(c.M);
  std::uint64_t n_symbols = 1;
  for (int i = 0; i < K; ++i) n_symbols *= Kc;

  for (int h = 1; h < N && !res.budget_exceeded; ++h) {
    TmaParams p;
    p.N = N;
    p.delta_tau = static_cast<double>(h) / N;
    p.tau_on.resize(static_cast<std::size_t>(N));
    for (int i = 0; i < N; ++i) perm[static_cast<std::size_t>(i)] = i;
    std::sort(perm.begin(), perm.end());
    do {
      for (int i = 0; i < N; ++i)
        p.tau_on[static_cast<std::size_t>(i)] =
            static_cast<double>(perm[static_cast<std::size_t>(i)]) / N;
      const MixingMatrix mm = mixing_matrix(p, K, g);
      for (std::uint64_t code = 0; code < n_symbols; ++code) {
        if (res.enumerated >= search_budget) {
          res.budget_exceeded = true;
          break;
        }
        ++res.enumerated;
        CVec s(K);
        std::uint64_t rem = code;
        for (int l = 0; l < K; ++l) {
          s(l) = c.points[static_cast<std::size_t>(rem % Kc)];
          rem /= Kc;
        }
        const CVec y = mm.matrix * s;
        std::vector<long long> key;
        key.reserve(static_cast<std::size_t>(2 * K));
        for (int l = 0; l < K; ++l) {
          key.push_back(static_cast<long long>(std::llround(y(l).real() * 1e9)));
          key.push_back(static_cast<long long>(std::llround(y(l).imag() * 1e9)));
        }
        PatternWitness w;
        w.delta_tau = p.delta_tau;
        w.tau_on = p.tau_on;
        w.symbols.assign(s.data(), s.data() + K);
        buckets[key].push_back(std::move(w));
      }
      if (res.budget_exceeded) break;
    } while (std::next_permutation(perm.begin(), perm.end()));
  }

  for (auto& [key, members] : buckets) {
    if (members.size() < 2) continue;
    // Exact re-verification against the first member.
    TmaParams p0;
    p0.N = N;
    p0.delta_tau = members[0].delta_tau;
    p0.tau_on = members[0].tau_on;
    CVec s0(K);
    for (int l = 0; l < K; ++l) s0(l) = members[0].symbols[static_cast<std::size_t>(l)];
    const CVec y0 = mixing_matrix(p0, K, g).matrix * s0;
    std::vector<PatternWitness> confirmed{members[0]};
    for (std::size_t i = 1; i < members.size(); ++i) {
      TmaParams pi;
      pi.N = N;
      pi.delta_tau = members[i].delta_tau;
      pi.tau_on = members[i].tau_on;
      CVec si(K);
      for (int l = 0; l < K; ++l) si(l) = members[i].symbols[static_cast<std::size_t>(l)];
      const CVec yi = mixing_matrix(pi, K, g).matrix * si;
      if ((yi - y0).cwiseAbs().maxCoeff() < 1e-12) confirmed.push_back(members[i]);
    }
    if (confirmed.size() >= 2) res.groups.push_back(std::move(confirmed));
  }
  return res;
}

struct RotationDefense {
  bool feasible = false;
  double theta_r_rad = 0.0;
  int harmonic_index = 0;  // the i of the achieved target +-2i/N
  double residual = std::numeric_limits<double>::infinity();
  std::string note;
};

// Find the smallest-magnitude rotation theta_r keeping both rotated angles
// inside (0, pi) such that cos(theta_e + theta_r) - cos(theta0 + theta_r)
// equals one of the rank-deficiency targets +-2i/N (i = 1..N). Solved by
// bracketing sign changes on a fine grid and bisecting each bracket.
inline RotationDefense rotation_defense(double theta0_rad, double theta_e_rad,
                                        int N) {
  if (std::abs(theta0_rad - theta_e_rad) < 1e-12)
    throw std::invalid_argument("degenerate geometry: equal directions");
  RotationDefense best;
  const double lo = -std::min(theta0_rad, theta_e_rad) + 1e-9;
  const double hi = kPi - std::max(theta0_rad, theta_e_rad) - 1e-9;
  if (lo >= hi) {
    best.note = "infeasible: empty rotation interval";
    return best;
  }
  auto f = [&](double tr) {
    return std::cos(theta_e_rad + tr) - std::cos(theta0_rad + tr);
  };
  const int grid = 4096;
  for (int i = 1; i <= N; ++i) {
    for (double sign : {1.0, -1.0}) {
      const double target = sign * 2.0 * i / N;
      if (std::abs(target) > 2.0) continue;
      double prev_tr = lo;
      double prev_v = f(prev_tr) - target;
      for (int gidx = 1; gidx <= grid; ++gidx) {
        const double tr = lo + (hi - lo) * gidx / grid;
        const double v = f(tr) - target;
        if (prev_v == 0.0 || v * prev_v <= 0.0) {
          double a = prev_tr, b = tr;
          double fa = prev_v;
          for (int it = 0; it < 200; ++it) {
            const double m = 0.5 * (a + b);
            const double fm = f(m) - target;
            if (fa * fm <= 0.0) {
              b = m;
            } else {
              a = m;
              fa = fm;
            }
          }
          const double root = 0.5 * (a + b);
          const double resid = std::abs(f(root) - target);
          if (resid < 1e-10 &&
              (!best.feasible || std::abs(root) < std::abs(best.theta_r_rad))) {
            best.feasible = true;
            best.theta_r_rad = root;
            best.harmonic_index = i;
            best.residual = resid;
            best.note = "target " + std::to_string(target);
          }
        }
        prev_tr = tr;
        prev_v = v;
      }
    }
  }
  if (!best.feasible) best.note = "infeasible: no target reachable in (0, pi)";
  return best;
}

// Per-frame switching-pattern randomization: fresh uniform permutation of the
// ON instants each frame, fixed delta_tau. Every emitted pattern is valid, so
// the legitimate direction still sees a diagonal mixing matrix per frame.
class RandomPatternStream {
 public:
  RandomPatternStream(std::uint64_t seed, int N, double delta_tau)
      : rng_(seed), N_(N), delta_tau_(delta_tau) {
    TmaParams probe;
    probe.N = N;
    probe.delta_tau = delta_tau;
    probe.tau_on.resize(static_cast<std::size_t>(N));
    for (int n = 0; n < N; ++n)
      probe.tau_on[static_cast<std::size_t>(n)] = static_cast<double>(n) / N;
    const auto violations = validate_params(probe);
    if (!violations.empty())
      throw std::invalid_argument("invalid base pattern: " + violations.front());
  }

  TmaParams next() {
    TmaParams p;
    p.N = N_;
    p.delta_tau = delta_tau_;
    p.tau_on.resize(static_cast<std::size_t>(N_));
    const std::vector<int> perm = rng_.permutation(N_);
    for (int n = 0; n < N_; ++n)
      p.tau_on[static_cast<std::size_t>(n)] =
          static_cast<double>(perm[static_cast<std::size_t>(n)]) / N_;
    return p;
  }

 private:
  Rng rng_;
  int N_;
  double delta_tau_;
};

inline RandomPatternStream randomize_switch_pattern(std::uint64_t seed, int N,
                                                    double delta_tau) {
  return RandomPatternStream(seed, N, delta_tau);
}

struct DuplicatedStream {
  std::vector<cxd> symbols;
  double effective_rate = 1.0;  // information symbols per subcarrier
};

// Per frame, copy one randomly chosen symbol onto a random subset of
// ceil(dup_fraction * K) subcarriers (the donor is part of the subset, so a
// subset of size 1 leaves the frame unchanged). Reduces the symbol diversity
// the separation stage relies on, at a proportional rate cost.
inline DuplicatedStream duplicate_symbol_defense(const std::vector<cxd>& symbols,
                                                 Rng& rng, double dup_fraction,
                                                 int K) {
  if (!(dup_fraction >= 0.0) || dup_fraction >= 1.0)
    throw std::invalid_argument("dup_fraction must lie in [0, 1)");
  if (symbols.size() % static_cast<std::size_t>(K) != 0)
    throw std::invalid_argument("symbol count not divisible by frame size");
  DuplicatedStream out;
  out.symbols = symbols;
  const int m = static_cast<int>(std::ceil(dup_fraction * K));
  out.effective_rate =
      static_cast<double>(K - std::max(0, m - 1)) / static_cast<double>(K);
  if (m <= 1) return out;
  const std::size_t H = symbols.size() / static_cast<std::size_t>(K);
  for (std::size_t t = 0; t < H; ++t) {
    const std::vector<int> perm = rng.permutation(K);
    const std::size_t base = t * static_cast<std::size_t>(K);
    const cxd donor = out.symbols[base + static_cast<std::size_t>(perm[0])];
    for (int j = 1; j < m; ++j)
      out.symbols[base + static_cast<std::size_t>(perm[static_cast<std::size_t>(j)])] = donor;
  }
  return out;
}

struct LegitSnr {
  double linear = 0.0;
  double db = 0.0;
  double efficiency = 0.0;  // transmitted power fraction, delta_tau^2
};

// Legitimate-receiver SNR N*delta_tau^2/(K*sigma2) - independent of the
// direction - and the power efficiency delta_tau^2.
inline LegitSnr legit_snr(int N, int K, double delta_tau, double sigma2) {
  LegitSnr s;
  s.efficiency = delta_tau * delta_tau;
  if (sigma2 <= 0.0) {
    s.linear = std::numeric_limits<double>::infinity();
    s.db = std::numeric_limits<double>::infinity();
    return s;
  }
  s.linear = N * delta_tau * delta_tau / (K * sigma2);
  s.db = 10.0 * std::log10(s.linear);
  return s;
}

}  // namespace tmadm
