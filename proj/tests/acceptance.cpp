// Acceptance gate: ten end-to-end checks covering transparency of the
// legitimate link, the benchmark table, singular-offset detection, the
// ambiguous-pattern witness, separation sample efficiency, the two-phase
// refinement property, reorder robustness, gradient/decorrelation identities,
// oracle equivalence, and defense efficacy. One PASS/FAIL line per check;
// the process exits nonzero if any check fails.

#include "tmadm/tmadm.hpp"

#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <limits>
#include <map>
#include <string>
#include <vector>

using namespace tmadm;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

double now_s() {
  using clock = std::chrono::steady_clock;
  return std::chrono::duration<double>(clock::now().time_since_epoch()).count();
}

std::string fmt(const char* f, ...) {
  char buf[512];
  va_list ap;
  va_start(ap, f);
  std::vsnprintf(buf, sizeof buf, f, ap);
  va_end(ap);
  return buf;
}

CMat random_complex(Rng& r, int rows, int cols) {
  CMat A(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) A(i, j) = r.cnormal(1.0);
  return A;
}

// --- 1: the legitimate direction sees an undistorted constellation ---------

Outcome check_transparency() {
  Rng r(101);
  const Constellation psk = make_psk(2);
  double worst_off = 0.0, worst_diag = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    const int N = 2 + static_cast<int>(r.below(7));
    const TmaParams p = random_params(r, N);
    const int K = N + 1 + static_cast<int>(r.below(static_cast<std::uint64_t>(32 - N)));
    const double theta0 = deg2rad(20.0 + 140.0 * r.uniform());
    const Geometry g = Geometry::from_angles(theta0, theta0);
    const MixingMatrix mm = mixing_matrix(p, K, g);
    const double want = p.delta_tau * std::sqrt(static_cast<double>(N) / K);
    for (int i = 0; i < K; ++i)
      for (int l = 0; l < K; ++l) {
        if (i == l)
          worst_diag = std::max(worst_diag, std::abs(mm.matrix(i, i) - cxd(want, 0.0)));
        else
          worst_off = std::max(worst_off, std::abs(mm.matrix(i, l)));
      }

    std::vector<int> bits(static_cast<std::size_t>(K) * 20);
    for (auto& b : bits) b = r.bit();
    Rng noise(1);
    const CMat Y = transmit_frames(modulate(bits, psk), p, K, g, NoiseModel{0.0}, noise);
    std::vector<cxd> received;
    received.reserve(bits.size());
    for (Eigen::Index t = 0; t < Y.cols(); ++t)
      for (int i = 0; i < K; ++i) received.push_back(Y(i, t));
    if (ber(bits, demodulate(received, psk)) != 0.0)
      return {false, "noiseless BER at the legitimate angle is not zero"};
  }
  const bool pass = worst_off < 1e-12 && worst_diag < 1e-12;
  return {pass, fmt("50 configs: max off-diagonal %.2e, max diagonal error %.2e",
                    worst_off, worst_diag)};
}

// --- 2 and 10 share the benchmark table -------------------------------------

std::vector<ReportRow> run_benchmark_table() {
  ExperimentPlan plan;
  plan.scenario = Scenario::table1;
  plan.profile = Profile::paper;
  plan.seed = 1;
  return run_table1(plan);
}

Outcome check_benchmark_table(const std::vector<ReportRow>& rows) {
  if (rows.size() != 10) return {false, "expected 10 benchmark rows"};
  int defied_zero = 0;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& r = rows[i];
    const double orig = r.ber_original.value_or(-1.0);
    const double defied = r.ber_defied.value_or(-1.0);
    const double defended = r.ber_defended.value_or(-1.0);
    if (orig < 0.40 || orig > 0.55)
      return {false, fmt("row %zu original BER %.4f outside [0.40, 0.55]", i + 1, orig)};
    if (defied == 0.0) ++defied_zero;
    if (i < 5 && defied != 0.0)
      return {false, fmt("row %zu (offset known) defied BER %.4g != 0", i + 1, defied)};
    if (defended <= 0.30)
      return {false, fmt("row %zu defended BER %.4f <= 0.30", i + 1, defended)};
  }
  if (defied_zero < 9)
    return {false, fmt("defied BER exactly 0 on only %d/10 rows", defied_zero)};
  return {true, fmt("10 rows: defied zero on %d/10, originals and defended in range",
                    defied_zero)};
}

// --- 3: singular offsets across the admissible grid ------------------------

Outcome check_singular_offsets() {
  double worst_rel = 0.0;
  int checked = 0;
  for (int N = 2; N <= 8; ++N) {
    for (int K = N + 1; K <= 24; ++K) {
      if (K % N == 0) continue;  // multiples keep the matrix invertible
      const SecurityVerdict v =
          rank_deficiency_check(ladder_params(N, 1), K, 2.0 / N);
      worst_rel = std::max(worst_rel, v.smallest_sv / v.largest_sv);
      if (!v.analytic_predicate)
        return {false, fmt("analytic predicate missed N=%d K=%d", N, K)};
      ++checked;
    }
  }
  const bool pass = worst_rel < 1e-10;
  return {pass, fmt("%d (N,K) pairs, worst relative smallest SV %.2e", checked,
                    worst_rel)};
}

// --- 4: the documented ambiguous pattern pair -------------------------------

Outcome check_pattern_witness() {
  const int N = 4, K = 4;
  const double phi = 2.0 / N;
  const AmbiguitySearchResult res =
      find_ambiguous_patterns(N, K, phi, make_psk(2));
  if (res.budget_exceeded) return {false, "search budget exceeded"};

  const std::vector<double> tau_a = {0.75, 0.25, 0.5, 0.0};
  const std::vector<double> tau_b = {0.0, 0.5, 0.75, 0.25};
  const std::vector<double> sym_a = {1, -1, -1, 1};
  const std::vector<double> sym_b = {-1, 1, 1, -1};

  auto matches = [](const PatternWitness& w, double dt,
                    const std::vector<double>& tau,
                    const std::vector<double>& s) {
    if (std::abs(w.delta_tau - dt) > 1e-12) return false;
    for (std::size_t i = 0; i < tau.size(); ++i)
      if (std::abs(w.tau_on[i] - tau[i]) > 1e-12) return false;
    for (std::size_t i = 0; i < s.size(); ++i)
      if (std::abs(w.symbols[i] - cxd(s[i], 0.0)) > 1e-12) return false;
    return true;
  };
  bool pair_in_one_group = false;
  for (const auto& group : res.groups) {
    bool a = false, b = false;
    for (const auto& w : group) {
      a = a || matches(w, 0.25, tau_a, sym_a);
      b = b || matches(w, 0.75, tau_b, sym_b);
    }
    pair_in_one_group = pair_in_one_group || (a && b);
  }
  if (!pair_in_one_group)
    return {false, "documented pattern pair not grouped together"};

  // Direct replay of the two configurations.
  const Geometry g = Geometry::from_phi(phi);
  TmaParams pa, pb;
  pa.N = pb.N = N;
  pa.delta_tau = 0.25;
  pa.tau_on = tau_a;
  pb.delta_tau = 0.75;
  pb.tau_on = tau_b;
  std::vector<cxd> sa, sb;
  for (double v : sym_a) sa.emplace_back(v, 0.0);
  for (double v : sym_b) sb.emplace_back(v, 0.0);
  Rng ra(1), rb(1);
  const CMat ya = transmit_frames(sa, pa, K, g, NoiseModel{0.0}, ra);
  const CMat yb = transmit_frames(sb, pb, K, g, NoiseModel{0.0}, rb);
  const double diff = (ya - yb).cwiseAbs().maxCoeff();
  return {diff < 1e-12,
          fmt("%zu ambiguous groups; replayed pair differs by %.2e",
              res.groups.size(), diff)};
}

// --- 5: two-stage separation needs fewer frames than stage 1 alone ---------

Outcome check_sample_efficiency() {
  ExperimentPlan plan;
  plan.scenario = Scenario::sweep_H;
  plan.profile = Profile::paper;
  plan.seed = 1;
  plan.K = 16;
  plan.N = 7;
  plan.K_list = {16};
  plan.H_list = {250, 500, 1000, 2000, 4000};
  plan.snr_list = {30.0};
  plan.trials = 30;
  const auto rows = run_sweep_H(plan);

  const double inf = std::numeric_limits<double>::infinity();
  std::map<std::string, double> threshold = {{"cmica+knn", inf},
                                             {"stage1-only", inf}};
  std::string curve;
  const std::size_t part1 = plan.K_list.size() * plan.H_list.size();
  for (std::size_t i = part1; i < rows.size(); ++i) {
    const auto& r = rows[i];  // the first K_list x H_list rows are the K scaling
    const double ber = r.ber_defied.value_or(-1.0);
    curve += fmt(" %s@H=%lld:%.4g", r.method.c_str(), r.H, ber);
    auto it = threshold.find(r.method);
    if (it == threshold.end()) return {false, "unexpected method label"};
    if (ber == 0.0 && static_cast<double>(r.H) < it->second)
      it->second = static_cast<double>(r.H);
  }
  const double thr_two_stage = threshold["cmica+knn"];
  const double thr_stage1 = threshold["stage1-only"];
  const bool pass = thr_two_stage <= 2000.0 && thr_two_stage < thr_stage1;
  return {pass, fmt("zero-BER threshold: two-stage H=%.0f, stage-1-only H=%.0f;%s",
                    thr_two_stage, thr_stage1, curve.c_str())};
}

// --- 6: the second phase strictly refines, and true columns pin G(1) -------

Outcome check_two_phase_refinement() {
  // Trace at small sample count on the hardest ladder.
  const TmaParams p = ladder_params(7, 1);
  const int K = 16, H = 1000;
  const Geometry g = Geometry::from_degrees(60.0, 40.0);
  const Constellation psk = make_psk(2);
  Rng bits_rng(derive_seed(6, 1, 0)), noise_rng(derive_seed(6, 2, 0));
  std::vector<int> bits(static_cast<std::size_t>(K) * H);
  for (auto& b : bits) b = bits_rng.bit();
  const MixingMatrix mm = mixing_matrix(p, K, g);
  const double sigma2 = mm.matrix.squaredNorm() / (K * std::pow(10.0, 3.0));
  const CMat Y = transmit_frames(modulate(bits, psk), p, K, g,
                                 NoiseModel{sigma2}, noise_rng);

  IcaOptions opts;
  opts.contrast = Contrast{ContrastKind::negentropy};
  opts.max_iter_stage1 = 40;
  opts.max_iter_stage2 = 40;
  opts.mu = 0.1;
  opts.record_trace = true;
  opts.seed = derive_seed(6, 3, 0);
  const CmicaResult res = cmica(Y, opts);
  if (res.trace.empty()) return {false, "no iteration trace recorded"};
  const double final_ng = res.trace.back();
  if (!(final_ng > res.stage1_plateau))
    return {false, fmt("final non-Gaussianity %.12f does not exceed the "
                       "stage-1 plateau %.12f",
                       final_ng, res.stage1_plateau)};

  // Constant-modulus sources pin the contrast value at a true column,
  // independent of the sample count.
  Rng r(61);
  const int Kc = 5;
  CMat A = random_complex(r, Kc, Kc);
  Eigen::HouseholderQR<CMat> qr(A);
  const CMat U = qr.householderQ() * CMat::Identity(Kc, Kc);
  double worst = 0.0;
  for (int Hc : {100, 1000, 10000}) {
    CMat S(Kc, Hc);
    for (int i = 0; i < Kc; ++i)
      for (int t = 0; t < Hc; ++t)
        S(i, t) = std::exp(cxd(0.0, 2.0 * kPi * i * t / Hc));
    const CMat Yc = U * S;
    for (ContrastKind kind : {ContrastKind::kurtosis, ContrastKind::negentropy}) {
      const Contrast c{kind};
      for (int i = 0; i < Kc; ++i)
        worst = std::max(worst,
                         std::abs(nongaussianity(U.col(i), Yc, c) - c.G(1.0)));
    }
  }
  const bool pass = worst < 1e-12;
  return {pass, fmt("refinement +%.3e over plateau; worst G(1) deviation %.2e",
                    final_ng - res.stage1_plateau, worst)};
}

// --- 7: longer reorder references do not hurt -------------------------------

Outcome check_reference_length() {
  double mean_k1 = 0.0, mean_k3 = 0.0;
  for (int k : {1, 3}) {
    double sum = 0.0;
    for (int s = 0; s < 20; ++s) {
      CellSpec c;
      c.K = 16;
      c.N = 7;
      c.H = 10'000;
      c.snr_db = 15.0;
      c.theta0_deg = 60.0;
      c.theta_e_deg = 40.0;
      c.params = ladder_params(7, 1);
      c.phi_known = true;
      c.k = k;
      c.seed = derive_seed(1, 0x77, static_cast<std::uint64_t>(s));
      sum += run_attack_cell(c).ber_attack;
    }
    (k == 1 ? mean_k1 : mean_k3) = sum / 20.0;
  }
  const bool pass = mean_k3 <= mean_k1;
  return {pass, fmt("mean attack BER over 20 seeds: k=3 %.5f vs k=1 %.5f",
                    mean_k3, mean_k1)};
}

// --- 8: gradient and decorrelation identities -------------------------------

Outcome check_gradient_identities() {
  Rng r(81);
  double worst_rel = 0.0;
  for (ContrastKind kind : {ContrastKind::kurtosis, ContrastKind::negentropy}) {
    const Contrast c{kind};
    for (int trial = 0; trial < 50; ++trial) {
      const int K = 3 + static_cast<int>(r.below(5));
      const CMat Y = random_complex(r, K, 150);
      CVec w = CVec(random_complex(r, K, 1));
      w /= w.norm();
      const double lam = lambda_estimate(w, Y, c);
      const CVec analytic = detail::contrast_stats(w, Y, c).numerator;
      CVec fd(K);
      const double h = 1e-6;
      auto L = [&](const CVec& v) {
        return nongaussianity(v, Y, c) - lam * (v.squaredNorm() - 1.0);
      };
      for (int i = 0; i < K; ++i) {
        CVec wp = w, wm = w;
        wp(i) += h;
        wm(i) -= h;
        const double d_re = (L(wp) - L(wm)) / (2.0 * h);
        wp = w;
        wm = w;
        wp(i) += cxd(0.0, h);
        wm(i) -= cxd(0.0, h);
        const double d_im = (L(wp) - L(wm)) / (2.0 * h);
        fd(i) = 0.5 * cxd(d_re, d_im);
      }
      worst_rel = std::max(worst_rel, (analytic - fd).norm() / analytic.norm());
    }
  }
  if (worst_rel >= 1e-5)
    return {false, fmt("gradient mismatch: worst relative error %.2e", worst_rel)};

  double worst_unitary = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const int K = 2 + static_cast<int>(r.below(7));
    const CMat W = random_complex(r, K, K);
    const CMat D = symmetric_decorrelate(W);
    worst_unitary = std::max(
        worst_unitary,
        (D.adjoint() * D - CMat::Identity(K, K)).cwiseAbs().maxCoeff());
  }
  const bool pass = worst_unitary < 1e-10;
  return {pass, fmt("100 gradient points rel<=%.2e; 100 decorrelations "
                    "unitary to %.2e",
                    worst_rel, worst_unitary)};
}

// --- 9: oracle equivalence ---------------------------------------------------

Outcome check_oracle_equivalence() {
  Rng r(91);
  const Constellation psk = make_psk(4);
  double worst_rel = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    const int N = 2 + static_cast<int>(r.below(6));
    const TmaParams p = random_params(r, N);
    const int K = N + 1 + static_cast<int>(r.below(10));
    const int H = 4;
    const double phi = -1.9 + 3.8 * r.uniform();
    std::vector<int> bits(static_cast<std::size_t>(K * H * psk.bits_per_symbol));
    for (auto& b : bits) b = r.bit();
    const auto symbols = modulate(bits, psk);
    Rng noise(1);
    const CMat got = transmit_frames(symbols, p, K, Geometry::from_phi(phi),
                                     NoiseModel{0.0}, noise);
    // Brute-force triple sum straight from the scalar definitions.
    CMat want(K, H);
    const double scale = 1.0 / std::sqrt(static_cast<double>(N) * K);
    for (int t = 0; t < H; ++t)
      for (int i = 0; i < K; ++i) {
        cxd acc = 0.0;
        for (int l = 0; l < K; ++l) {
          cxd vm = 0.0;
          for (int n = 0; n < N; ++n) {
            const double tau = p.tau_on[static_cast<std::size_t>(n)];
            vm += p.delta_tau * sinc((i - l) * kPi * p.delta_tau) *
                  std::exp(cxd(0.0, -(i - l) * kPi * (2.0 * tau + p.delta_tau))) *
                  std::exp(cxd(0.0, n * kPi * phi));
          }
          acc += vm * symbols[static_cast<std::size_t>(t * K + l)];
        }
        want(i, t) = scale * acc;
      }
    worst_rel = std::max(worst_rel, (got - want).cwiseAbs().maxCoeff() /
                                        want.cwiseAbs().maxCoeff());
  }
  if (worst_rel >= 1e-10)
    return {false, fmt("transmit mismatch: relative error %.2e", worst_rel)};

  const TmaParams p = ladder_params(7, 6);
  const MixingMatrix mm =
      mixing_matrix(p, 16, Geometry::from_degrees(60.0, 40.0));
  int recovered = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const std::vector<int> perm = r.permutation(16);
    const CMat F = apply_column_order(mm.matrix, perm);
    const auto candidates = toeplitz_reorder_knn(F, 3);
    std::vector<int> inv(16);
    for (int i = 0; i < 16; ++i) inv[static_cast<std::size_t>(perm[static_cast<std::size_t>(i)])] = i;
    if (!candidates.empty() && candidates.front().order == inv) ++recovered;
  }
  const bool pass = recovered == 100;
  return {pass, fmt("transmit rel %.2e; reorder recovered %d/100 permutations",
                    worst_rel, recovered)};
}

// --- 10: defenses work ------------------------------------------------------

Outcome check_defenses(const std::vector<ReportRow>& table_rows) {
  const int N = 7, K = 16;
  const RotationDefense rd = rotation_defense(deg2rad(60.0), deg2rad(40.0), N);
  if (!rd.feasible || rd.residual >= 1e-10)
    return {false, fmt("rotation infeasible or imprecise (residual %.2e)",
                       rd.residual)};
  const double phi_r = std::cos(deg2rad(40.0) + rd.theta_r_rad) -
                       std::cos(deg2rad(60.0) + rd.theta_r_rad);
  const SecurityVerdict v = rank_deficiency_check(ladder_params(N, 6), K, phi_r);
  if (!v.rank_deficient)
    return {false, "rotated offset is not flagged rank-deficient"};

  // The rotation leaves the legitimate link untouched: the main diagonal at
  // the (rotated) legitimate angle keeps the same value, so the SNR formula
  // is unchanged.
  const double t0r = deg2rad(60.0) + rd.theta_r_rad;
  const MixingMatrix after =
      mixing_matrix(ladder_params(N, 6), K, Geometry::from_angles(t0r, t0r));
  const double want = (6.0 / 7.0) * std::sqrt(static_cast<double>(N) / K);
  for (int i = 0; i < K; ++i)
    if (std::abs(after.matrix(i, i) - cxd(want, 0.0)) > 1e-12)
      return {false, "rotation changed the legitimate-link gain"};
  const LegitSnr snr_before = legit_snr(N, K, 6.0 / 7.0, 0.01);
  const LegitSnr snr_after = legit_snr(N, K, 6.0 / 7.0, 0.01);
  if (snr_before.linear != snr_after.linear)
    return {false, "legitimate SNR changed under rotation"};

  // Pattern randomization: every per-frame matrix stays diagonal at the
  // legitimate angle.
  RandomPatternStream stream = randomize_switch_pattern(10, N, 6.0 / 7.0);
  for (int f = 0; f < 100; ++f) {
    const TmaParams p = stream.next();
    const MixingMatrix mm =
        mixing_matrix(p, K, Geometry::from_degrees(60.0, 60.0));
    for (int i = 0; i < K; ++i)
      for (int l = 0; l < K; ++l) {
        if (i == l) {
          if (std::abs(mm.matrix(i, i) - cxd(want, 0.0)) > 1e-12)
            return {false, "randomized pattern distorted the diagonal"};
        } else if (std::abs(mm.matrix(i, l)) > 1e-12) {
          return {false, "randomized pattern leaked off-diagonal energy"};
        }
      }
  }

  // And the attack fails against it at the benchmark settings.
  double min_defended = 1.0;
  for (const auto& r : table_rows)
    min_defended = std::min(min_defended, r.ber_defended.value_or(0.0));
  const bool pass = min_defended > 0.3;
  return {pass, fmt("rotation residual %.1e, rank deficiency flagged, "
                    "defended BER >= %.4f on all benchmark rows",
                    rd.residual, min_defended)};
}

}  // namespace

int main() {
  int failures = 0;
  int index = 0;
  std::vector<ReportRow> table_rows;

  auto report = [&](const char* name, const Outcome& o, double secs) {
    ++index;
    std::printf("[%2d/10] %s  %s (%.1f s) - %s\n", index,
                o.pass ? "PASS" : "FAIL", name, secs, o.detail.c_str());
    std::fflush(stdout);
    if (!o.pass) ++failures;
  };

  double t = now_s();
  report("legitimate-direction transparency", check_transparency(), now_s() - t);

  t = now_s();
  table_rows = run_benchmark_table();
  report("benchmark table reproduction", check_benchmark_table(table_rows),
         now_s() - t);

  t = now_s();
  report("singular-offset detection sweep", check_singular_offsets(), now_s() - t);

  t = now_s();
  report("ambiguous pattern witness", check_pattern_witness(), now_s() - t);

  t = now_s();
  report("separation sample efficiency", check_sample_efficiency(), now_s() - t);

  t = now_s();
  report("two-phase refinement", check_two_phase_refinement(), now_s() - t);

  t = now_s();
  report("reorder reference robustness", check_reference_length(), now_s() - t);

  t = now_s();
  report("gradient and decorrelation identities", check_gradient_identities(),
         now_s() - t);

  t = now_s();
  report("oracle equivalence", check_oracle_equivalence(), now_s() - t);

  t = now_s();
  report("defense efficacy", check_defenses(table_rows), now_s() - t);

  if (failures == 0) {
    std::printf("all acceptance checks passed\n");
  } else {
    std::printf("%d acceptance check(s) failed\n", failures);
  }
  return failures;
}
