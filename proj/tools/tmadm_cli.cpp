// Command-line front end for the TMA OFDM directional-modulation toolkit.
//
// Subcommands:
//   simulate  transmit frames at an observation angle, report the receiver
//             BER there, optionally save the frames to a binary container
//   attack    run the blind separation attack on generated or loaded frames
//   defend    run the attack against a transmitter defense
//   audit     structural security verdicts for a configuration
//   sweep     declarative experiment grids with CSV output
//   table1    shorthand for the benchmark table scenario
//
// Experiment configs are JSON files mirroring the ExperimentPlan fields;
// every flag given on the command line overrides the config value.

#include "tmadm/tmadm.hpp"

#include "CLI11.hpp"
#include "json.hpp"

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

namespace {

using nlohmann::json;
using namespace tmadm;

ContrastKind contrast_from_string(const std::string& s) {
  if (s == "kurtosis") return ContrastKind::kurtosis;
  if (s == "negentropy") return ContrastKind::negentropy;
  throw std::invalid_argument("unknown contrast: " + s);
}

TmaParams params_from_json(const json& j) {
  TmaParams p;
  p.N = j.at("N").get<int>();
  p.delta_tau = j.at("delta_tau").get<double>();
  p.tau_on = j.at("tau_on").get<std::vector<double>>();
  const auto violations = validate_params(p);
  if (!violations.empty())
    throw std::invalid_argument("config pattern invalid: " + violations.front());
  return p;
}

ExperimentPlan plan_from_json(const json& j) {
  ExperimentPlan plan;
  static const std::vector<std::string> known = {
      "scenario", "profile", "seed", "out", "K", "N", "M", "k", "theta0_deg",
      "theta_e_deg", "params", "H", "snr_db", "phi_known", "contrast",
      "method", "defense", "dup_fraction", "trials", "H_list", "snr_list",
      "K_list", "delta_tau_list", "k_list", "max_iter_stage1",
      "max_iter_stage2", "mu", "tol", "trace_cap", "workers"};
  for (const auto& [key, value] : j.items()) {
    (void)value;
    if (std::find(known.begin(), known.end(), key) == known.end())
      throw std::invalid_argument("unknown config key: " + key);
  }
  if (j.contains("scenario"))
    plan.scenario = scenario_from_string(j["scenario"].get<std::string>());
  if (j.contains("profile")) {
    const auto p = j["profile"].get<std::string>();
    if (p == "ci") plan.profile = Profile::ci;
    else if (p == "paper") plan.profile = Profile::paper;
    else throw std::invalid_argument("unknown profile: " + p);
  }
  if (j.contains("seed")) plan.seed = j["seed"].get<std::uint64_t>();
  if (j.contains("out")) plan.out = j["out"].get<std::string>();
  if (j.contains("K")) plan.K = j["K"].get<int>();
  if (j.contains("N")) plan.N = j["N"].get<int>();
  if (j.contains("M")) plan.M = j["M"].get<int>();
  if (j.contains("k")) plan.k = j["k"].get<int>();
  if (j.contains("theta0_deg")) plan.theta0_deg = j["theta0_deg"].get<double>();
  if (j.contains("theta_e_deg")) plan.theta_e_deg = j["theta_e_deg"].get<double>();
  if (j.contains("params")) plan.params = params_from_json(j["params"]);
  if (j.contains("H")) plan.H = j["H"].get<long long>();
  if (j.contains("snr_db")) plan.snr_db = j["snr_db"].get<double>();
  if (j.contains("phi_known")) plan.phi_known = j["phi_known"].get<bool>();
  if (j.contains("contrast"))
    plan.contrast = contrast_from_string(j["contrast"].get<std::string>());
  if (j.contains("method"))
    plan.method = attack_method_from_string(j["method"].get<std::string>());
  if (j.contains("defense"))
    plan.defense = defense_from_string(j["defense"].get<std::string>());
  if (j.contains("dup_fraction")) plan.dup_fraction = j["dup_fraction"].get<double>();
  if (j.contains("trials")) plan.trials = j["trials"].get<int>();
  if (j.contains("H_list")) plan.H_list = j["H_list"].get<std::vector<long long>>();
  if (j.contains("snr_list")) plan.snr_list = j["snr_list"].get<std::vector<double>>();
  if (j.contains("K_list")) plan.K_list = j["K_list"].get<std::vector<int>>();
  if (j.contains("delta_tau_list"))
    plan.delta_tau_list = j["delta_tau_list"].get<std::vector<double>>();
  if (j.contains("k_list")) plan.k_list = j["k_list"].get<std::vector<int>>();
  if (j.contains("max_iter_stage1")) plan.max_iter_stage1 = j["max_iter_stage1"].get<int>();
  if (j.contains("max_iter_stage2")) plan.max_iter_stage2 = j["max_iter_stage2"].get<int>();
  if (j.contains("mu")) plan.mu = j["mu"].get<double>();
  if (j.contains("tol")) plan.tol = j["tol"].get<double>();
  if (j.contains("trace_cap")) plan.trace_cap = j["trace_cap"].get<int>();
  if (j.contains("workers")) plan.workers = j["workers"].get<int>();
  return plan;
}

ExperimentPlan load_plan(const std::string& config_path) {
  if (config_path.empty()) return {};
  std::ifstream in(config_path);
  if (!in) throw std::runtime_error("cannot open config: " + config_path);
  json j;
  in >> j;
  return plan_from_json(j);
}

// Shared generation/attack flags for simulate/attack/defend.
struct CellFlags {
  CellSpec cell;
  std::string contrast = "kurtosis";
  std::string method = "cmica+knn";
  std::string defense = "none";
  double delta_tau = -1.0;  // <0: benchmark (N-1)/N
  bool random_pattern = false;
  bool unknown_phi = false;
};

void add_cell_flags(CLI::App* cmd, CellFlags& f) {
  cmd->add_option("--K", f.cell.K, "subcarriers per frame");
  cmd->add_option("--N", f.cell.N, "antenna count");
  cmd->add_option("--M", f.cell.M, "PSK constellation order");
  cmd->add_option("--H", f.cell.H, "number of frames");
  cmd->add_option("--theta0", f.cell.theta0_deg, "legitimate direction (deg)");
  cmd->add_option("--theta", f.cell.theta_e_deg, "observation direction (deg)");
  cmd->add_option("--snr", f.cell.snr_db, "per-configuration SNR (dB)");
  cmd->add_option("--delta-tau", f.delta_tau, "ON duration (grid h/N)");
  cmd->add_flag("--random-pattern", f.random_pattern,
                "draw a random valid ON-OFF pattern instead of the ladder");
  cmd->add_option("--seed", f.cell.seed, "master seed");
}

void finish_cell(CellFlags& f) {
  if (!f.random_pattern) {
    const int h = f.delta_tau < 0.0
                      ? f.cell.N - 1
                      : static_cast<int>(std::llround(f.delta_tau * f.cell.N));
    if (h < 1 || h > f.cell.N - 1)
      throw std::invalid_argument("delta_tau must be h/N with 1 <= h <= N-1");
    f.cell.params = ladder_params(f.cell.N, h);
  }
  f.cell.contrast = contrast_from_string(f.contrast);
  f.cell.method = attack_method_from_string(f.method);
  f.cell.defense = defense_from_string(f.defense);
  f.cell.phi_known = !f.unknown_phi;
}

void emit(const std::string& out_path, const std::string& text) {
  if (out_path.empty()) {
    std::fputs(text.c_str(), stdout);
  } else {
    write_text_file(out_path, text);
    std::fprintf(stdout, "wrote %s\n", out_path.c_str());
  }
}

int run_sweep_command(ExperimentPlan plan) {
  const ExperimentOutput result = run_experiment(plan);
  emit(plan.out, result.csv);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"time-modulated-array OFDM directional modulation toolkit"};
  app.require_subcommand(1);

  // --- simulate ---
  CellFlags sim;
  std::string sim_frames_out;
  auto* simulate = app.add_subcommand(
      "simulate", "transmit frames and report the receiver BER at an angle");
  add_cell_flags(simulate, sim);
  simulate->add_option("--save-frames", sim_frames_out,
                       "write the received frames to a binary container");

  // --- attack ---
  CellFlags atk;
  std::string atk_frames_in;
  auto* attack = app.add_subcommand(
      "attack", "run the blind separation attack on generated or loaded frames");
  add_cell_flags(attack, atk);
  attack->add_option("--frames", atk_frames_in,
                     "attack frames from a binary container instead of generating");
  attack->add_option("--k", atk.cell.k, "reorder reference length");
  attack->add_option("--contrast", atk.contrast, "kurtosis|negentropy");
  attack->add_option("--method", atk.method, "cmica+knn|stage1-only|oracle");
  attack->add_flag("--unknown-phi", atk.unknown_phi,
                   "do not reveal the geometric offset to the attack");

  // --- defend ---
  CellFlags def;
  def.defense = "randomize_pattern";
  auto* defend = app.add_subcommand(
      "defend", "run the attack against a transmitter defense");
  add_cell_flags(defend, def);
  defend->add_option("--k", def.cell.k, "reorder reference length");
  defend->add_option("--contrast", def.contrast, "kurtosis|negentropy");
  defend->add_option("--defense", def.defense,
                     "randomize_pattern|duplicate_symbols");
  defend->add_option("--dup-fraction", def.cell.dup_fraction,
                     "duplicated subcarrier fraction (duplicate_symbols)");
  defend->add_flag("--unknown-phi", def.unknown_phi,
                   "do not reveal the geometric offset to the attack");

  // --- audit ---
  int audit_N = 7, audit_K = 16;
  double audit_phi = 2.0 / 7.0, audit_dt = -1.0;
  double audit_theta0 = -1.0, audit_theta_e = -1.0, audit_snr = 20.0;
  std::uint64_t audit_budget = 1'000'000;
  int audit_M = 2;
  bool audit_ambiguity = false;
  auto* audit = app.add_subcommand(
      "audit", "structural security verdicts for a configuration");
  audit->add_option("--N", audit_N, "antenna count");
  audit->add_option("--K", audit_K, "subcarriers");
  audit->add_option("--phi", audit_phi, "geometric offset cos(theta_e)-cos(theta0)");
  audit->add_option("--delta-tau", audit_dt, "ON duration (default (N-1)/N)");
  audit->add_option("--theta0", audit_theta0,
                    "legitimate direction (deg); with --theta-e, runs the rotation defense");
  audit->add_option("--theta-e", audit_theta_e, "eavesdropper direction (deg)");
  audit->add_option("--snr", audit_snr, "SNR (dB) for the legitimate-link report");
  audit->add_flag("--ambiguity-search", audit_ambiguity,
                  "exhaustive switching-pattern ambiguity search (small N, K)");
  audit->add_option("--M", audit_M, "constellation order for the search");
  audit->add_option("--budget", audit_budget, "ambiguity search budget");

  // --- sweep / table1 ---
  std::string cfg_path, profile_str, out_path, scenario_str;
  std::uint64_t seed = 0;
  bool seed_set = false, out_set = false, profile_set = false;
  int trials_override = 0, workers_override = 0;
  auto add_plan_flags = [&](CLI::App* cmd) {
    cmd->add_option("--config", cfg_path, "JSON experiment config");
    cmd->add_option("--seed", seed, "master seed")->each([&](const std::string&) { seed_set = true; });
    cmd->add_option("--out", out_path, "CSV output path (default stdout)")
        ->each([&](const std::string&) { out_set = true; });
    cmd->add_option("--profile", profile_str, "ci|paper")
        ->each([&](const std::string&) { profile_set = true; });
    cmd->add_option("--trials", trials_override, "Monte-Carlo trials per cell");
    cmd->add_option("--workers", workers_override, "parallel workers");
  };
  auto* sweep = app.add_subcommand("sweep", "declarative experiment grids (CSV)");
  sweep->add_option("--scenario", scenario_str,
                    "table1|sweep_H|trace_nongauss|sweep_k_snr|sweep_snr|"
                    "sweep_delta_tau|custom");
  add_plan_flags(sweep);
  auto* table1 = app.add_subcommand("table1", "benchmark table scenario");
  add_plan_flags(table1);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*simulate) {
      sim.method = "none";
      finish_cell(sim);
      const CellResult r = run_attack_cell(sim.cell);
      std::printf("ber_original=%.10g wall_ms=%.1f\n", r.ber_original, r.wall_ms);
      if (!sim_frames_out.empty()) {
        // Regenerate the frames deterministically for the container.
        Rng brng(derive_seed(sim.cell.seed, 1, 0)), nrng(derive_seed(sim.cell.seed, 2, 0));
        const Constellation c = make_psk(sim.cell.M);
        std::vector<int> bits(static_cast<std::size_t>(sim.cell.K) * sim.cell.H *
                              c.bits_per_symbol);
        for (auto& b : bits) b = static_cast<int>(brng.bit());
        const Geometry g = Geometry::from_degrees(sim.cell.theta0_deg, sim.cell.theta_e_deg);
        const MixingMatrix V = mixing_matrix(*sim.cell.params, sim.cell.K, g);
        const double sigma2 =
            V.matrix.squaredNorm() / (sim.cell.K * std::pow(10.0, sim.cell.snr_db / 10.0));
        const CMat Y = transmit_frames(modulate(bits, c), *sim.cell.params,
                                       sim.cell.K, g, NoiseModel{sigma2}, nrng);
        write_frames(sim_frames_out, Y);
        std::printf("wrote %s\n", sim_frames_out.c_str());
      }
      return 0;
    }

    if (*attack) {
      finish_cell(atk);
      if (!atk_frames_in.empty()) {
        const CMat Y = read_frames(atk_frames_in);
        IcaOptions io;
        io.contrast = Contrast{atk.cell.contrast};
        io.max_iter_stage1 = atk.cell.max_iter_stage1;
        io.max_iter_stage2 = atk.cell.max_iter_stage2;
        io.mu = atk.cell.mu;
        io.enable_stage2 = atk.cell.method != AttackMethod::stage1_only;
        io.record_trace = false;
        io.seed = derive_seed(atk.cell.seed, 5, 0);
        ResolverOptions ro;
        ro.k = atk.cell.k;
        ro.constellation = make_psk(atk.cell.M);
        if (!atk.unknown_phi) {
          const Geometry g =
              Geometry::from_degrees(atk.cell.theta0_deg, atk.cell.theta_e_deg);
          ro.phi_known = g.phi;
        }
        const DefyResult res = defy(Y, io, ro);
        if (res.resolved) {
          std::printf("resolved=1 est_N=%d est_delta_tau=%.10g est_phi=%.10g\n",
                      res.attack.est_N, res.attack.est_delta_tau,
                      res.attack.est_phi);
        } else {
          std::printf("resolved=0 failure_stage=%s\n", res.failure_stage.c_str());
        }
        return res.resolved ? 0 : 2;
      }
      const CellResult r = run_attack_cell(atk.cell);
      std::printf("ber_original=%.10g ber_defied=%.10g resolved=%d failure_stage=%s wall_ms=%.1f\n",
                  r.ber_original, r.ber_attack, static_cast<int>(r.resolved),
                  r.failure_stage.empty() ? "-" : r.failure_stage.c_str(), r.wall_ms);
      return 0;
    }

    if (*defend) {
      finish_cell(def);
      if (def.cell.defense == DefenseKind::none)
        throw std::invalid_argument("defend requires --defense");
      const CellResult r = run_attack_cell(def.cell);
      std::printf("ber_original=%.10g ber_defended=%.10g resolved=%d failure_stage=%s wall_ms=%.1f\n",
                  r.ber_original, r.ber_attack, static_cast<int>(r.resolved),
                  r.failure_stage.empty() ? "-" : r.failure_stage.c_str(), r.wall_ms);
      return 0;
    }

    if (*audit) {
      TmaParams p = ladder_params(
          audit_N, audit_dt < 0.0
                       ? audit_N - 1
                       : static_cast<int>(std::llround(audit_dt * audit_N)));
      const SecurityVerdict v = rank_deficiency_check(p, audit_K, audit_phi);
      std::printf("rank_deficient=%d analytic_condition=%d smallest_sv=%.6e largest_sv=%.6e\n",
                  static_cast<int>(v.rank_deficient),
                  static_cast<int>(v.analytic_predicate), v.smallest_sv, v.largest_sv);
      const MixingMatrix V =
          mixing_matrix(p, audit_K, Geometry::from_phi(audit_phi));
      std::printf("nonzero_spacing=%d\n",
                  static_cast<int>(nonzero_spacing_check(V, audit_N)));
      const double sigma2 = V.matrix.squaredNorm() /
                            (audit_K * std::pow(10.0, audit_snr / 10.0));
      const LegitSnr ls = legit_snr(audit_N, audit_K, p.delta_tau, sigma2);
      std::printf("legit_snr_db=%.4f power_efficiency=%.6f\n", ls.db, ls.efficiency);
      if (audit_theta0 >= 0.0 && audit_theta_e >= 0.0) {
        const RotationDefense rd = rotation_defense(
            deg2rad(audit_theta0), deg2rad(audit_theta_e), audit_N);
        std::printf("rotation_feasible=%d theta_r_deg=%.6f harmonic_index=%d residual=%.3e\n",
                    static_cast<int>(rd.feasible), rad2deg(rd.theta_r_rad),
                    rd.harmonic_index, rd.residual);
      }
      if (audit_ambiguity) {
        const AmbiguitySearchResult amb = find_ambiguous_patterns(
            audit_N, audit_K, audit_phi, make_psk(audit_M), audit_budget);
        std::printf("ambiguous_groups=%zu enumerated=%llu budget_exceeded=%d\n",
                    amb.groups.size(),
                    static_cast<unsigned long long>(amb.enumerated),
                    static_cast<int>(amb.budget_exceeded));
      }
      return 0;
    }

    if (*sweep || *table1) {
      ExperimentPlan plan = load_plan(cfg_path);
      if (*table1) plan.scenario = Scenario::table1;
      if (!scenario_str.empty()) plan.scenario = scenario_from_string(scenario_str);
      if (seed_set) plan.seed = seed;
      if (out_set) plan.out = out_path;
      if (profile_set) {
        if (profile_str == "ci") plan.profile = Profile::ci;
        else if (profile_str == "paper") plan.profile = Profile::paper;
        else throw std::invalid_argument("unknown profile: " + profile_str);
      }
      if (trials_override > 0) plan.trials = trials_override;
      if (workers_override > 0) plan.workers = workers_override;
      return run_sweep_command(std::move(plan));
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
