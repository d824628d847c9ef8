// seqstop: solve, calibrate, and simulate welfare-constrained sequential
// trial designs, and check them against a discrete Bernoulli trial.

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "seqstop/seqstop.hpp"

namespace fs = std::filesystem;
using namespace seqstop;

namespace {

struct GlobalArgs {
  std::string scenario = "baseline-2025";
  std::string out;  // default: out/<scenario-name>
  std::optional<std::uint64_t> seed;
  std::optional<long> paths;
  bool quiet = false;
};

struct Printer {
  bool quiet;
  template <typename... Args>
  void operator()(const char* fmt, Args... args) const {
    if (quiet) return;
    std::printf(fmt, args...);
    std::printf("\n");
  }
};

Scenario load(const GlobalArgs& g, fs::path& out_dir) {
  Scenario s = load_scenario(g.scenario);
  if (g.seed) s.simcfg.seed = *g.seed;
  if (g.paths) s.simcfg.n_paths = *g.paths;
  s = finalize(std::move(s));
  out_dir = g.out.empty() ? fs::path("out") / s.name : fs::path(g.out);
  return s;
}

json scenario_meta(const Scenario& s) {
  json meta = json(s);
  if (s.cost.structural)
    meta["scaled_params"] = json(scale_params(*s.cost.structural));
  meta["v0_target"] = scenario_target_v0(s);
  meta["rct"] = json{{"v0_star", rct_welfare(s.prior.m0, s.prior, s.util.alpha)}};
  return meta;
}

int cmd_rct_baseline(const GlobalArgs& g) {
  fs::path out;
  const Scenario s = load(g, out);
  const Printer say{g.quiet};
  const double v0 = rct_welfare(s.prior.m0, s.prior, s.util.alpha);
  const double sig = s.prior.sigma();
  const double nu2 = s.prior.varrho0 / (1.0 + sig * sig / s.prior.varrho0);
  json j{{"scenario", s.name},
         {"m0", s.prior.m0},
         {"varrho0", s.prior.varrho0},
         {"sigma", sig},
         {"nu", std::sqrt(nu2)},
         {"v0_star", v0}};
  write_json(out / "rct_baseline.json", j);
  say("rct baseline for %s: V0* = %.6f (nu = %.6f)", s.name.c_str(), v0,
      std::sqrt(nu2));
  say("wrote %s", (out / "rct_baseline.json").string().c_str());
  return 0;
}

int cmd_solve(const GlobalArgs& g, double lambda) {
  fs::path out;
  const Scenario s = load(g, out);
  const Printer say{g.quiet};
  BoundarySolution sol =
      solve_boundaries(s.prior, s.util, lambda, s.cost, s.grid);
  atomic_write(out / "boundaries.csv", boundaries_csv(sol));
  json meta{{"scenario", scenario_meta(s)}, {"sol", json(sol)}};
  meta["sol"].erase("rho_grid");
  meta["sol"].erase("t_grid");
  meta["sol"].erase("b_plus");
  meta["sol"].erase("b_minus");
  write_json(out / "boundaries_meta.json", meta);
  say("lambda = %g  t_star = %g", lambda, sol.t_star);
  say("%-6s %-12s %-12s", "t", "b_plus", "b_minus");
  for (double t : {0.0, 0.5, 1.0})
    say("%-6.2f %-12.6f %-12.6f", t, sol.b_plus_at_t(t), sol.b_minus_at_t(t));
  say("wrote %s", (out / "boundaries.csv").string().c_str());
  return 0;
}

CalibrationResult run_calibration(const Scenario& s, const fs::path& out,
                                  const Printer& say) {
  const double target = scenario_target_v0(s);
  say("calibrating %s: target V0 = %.6f (%s %g)", s.name.c_str(), target,
      s.v0_mode.c_str(), s.v0);
  CalibrationResult cal =
      calibrate_lambda(target, s.prior, s.util, s.cost, s.grid, s.simcfg);
  json j = json(cal);
  j["scenario"] = scenario_meta(s);
  write_json(out / "calibration.json", j);
  atomic_write(out / "boundaries.csv", boundaries_csv(cal.sol));
  say("lambda_star = %.8f after %d oracle calls", cal.lambda_star,
      cal.iterations);
  say("achieved welfare = %.6f (target %.6f, tol %.2e)", cal.achieved_welfare,
      cal.target_v0, cal.tol_w);
  say("wrote %s", (out / "calibration.json").string().c_str());
  return cal;
}

// simulate and bernoulli reuse the calibration cached in --out, if any
CalibrationResult load_or_calibrate(const Scenario& s, const fs::path& out,
                                    const Printer& say) {
  const fs::path cache = out / "calibration.json";
  if (fs::exists(cache)) {
    CalibrationResult cal = read_json(cache).get<CalibrationResult>();
    say("using cached calibration %s (lambda_star = %.8f)",
        cache.string().c_str(), cal.lambda_star);
    return cal;
  }
  say("notice: no calibration in %s, calibrating first", out.string().c_str());
  return run_calibration(s, out, say);
}

int cmd_calibrate(const GlobalArgs& g) {
  fs::path out;
  const Scenario s = load(g, out);
  run_calibration(s, out, Printer{g.quiet});
  return 0;
}

int cmd_simulate(const GlobalArgs& g) {
  fs::path out;
  const Scenario s = load(g, out);
  const Printer say{g.quiet};
  const CalibrationResult cal = load_or_calibrate(s, out, say);
  const SimResult sim = simulate(cal.sol, s.prior, s.util, s.cost, s.simcfg);
  const RctComparison rct = rct_compare(sim, s.prior, s.util, s.cost);
  json j = json(sim);
  j["scenario"] = s.name;
  j["lambda_star"] = cal.lambda_star;
  write_json(out / "simulation.json", j);
  atomic_write(out / "hist_tau.csv", histogram_csv(sim.hist_tau));
  atomic_write(out / "hist_m_tau.csv", histogram_csv(sim.hist_m_tau));
  write_json(out / "rct_compare.json", json(rct));
  say("paths = %ld  seed = %llu", sim.n_paths,
      static_cast<unsigned long long>(sim.seed));
  say("mean_tau = %.4f +- %.4f   median_tau = %.4f", sim.mean_tau.value,
      sim.mean_tau.se, sim.median_tau.value);
  say("welfare_alice = %.6f +- %.6f   welfare_bob = %.6f",
      sim.welfare_alice.value, sim.welfare_alice.se, sim.welfare_bob.value);
  say("approval_rate = %.4f   welfare vs RCT = %+.2f%%", sim.approval_rate.value,
      100.0 * (rct.welfare_ratio - 1.0));
  if (rct.has_savings)
    say("expected sampling-cost savings vs unit-time RCT = $%.0f", rct.savings);
  say("wrote %s", (out / "simulation.json").string().c_str());
  return 0;
}

int cmd_sweep(const GlobalArgs& g, const std::string& kind_arg,
              const std::vector<double>& values_arg) {
  fs::path out;
  const Scenario s = load(g, out);
  const Printer say{g.quiet};
  const SweepKind kind =
      parse_sweep_kind(kind_arg.empty() ? s.sweep.kind : kind_arg);
  const std::vector<double>& values =
      values_arg.empty() ? s.sweep.values : values_arg;
  say("sweep %s over %zu values", sweep_kind_name(kind).c_str(),
      values.size());
  const SweepResult res =
      sweep(kind, values, s.prior, s.util, s.cost, s.grid, s.simcfg,
            s.v0_mode, s.v0);
  atomic_write(out / "sweep.csv", sweep_csv(res));
  json rows = json::array();
  for (const SweepRow& r : res.rows) rows.push_back(json(r));
  write_json(out / "sweep.json",
             json{{"scenario", s.name},
                  {"kind", sweep_kind_name(kind)},
                  {"rows", rows}});
  for (std::size_t i = 0; i < res.calibrations.size(); ++i) {
    char name[64];
    std::snprintf(name, sizeof(name), "sweep_boundaries_%g.csv",
                  res.rows[i].value);
    atomic_write(out / name, boundaries_csv(res.calibrations[i].sol));
  }
  for (const SweepRow& r : res.rows)
    say("  value %-8g lambda* %-12.6f mean_tau %-8.4f welfare %.6f", r.value,
        r.lambda_star, r.mean_tau, r.welfare);
  say("wrote %s", (out / "sweep.csv").string().c_str());
  return 0;
}

int cmd_bernoulli(const GlobalArgs& g, std::vector<long> n_list, long reps) {
  fs::path out;
  const Scenario s = load(g, out);
  const Printer say{g.quiet};
  if (n_list.empty()) n_list = s.bernoulli.n_list;
  if (reps == 0) reps = s.bernoulli.reps;
  if (reps < 100)
    throw std::invalid_argument(
        "bernoulli: fewer than 100 reps is statistically meaningless");
  const CalibrationResult cal = load_or_calibrate(s, out, say);
  const Benchmarks bench{cal.target_v0, cal.final_sim.welfare_bob.value};
  const TrialConfig base = scenario_trial_config(s, n_list.front());
  say("running %ld reps per n, n in {%s}", reps, [&] {
    std::string acc;
    for (long n : n_list) acc += (acc.empty() ? "" : ", ") + std::to_string(n);
    return acc;
  }().c_str());
  const ConvergenceTable table =
      welfare_convergence(cal.sol, s.prior, s.util, s.cost, n_list, reps,
                          s.simcfg.seed, base, bench);
  atomic_write(out / "convergence.csv", convergence_csv(table));
  write_json(out / "convergence.json", json(table));
  for (const ConvergencePoint& p : table.points)
    say("  n %-6ld alice_ratio %-8.4f bob_ratio %-8.4f mean_tau %.4f", p.n,
        p.alice_ratio, p.bob_ratio, p.mean_tau);
  say("wrote %s", (out / "convergence.csv").string().c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"welfare-constrained sequential trial designs"};
  app.fallthrough();
  app.require_subcommand(1);

  GlobalArgs g;
  app.add_option("--scenario", g.scenario,
                 "built-in name (baseline-2025 | approval-only | "
                 "welfare-only) or a JSON scenario file");
  app.add_option("--out", g.out, "output directory (default out/<scenario>)");
  app.add_option("--seed", g.seed, "override simulation seed");
  app.add_option("--paths", g.paths, "override simulation path count");
  app.add_flag("--quiet", g.quiet, "suppress stdout (files still written)");

  double lambda = 0.0;
  CLI::App* solve =
      app.add_subcommand("solve", "solve stopping boundaries at a given lambda");
  solve->add_option("--lambda", lambda, "welfare multiplier")->required();

  app.add_subcommand("calibrate",
                     "find lambda* meeting the scenario's welfare target");
  app.add_subcommand("simulate",
                     "simulate the calibrated design and compare to the RCT");

  std::string sweep_kind;
  std::vector<double> sweep_values;
  CLI::App* sw = app.add_subcommand(
      "sweep", "recalibrate across V0 multiples, B values, or nu0 values");
  sw->add_option("--kind", sweep_kind, "V0-multiple | B | nu0");
  sw->add_option("--values", sweep_values, "sweep points")->delimiter(',');

  std::vector<long> n_list;
  long reps = 0;
  CLI::App* bern = app.add_subcommand(
      "bernoulli", "finite-sample welfare convergence under Bernoulli outcomes");
  bern->add_option("--n-list", n_list, "trial sizes")->delimiter(',');
  bern->add_option("--reps", reps, "replications per n");

  app.add_subcommand("rct-baseline",
                     "welfare of the unit-time randomized benchmark");

  CLI11_PARSE(app, argc, argv);

  try {
    if (solve->parsed()) return cmd_solve(g, lambda);
    if (app.got_subcommand("calibrate")) return cmd_calibrate(g);
    if (app.got_subcommand("simulate")) return cmd_simulate(g);
    if (sw->parsed()) return cmd_sweep(g, sweep_kind, sweep_values);
    if (bern->parsed()) return cmd_bernoulli(g, n_list, reps);
    if (app.got_subcommand("rct-baseline")) return cmd_rct_baseline(g);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  std::cerr << "error: no subcommand\n";
  return 1;
}
