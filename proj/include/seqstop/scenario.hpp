#pragma once

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "seqstop/bernoulli.hpp"
#include "seqstop/calibrate.hpp"
#include "seqstop/model.hpp"
#include "seqstop/simulate.hpp"
#include "seqstop/solver.hpp"

namespace seqstop {

struct BernoulliBlock {
  double theta0 = 0.5;
  double nu2 = 0.0;  // 0 -> varrho0 / (2 sigma^2), consistent with the prior
  double xi = 0.0;   // 0 -> 0.05 sigma
  double T = std::numeric_limits<double>::infinity();
  std::vector<long> n_list = {50, 100, 200, 400};
  long reps = 10000;
};

struct SweepBlock {
  std::string kind = "V0-multiple";
  // multiples above ~1.0496 are unattainable at rho_max = 0.999*varrho0:
  // never stopping is already optimal for S_alpha, giving sqrt(0.999) of the
  // full-information value
  std::vector<double> values = {1.0, 1.01, 1.02, 1.03, 1.04};
};

struct Scenario {
  std::string name;
  PriorSpec prior;
  UtilitySpec util;
  CostSpec cost;
  GridSpec grid;  // delta_rho == 0 -> default_grid(prior)
  SimConfig simcfg;
  std::string v0_mode = "multiple";  // "multiple" of V0* or "absolute"
  double v0 = 1.0;
  BernoulliBlock bernoulli;
  SweepBlock sweep;
};

inline bool scenario_name_ok(const std::string& name) {
  if (name.empty()) return false;
  for (char ch : name) {
    const bool ok = (ch >= 'a' && ch <= 'z') || (ch >= 'A' && ch <= 'Z') ||
                    (ch >= '0' && ch <= '9') || ch == '.' || ch == '_' ||
                    ch == '-';
    if (!ok) return false;
  }
  return true;
}

// fill derived defaults and validate everything a command will touch
inline Scenario finalize(Scenario s) {
  if (!scenario_name_ok(s.name))
    throw std::invalid_argument(
        "scenario: name must be non-empty and use only [A-Za-z0-9._-]: '" +
        s.name + "'");
  validate(s.prior);
  validate(s.util);
  validate(s.cost);
  if (s.grid.delta_rho == 0.0)
    s.grid = default_grid(s.prior);
  else
    s.grid = make_grid(s.grid.delta_rho, s.grid.m_bar, s.grid.rho_max);
  s.simcfg = fill_defaults(s.simcfg, s.prior);
  if (s.v0_mode != "multiple" && s.v0_mode != "absolute")
    throw std::invalid_argument("scenario: v0_mode must be multiple|absolute");
  if (!std::isfinite(s.v0))
    throw std::invalid_argument("scenario: v0 must be finite");
  const double sig = 2.0 * std::sqrt(s.bernoulli.theta0 *
                                     (1.0 - s.bernoulli.theta0));
  if (s.bernoulli.nu2 == 0.0)
    s.bernoulli.nu2 = s.prior.varrho0 / (2.0 * sig * sig);
  if (s.bernoulli.xi == 0.0) s.bernoulli.xi = 0.05 * s.prior.sigma();
  TrialConfig probe;
  probe.n = s.bernoulli.n_list.empty() ? 1 : s.bernoulli.n_list.front();
  probe.theta0 = s.bernoulli.theta0;
  probe.nu2 = s.bernoulli.nu2;
  probe.xi = s.bernoulli.xi;
  probe.T = s.bernoulli.T;
  validate(probe);
  parse_sweep_kind(s.sweep.kind);
  return s;
}

inline double scenario_target_v0(const Scenario& s) {
  return resolve_v0(s.v0_mode, s.v0, s.prior, s.util.alpha);
}

inline TrialConfig scenario_trial_config(const Scenario& s, long n) {
  TrialConfig cfg;
  cfg.n = n;
  cfg.theta0 = s.bernoulli.theta0;
  cfg.nu2 = s.bernoulli.nu2;
  cfg.xi = s.bernoulli.xi;
  cfg.T = s.bernoulli.T;
  cfg.seed = s.simcfg.seed;
  return cfg;
}

// 2025 drug-trial parameterization: per-observation cost 41k$, approval
// benefit 46.3M$, n = 300, varrho0 = 9.7344
inline Scenario scenario_baseline_2025() {
  Scenario s;
  s.name = "baseline-2025";
  s.prior.m0 = 0.0;
  s.prior.varrho0 = 9.7344;
  s.prior.sigma1 = 0.5;
  s.prior.sigma0 = 0.5;
  CostSpec::Structural st;
  st.C_n = 41000.0;
  st.B_n = 46.3e6;
  st.gamma_n = 0.0;
  st.n = 300;
  st.varrho_0n = 9.7344 / std::sqrt(300.0);
  const ScaledParams sp = scale_params(st);
  s.cost.c = sp.c;
  s.cost.structural = st;
  s.util.B = sp.B;
  s.util.gamma = sp.gamma;
  return finalize(std::move(s));
}

// same trial, benefit recalibrated to an approval-market estimate
inline Scenario scenario_approval_only() {
  Scenario s = scenario_baseline_2025();
  s.name = "approval-only";
  s.cost.structural->B_n = 802e6;
  const ScaledParams sp = scale_params(*s.cost.structural);
  s.cost.c = sp.c;
  s.util.B = sp.B;
  s.util.gamma = sp.gamma;
  return finalize(std::move(s));
}

// designer maximizes the planner's welfare net of sampling costs; no
// approval payoff, so stopping is symmetric in m
inline Scenario scenario_welfare_only() {
  Scenario s = scenario_baseline_2025();
  s.name = "welfare-only";
  s.cost.c = 7.980;
  s.cost.structural.reset();
  s.util.B = 0.0;
  s.util.gamma = 1.0;
  return finalize(std::move(s));
}

inline const std::vector<std::string>& builtin_scenario_names() {
  static const std::vector<std::string> names = {"baseline-2025",
                                                 "approval-only",
                                                 "welfare-only"};
  return names;
}

inline Scenario builtin_scenario(const std::string& name) {
  if (name == "baseline-2025") return scenario_baseline_2025();
  if (name == "approval-only") return scenario_approval_only();
  if (name == "welfare-only") return scenario_welfare_only();
  throw std::invalid_argument("unknown built-in scenario: " + name +
                              " (have baseline-2025, approval-only, "
                              "welfare-only)");
}

}  // namespace seqstop
