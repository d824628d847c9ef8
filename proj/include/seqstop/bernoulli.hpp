#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "seqstop/math.hpp"
#include "seqstop/model.hpp"
#include "seqstop/rng.hpp"
#include "seqstop/simulate.hpp"
#include "seqstop/solver.hpp"

namespace seqstop {

// Discrete-time Bernoulli trial run against continuous-limit boundaries.
// Outcomes Y ~ Bernoulli(theta_a) with theta_a ~ N(theta0, sigma^2 nu^2 / n);
// the scaled effect sqrt(n)(theta1 - theta0) then has prior variance
// 2 sigma^2 nu^2, which must match the varrho0 the boundaries were solved at.

struct TrialConfig {
  long n = 300;
  double theta0 = 0.5;
  double nu2 = 0.0;
  double xi = 0.0;  // 0 -> 0.05 * sigma
  double T = std::numeric_limits<double>::infinity();
  std::uint64_t seed = 20250822;
  bool forced_exploration = false;
  bool record_path = true;
};

struct TrialState {
  long q1 = 0, q0 = 0;  // observation counts per arm
  double x1 = 0.0, x0 = 0.0;  // normalized score processes
};

struct TrialRun {
  long tau_index = 0;
  double tau = 0.0;  // tau_index / n, time units
  int decision = 0;
  std::vector<double> m_path;
  long q1_count = 0, q0_count = 0;
  double theta1 = 0.0, theta0_arm = 0.0;
  int clamped = 0;  // prior draws pulled back into (eps, 1-eps)
  bool hit_cap = false;
};

inline void validate(const TrialConfig& cfg) {
  if (cfg.n < 1) throw std::invalid_argument("trial: n must be >= 1");
  if (!(cfg.theta0 > 0.0 && cfg.theta0 < 1.0))
    throw std::invalid_argument("trial: theta0 must lie in (0,1)");
  if (!(cfg.nu2 > 0.0)) throw std::invalid_argument("trial: nu2 must be > 0");
  if (cfg.xi < 0.0) throw std::invalid_argument("trial: xi must be >= 0");
  if (!(cfg.T > 0.0)) throw std::invalid_argument("trial: T must be > 0");
}

inline double bernoulli_sigma_arm(const TrialConfig& cfg) {
  return std::sqrt(cfg.theta0 * (1.0 - cfg.theta0));
}

inline TrialState score_update(TrialState state, int arm, int outcome,
                               const TrialConfig& cfg) {
  if (outcome != 0 && outcome != 1)
    throw std::invalid_argument("score_update: outcome must be 0 or 1");
  if (arm != 0 && arm != 1)
    throw std::invalid_argument("score_update: arm must be 0 or 1");
  const double step = (static_cast<double>(outcome) - cfg.theta0) /
                      std::sqrt(static_cast<double>(cfg.n) * cfg.theta0 *
                                (1.0 - cfg.theta0));
  if (arm == 1) {
    state.q1 += 1;
    state.x1 += step;
  } else {
    state.q0 += 1;
    state.x0 += step;
  }
  return state;
}

// finite-n posterior mean of the scaled effect, conjugate normal update with
// per-arm prior N(+-m0/2, sigma^2 nu^2) on sqrt(n)(theta_a - theta0)
inline double posterior_mean_n(const TrialState& state, const PriorSpec& prior,
                               const TrialConfig& cfg) {
  const double sa = bernoulli_sigma_arm(cfg);
  const double sig2 = 4.0 * sa * sa;  // (sigma1 + sigma0)^2
  const double prior_var = sig2 * cfg.nu2;
  const double prior_prec = 1.0 / prior_var;
  const double obs_prec = 1.0 / (sa * sa);
  const double n = static_cast<double>(cfg.n);

  const double z1 = sa * state.x1;  // sum(Y - theta0)/sqrt(n), arm 1
  const double z0 = sa * state.x0;
  const double q1 = static_cast<double>(state.q1) / n;
  const double q0 = static_cast<double>(state.q0) / n;

  const double mu1 = (obs_prec * z1 + prior_prec * (0.5 * prior.m0)) /
                     (obs_prec * q1 + prior_prec);
  const double mu0 = (obs_prec * z0 + prior_prec * (-0.5 * prior.m0)) /
                     (obs_prec * q0 + prior_prec);
  return mu1 - mu0;
}

namespace detail {

inline void check_trial_prior(const PriorSpec& prior, const TrialConfig& cfg) {
  if (prior.cov)
    throw std::invalid_argument(
        "trial: correlated priors have no Bernoulli analogue here");
  const double sa = bernoulli_sigma_arm(cfg);
  if (std::fabs(prior.sigma1 - sa) > 1e-9 * sa ||
      std::fabs(prior.sigma0 - sa) > 1e-9 * sa)
    throw std::invalid_argument(
        "trial: prior sigmas must equal sqrt(theta0(1-theta0)) = " +
        std::to_string(sa));
  const double implied = 2.0 * (2.0 * sa) * (2.0 * sa) * cfg.nu2;
  if (std::fabs(prior.varrho0 - implied) > 1e-6 * implied)
    throw std::invalid_argument(
        "trial: varrho0 inconsistent with nu2; expect 2 sigma^2 nu^2 = " +
        std::to_string(implied));
}

}  // namespace detail

inline TrialRun run_trial(const BoundarySolution& sol, const PriorSpec& prior,
                          const UtilitySpec& util, const TrialConfig& cfg,
                          std::uint64_t stream = 0) {
  (void)util;
  validate(prior);
  validate(cfg);
  detail::check_trial_prior(prior, cfg);
  detail::check_sol_prior(sol, prior);

  const double sa = bernoulli_sigma_arm(cfg);
  const double sigma = 2.0 * sa;
  const double xi = cfg.xi > 0.0 ? cfg.xi : 0.05 * sigma;
  const double n = static_cast<double>(cfg.n);
  const double t_cap = std::min(cfg.T, sol.horizon());
  const long max_obs =
      static_cast<long>(std::ceil(t_cap * n - 1e-9));

  RandomStream rng(cfg.seed, stream);
  TrialRun run;

  constexpr double kEps = 1e-6;
  const double theta_sd = sigma * std::sqrt(cfg.nu2 / n);
  auto draw_theta = [&]() {
    double th = cfg.theta0 + theta_sd * rng.normal();
    if (th <= kEps || th >= 1.0 - kEps) {
      run.clamped += 1;
      th = std::clamp(th, kEps, 1.0 - kEps);
    }
    return th;
  };
  run.theta1 = draw_theta();
  run.theta0_arm = draw_theta();

  TrialState st;
  double m = prior.m0;
  long j = 0;
  // exploration burn-in would force pi = 1/2 for the first ceil(sqrt(n))
  // observations, but the Neyman fraction is already sigma1/(sigma1+sigma0)
  // = 1/2 here, so the rule below covers both modes unchanged
  const double neyman = sa / (sa + sa);
  for (;;) {
    const double t = static_cast<double>(j) / n;
    m = posterior_mean_n(st, prior, cfg);
    if (cfg.record_path) run.m_path.push_back(m);
    if (m >= sol.b_plus_at_t(t) + xi || m <= sol.b_minus_at_t(t)) break;
    if (j >= max_obs) {
      run.hit_cap = true;
      break;
    }
    const int arm =
        static_cast<double>(st.q1) <= neyman * static_cast<double>(j) ? 1 : 0;
    const double theta = arm == 1 ? run.theta1 : run.theta0_arm;
    const int outcome = rng.unit() < theta ? 1 : 0;
    st = score_update(st, arm, outcome, cfg);
    ++j;
  }

  run.tau_index = j;
  run.tau = static_cast<double>(j) / n;
  run.decision = m >= 0.0 ? 1 : 0;
  run.q1_count = st.q1;
  run.q0_count = st.q0;
  return run;
}

struct Benchmarks {
  double v0_alice = 0.0;  // Alice welfare target / continuous-limit value
  double bob_limit = 0.0;  // Bob welfare in the limit experiment
};

struct ConvergencePoint {
  long n = 0;
  double alice_welfare = 0.0, alice_se = 0.0, alice_ratio = 0.0;
  double bob_welfare = 0.0, bob_se = 0.0, bob_ratio = 0.0;
  double mean_tau = 0.0;
  double approval_rate = 0.0;
  double clamp_frac = 0.0;
};

struct ConvergenceTable {
  Benchmarks benchmarks;
  long reps = 0;
  std::uint64_t seed = 0;
  std::vector<ConvergencePoint> points;
};

inline Benchmarks make_benchmarks(const BoundarySolution& sol,
                                  const PriorSpec& prior,
                                  const UtilitySpec& util,
                                  const CostSpec& cost, long n_paths,
                                  std::uint64_t seed) {
  SimConfig cfg;
  cfg.n_paths = n_paths;
  cfg.seed = seed;
  const SimResult sim = simulate(sol, prior, util, cost, cfg);
  return Benchmarks{sim.welfare_alice.value, sim.welfare_bob.value};
}

inline ConvergenceTable welfare_convergence(
    const BoundarySolution& sol, const PriorSpec& prior,
    const UtilitySpec& util, const CostSpec& cost,
    const std::vector<long>& n_list, long reps, std::uint64_t seed,
    const TrialConfig& base_cfg,
    std::optional<Benchmarks> benchmarks = std::nullopt) {
  if (n_list.empty())
    throw std::invalid_argument("welfare_convergence: empty n list");
  if (!std::is_sorted(n_list.begin(), n_list.end()))
    throw std::invalid_argument("welfare_convergence: n list must ascend");
  if (reps < 1000)
    throw std::invalid_argument("welfare_convergence: reps must be >= 1000");
  validate(cost);

  ConvergenceTable table;
  table.benchmarks = benchmarks
                         ? *benchmarks
                         : make_benchmarks(sol, prior, util, cost,
                                           std::max(reps, 100000L), seed);
  table.reps = reps;
  table.seed = seed;

  std::vector<double> alice(static_cast<std::size_t>(reps));
  std::vector<double> bob(static_cast<std::size_t>(reps));
  std::vector<double> tau(static_cast<std::size_t>(reps));
  for (std::size_t ni = 0; ni < n_list.size(); ++ni) {
    TrialConfig cfg = base_cfg;
    cfg.n = n_list[ni];
    cfg.seed = seed;
    cfg.record_path = false;
    long approvals = 0, clamps = 0;
    for (long rep = 0; rep < reps; ++rep) {
      const std::uint64_t stream =
          static_cast<std::uint64_t>(ni) * static_cast<std::uint64_t>(reps) +
          static_cast<std::uint64_t>(rep);
      const TrialRun run = run_trial(sol, prior, util, cfg, stream);
      const double x = std::sqrt(static_cast<double>(cfg.n)) *
                       (run.theta1 - run.theta0_arm);
      const double ua = run.decision == 1 ? util.alpha * x
                                          : -(1.0 - util.alpha) * x;
      const double ub = run.decision == 1
                            ? util.alpha_prime * x
                            : -(1.0 - util.alpha_prime) * x;
      alice[static_cast<std::size_t>(rep)] = ua;
      bob[static_cast<std::size_t>(rep)] =
          (run.decision == 1 ? util.B : 0.0) + util.gamma * ub -
          cost.c * run.tau;
      tau[static_cast<std::size_t>(rep)] = run.tau;
      approvals += run.decision;
      clamps += run.clamped;
    }
    const MeanSe ma = mean_se(alice);
    const MeanSe mb = mean_se(bob);
    ConvergencePoint pt;
    pt.n = cfg.n;
    pt.alice_welfare = ma.mean;
    pt.alice_se = ma.se;
    pt.alice_ratio = ma.mean / table.benchmarks.v0_alice;
    pt.bob_welfare = mb.mean;
    pt.bob_se = mb.se;
    pt.bob_ratio = mb.mean / table.benchmarks.bob_limit;
    pt.mean_tau = mean_se(tau).mean;
    pt.approval_rate =
        static_cast<double>(approvals) / static_cast<double>(reps);
    pt.clamp_frac = static_cast<double>(clamps) /
                    (2.0 * static_cast<double>(reps));
    table.points.push_back(pt);
  }
  return table;
}

}  // namespace seqstop
