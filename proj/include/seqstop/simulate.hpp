#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <utility>
#include <vector>

#include "seqstop/math.hpp"
#include "seqstop/model.hpp"
#include "seqstop/rng.hpp"
#include "seqstop/solver.hpp"

namespace seqstop {

struct SimConfig {
  long n_paths = 1000000;
  uint64_t seed = 20250822;
  double rho_step = 0.0;  // 0 means varrho0/20000
  double xi = 0.0;        // upper-boundary inflation
};

struct Est {
  double value = 0.0;
  double se = 0.0;
};

struct Histogram {
  double lo = 0.0;
  double hi = 0.0;
  std::vector<long> counts;  // 200 uniform bins
};

inline Histogram make_histogram(const std::vector<double>& x, double lo,
                                double hi, int bins = 200) {
  Histogram h;
  h.lo = lo;
  h.hi = hi;
  h.counts.assign(bins, 0);
  const double w = (hi > lo) ? (hi - lo) / bins : 1.0;
  for (double v : x) {
    int k = int((v - lo) / w);
    if (k < 0) k = 0;
    if (k >= bins) k = bins - 1;
    ++h.counts[std::size_t(k)];
  }
  return h;
}

struct SimResult {
  long n_paths = 0;
  uint64_t seed = 0;
  double rho_step = 0.0;
  double xi = 0.0;
  Est mean_tau, median_tau;
  Est welfare_alice, welfare_bob;
  Est approval_rate;
  Est mean_m_tau;
  std::vector<std::pair<double, Est>> frac_stop_before;
  Histogram hist_tau, hist_m_tau;
};

namespace detail {

inline void check_sol_prior(const BoundarySolution& sol, const PriorSpec& prior) {
  const PriorSpec& sp = sol.prior;
  const bool cov_mismatch =
      sp.cov.has_value() != prior.cov.has_value() ||
      (sp.cov && (sp.cov->s11 != prior.cov->s11 || sp.cov->s00 != prior.cov->s00 ||
                  sp.cov->s01 != prior.cov->s01));
  if (std::fabs(sp.varrho0 - prior.varrho0) > 1e-9 * prior.varrho0 ||
      std::fabs(sp.sigma1 - prior.sigma1) > 1e-12 ||
      std::fabs(sp.sigma0 - prior.sigma0) > 1e-12 || cov_mismatch)
    throw std::invalid_argument(
        "simulate: solution was computed under a different prior "
        "(varrho0/sigma/cov mismatch)");
}

// Precomputed per-step exit bounds; the inner loop touches nothing else.
struct ExitEngine {
  double h = 0.0;       // rho step
  double s = 0.0;       // sqrt(h), increment scale
  long K = 0;           // number of monitored steps
  std::vector<double> bd;  // interleaved: bd[2i] upper, bd[2i+1] lower
  PriorSpec prior;

  static ExitEngine build(const BoundarySolution& sol, const PriorSpec& prior,
                          const SimConfig& cfg) {
    ExitEngine e;
    e.prior = prior;
    e.h = cfg.rho_step;
    e.s = std::sqrt(e.h);
    e.K = long(std::floor(sol.rho_last() / e.h + 1e-9));
    if (e.K < 1) throw std::invalid_argument("simulate: rho_step exceeds grid");
    e.bd.resize(std::size_t(2 * e.K));
    for (long i = 0; i < e.K; ++i) {
      const double rho = double(i + 1) * e.h;
      e.bd[std::size_t(2 * i)] = sol.b_plus_at_rho(rho) + cfg.xi;
      e.bd[std::size_t(2 * i) + 1] = sol.b_minus_at_rho(rho);
    }
    return e;
  }

  // first exit (or forced stop at the cap) for one path
  void run_path(uint64_t seed, uint64_t path, double& tau, double& m_exit) const {
    RandomStream rs(seed, path);
    double m = prior.m0;
    const double* b = bd.data();
    long i = 0;
    for (; i < K; ++i) {
      m += s * rs.normal();
      if (m >= b[2 * i] || m <= b[2 * i + 1]) break;
    }
    const long stop = std::min(i, K - 1);
    tau = time_change_inverse(double(stop + 1) * h, prior);
    m_exit = m;
  }

  void run_all(uint64_t seed, long n_paths, std::vector<double>& tau,
               std::vector<double>& m) const {
    tau.resize(std::size_t(n_paths));
    m.resize(std::size_t(n_paths));
    for (long p = 0; p < n_paths; ++p)
      run_path(seed, uint64_t(p), tau[std::size_t(p)], m[std::size_t(p)]);
  }
};

inline void check_sim_config(const SimConfig& cfg, const PriorSpec& prior) {
  if (cfg.n_paths < 1)
    throw std::invalid_argument("SimConfig: n_paths must be at least 1");
  if (!(cfg.rho_step > 0.0) || cfg.rho_step > prior.varrho0 / 100.0)
    throw std::invalid_argument(
        "SimConfig: rho_step must lie in (0, varrho0/100]");
  if (!(cfg.xi >= 0.0))
    throw std::invalid_argument("SimConfig: xi must be nonnegative");
}

}  // namespace detail

inline SimConfig fill_defaults(SimConfig cfg, const PriorSpec& prior) {
  if (cfg.rho_step == 0.0) cfg.rho_step = prior.varrho0 / 20000.0;
  return cfg;
}

// Calibration oracle: planner welfare only, same path dynamics and the same
// aggregation arithmetic as the full simulator.
inline MeanSe sim_alice_welfare(const BoundarySolution& sol,
                                const PriorSpec& prior, double alpha,
                                const SimConfig& cfg_in) {
  detail::check_sol_prior(sol, prior);
  const SimConfig cfg = fill_defaults(cfg_in, prior);
  detail::check_sim_config(cfg, prior);
  const auto eng = detail::ExitEngine::build(sol, prior, cfg);
  std::vector<double> tau, m;
  eng.run_all(cfg.seed, cfg.n_paths, tau, m);
  for (double& v : m) v = s_alpha(v, alpha);
  return mean_se(m);
}

inline SimResult simulate(const BoundarySolution& sol, const PriorSpec& prior,
                          const UtilitySpec& util, const CostSpec& cost,
                          const SimConfig& cfg_in) {
  detail::check_sol_prior(sol, prior);
  validate(util);
  validate(cost);
  const SimConfig cfg = fill_defaults(cfg_in, prior);
  detail::check_sim_config(cfg, prior);

  const auto eng = detail::ExitEngine::build(sol, prior, cfg);
  std::vector<double> tau, m;
  eng.run_all(cfg.seed, cfg.n_paths, tau, m);
  const std::size_t N = tau.size();

  SimResult r;
  r.n_paths = cfg.n_paths;
  r.seed = cfg.seed;
  r.rho_step = cfg.rho_step;
  r.xi = cfg.xi;

  auto to_est = [](MeanSe ms) { return Est{ms.mean, ms.se}; };
  r.mean_tau = to_est(mean_se(tau));
  r.mean_m_tau = to_est(mean_se(m));

  {
    std::vector<double> sorted(tau);
    std::sort(sorted.begin(), sorted.end());
    const double med = 0.5 * (sorted[(N - 1) / 2] + sorted[N / 2]);
    // rank-based one-sigma band for the sample median
    const double half = 0.5 * std::sqrt(double(N));
    const std::size_t lo =
        std::size_t(std::max(0.0, std::floor(double(N) / 2 - half)));
    const std::size_t hi =
        std::min(N - 1, std::size_t(std::ceil(double(N) / 2 + half)));
    r.median_tau = {med, 0.5 * (sorted[hi] - sorted[lo])};
  }

  static constexpr double kThresholds[] = {0.25, 0.5, 0.75, 1.0, 1.5, 2.0};
  for (double thr : kThresholds) {
    long cnt = 0;
    for (double t : tau) cnt += (t <= thr);
    const double p = double(cnt) / double(N);
    const double se = std::sqrt(std::max(p * (1.0 - p), 0.0) / double(N));
    r.frac_stop_before.push_back({thr, Est{p, se}});
  }

  std::vector<double> work(N);
  for (std::size_t i = 0; i < N; ++i) work[i] = (m[i] >= 0.0) ? 1.0 : 0.0;
  {
    MeanSe a = mean_se(work);
    r.approval_rate = {a.mean, std::sqrt(std::max(a.mean * (1.0 - a.mean), 0.0) /
                                         double(N))};
  }
  for (std::size_t i = 0; i < N; ++i) work[i] = s_alpha(m[i], util.alpha);
  r.welfare_alice = to_est(mean_se(work));
  for (std::size_t i = 0; i < N; ++i) {
    const bool approve = m[i] >= 0.0;
    const double u_priv = approve ? util.alpha_prime * m[i]
                                  : -(1.0 - util.alpha_prime) * m[i];
    work[i] = (approve ? util.B : 0.0) + util.gamma * u_priv - cost.c * tau[i];
  }
  r.welfare_bob = to_est(mean_se(work));

  double tau_max = 0.0, m_lo = m[0], m_hi = m[0];
  for (double t : tau) tau_max = std::max(tau_max, t);
  for (double v : m) {
    m_lo = std::min(m_lo, v);
    m_hi = std::max(m_hi, v);
  }
  r.hist_tau = make_histogram(tau, 0.0, tau_max);
  r.hist_m_tau = make_histogram(m, m_lo, m_hi);
  return r;
}

struct RctComparison {
  double v0_star = 0.0;
  double nu = 0.0;
  double welfare_ratio = 0.0;
  double sample_reduction = 0.0;  // vs the unit-time fixed design
  bool has_savings = false;
  double savings = std::numeric_limits<double>::quiet_NaN();
};

inline RctComparison rct_compare(const SimResult& sim, const PriorSpec& prior,
                                 const UtilitySpec& util, const CostSpec& cost) {
  validate(prior);
  RctComparison r;
  r.v0_star = rct_welfare(prior.m0, prior, util.alpha);
  const double s2 = prior.sigma() * prior.sigma();
  r.nu = std::sqrt(prior.varrho0 / (1.0 + s2 / prior.varrho0));
  r.welfare_ratio = sim.welfare_alice.value / r.v0_star;
  r.sample_reduction = 1.0 - sim.mean_tau.value;
  if (cost.structural) {
    r.has_savings = true;
    r.savings = cost.structural->C_n * double(cost.structural->n) *
                (1.0 - sim.mean_tau.value);
  }
  return r;
}

}  // namespace seqstop
