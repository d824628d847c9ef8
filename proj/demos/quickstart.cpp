// Minimal tour: solve boundaries for the built-in baseline at a fixed
// lambda, then push Monte Carlo paths through them. Grid and path counts
// are scaled down so this finishes in a few seconds.

#include <cstdio>

#include "seqstop/seqstop.hpp"

int main() {
  using namespace seqstop;

  Scenario s = scenario_baseline_2025();
  s.grid = make_grid(s.prior.varrho0 / 800.0, 6.0 * std::sqrt(s.prior.varrho0),
                     0.999 * s.prior.varrho0);
  s.simcfg.n_paths = 20000;
  s.simcfg.rho_step = s.prior.varrho0 / 2000.0;

  const double lambda = 2.0;
  BoundarySolution sol =
      solve_boundaries(s.prior, s.util, lambda, s.cost, s.grid);
  std::printf("baseline-2025 at lambda = %g\n", lambda);
  std::printf("  t_star = %.4f\n", sol.t_star);
  for (double t : {0.0, 0.5, 1.0})
    std::printf("  t = %-4.1f  b+ = %8.4f   b- = %8.4f\n", t,
                sol.b_plus_at_t(t), sol.b_minus_at_t(t));

  SimResult sim = simulate(sol, s.prior, s.util, s.cost, s.simcfg);
  RctComparison rct = rct_compare(sim, s.prior, s.util, s.cost);
  std::printf("simulated %ld paths:\n", sim.n_paths);
  std::printf("  mean stopping time  %.4f (RCT runs to 1.0)\n",
              sim.mean_tau.value);
  std::printf("  approval rate       %.4f\n", sim.approval_rate.value);
  std::printf("  planner welfare     %.4f vs RCT %.4f\n",
              sim.welfare_alice.value, rct.v0_star);
  if (rct.has_savings)
    std::printf("  implied savings     $%.0f\n", rct.savings);
  return 0;
}
