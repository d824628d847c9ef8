#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <limits>
#include <vector>

#include "seqstop/model.hpp"
#include "seqstop/solver.hpp"

using namespace seqstop;

static PriorSpec plain_prior(double varrho0, double sigma = 1.0) {
  PriorSpec p;
  p.varrho0 = varrho0;
  p.sigma1 = 0.5 * sigma;
  p.sigma0 = 0.5 * sigma;
  return p;
}

static UtilitySpec util_b(double B) {
  UtilitySpec u;
  u.B = B;
  return u;
}

static CostSpec cost_c(double c) {
  CostSpec cs;
  cs.c = c;
  return cs;
}

TEST_CASE("grid construction guards") {
  CHECK_THROWS_AS(make_grid(0.0, 1.0, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(make_grid(0.01, 0.5, 1.0), std::invalid_argument);  // m_bar < 10 dm
  CHECK_THROWS_AS(make_grid(0.01, 3.0, 0.0), std::invalid_argument);

  const GridSpec g = make_grid(0.01, 3.0, 1.0);
  CHECK(g.delta_m == doctest::Approx(0.1).epsilon(1e-15));

  const PriorSpec p = plain_prior(4.0);
  GridSpec bad = g;
  bad.rho_max = 5.0;  // above varrho0
  CHECK_THROWS_AS(solve_value(p, util_b(1.0), 1.0, cost_c(0.1), bad),
                  std::invalid_argument);
  bad = g;
  bad.delta_m = 0.11;
  CHECK_THROWS_AS(solve_value(p, util_b(1.0), 1.0, cost_c(0.1), bad),
                  std::invalid_argument);

  const GridSpec dg = default_grid(p);
  CHECK(dg.delta_rho == doctest::Approx(4.0 / 4000.0).epsilon(1e-15));
  CHECK(dg.m_bar == doctest::Approx(12.0).epsilon(1e-15));
  CHECK(dg.rho_max == doctest::Approx(0.999 * 4.0).epsilon(1e-15));
}

// Exhaustive check on a lattice small enough to enumerate every
// per-level threshold policy: the recursion's root value must equal the
// best policy's expected payoff.
namespace {

struct SmallCase {
  double varrho0, B, lambda, c;
  double frozen_root;  // from an independent implementation
};

double enumerate_best(const SmallCase& sc, const PriorSpec& p,
                      const GridSpec& grid) {
  constexpr int kLevels = 6;
  const double dm = grid.delta_m;
  const int big = 999;

  std::vector<std::vector<int>> up(kLevels), dn(kLevels);
  for (int lv = 0; lv < kLevels; ++lv) {
    for (int k = lv % 2; k <= lv; k += 2) up[size_t(lv)].push_back(k);
    up[size_t(lv)].push_back(big);
    for (int k = -1 - ((lv + 1) % 2); k >= -lv; k -= 2)
      dn[size_t(lv)].push_back(k);
    dn[size_t(lv)].push_back(-big);
  }

  // all 64 paths: integer trajectories and accumulated sampling costs
  int traj[64][kLevels + 1];
  double cum[kLevels + 1];
  cum[0] = 0.0;
  for (int i = 0; i < kLevels; ++i)
    cum[i + 1] = cum[i] + sc.c * time_change_slope(i * grid.delta_rho, p) *
                              grid.delta_rho;
  for (int path = 0; path < 64; ++path) {
    traj[path][0] = 0;
    for (int i = 0; i < kLevels; ++i)
      traj[path][i + 1] = traj[path][i] + ((path >> i & 1) ? 1 : -1);
  }

  std::size_t combos[kLevels];
  for (int lv = 0; lv < kLevels; ++lv)
    combos[lv] = up[size_t(lv)].size() * dn[size_t(lv)].size();

  double best = -std::numeric_limits<double>::infinity();
  std::size_t digit[kLevels] = {0, 0, 0, 0, 0, 0};
  for (;;) {
    int u[kLevels], d[kLevels];
    for (int lv = 0; lv < kLevels; ++lv) {
      const std::size_t nd = dn[size_t(lv)].size();
      u[lv] = up[size_t(lv)][digit[lv] / nd];
      d[lv] = dn[size_t(lv)][digit[lv] % nd];
    }
    double sum = 0.0;
    for (int path = 0; path < 64; ++path) {
      double pay = 0.0;
      bool stopped = false;
      for (int i = 0; i < kLevels; ++i) {
        const int k = traj[path][i];
        if (k >= u[i] || k <= d[i]) {
          pay = stop_payoff(k * dm, sc.B, sc.lambda, 0.5) - cum[i];
          stopped = true;
          break;
        }
      }
      if (!stopped)
        pay = stop_payoff(traj[path][kLevels] * dm, sc.B, sc.lambda, 0.5) -
              cum[kLevels];
      sum += pay;
    }
    best = std::max(best, sum / 64.0);

    int lv = 0;
    while (lv < kLevels && ++digit[lv] == combos[lv]) digit[size_t(lv)] = 0, ++lv;
    if (lv == kLevels) break;
  }
  return best;
}

}  // namespace

TEST_CASE("six-level recursion equals exhaustive policy enumeration") {
  const SmallCase cases[] = {
      {4.0, 1.0, 2.0, 0.3, 1.777837422827693},
      {6.0, 0.0, 1.5, 0.8, 1.004351941950180},
      {4.0, 0.6, 3.0, 0.05, 2.161820067222138},
  };
  for (const SmallCase& sc : cases) {
    CAPTURE(sc.varrho0);
    const PriorSpec p = plain_prior(sc.varrho0);
    const double dr = 0.6 * sc.varrho0 / 6.0;
    const GridSpec grid =
        make_grid(dr, 10.0 * std::sqrt(dr), 0.6 * sc.varrho0);
    const ValueTable vt =
        solve_value(p, util_b(sc.B), sc.lambda, cost_c(sc.c), grid);
    REQUIRE(vt.n_rho == 7);
    const double root = vt.at(0, std::size_t(vt.j_half));
    CHECK(std::fabs(root - sc.frozen_root) < 1e-12);
    CHECK(std::fabs(root - enumerate_best(sc, p, grid)) < 1e-12);
  }
}

TEST_CASE("value table dominates the stop payoff everywhere") {
  const PriorSpec p = plain_prior(9.7344);
  const GridSpec grid = make_grid(p.varrho0 / 400.0, 6.0 * std::sqrt(p.varrho0),
                                  0.999 * p.varrho0);
  const ValueTable vt = solve_value(p, util_b(1.0), 2.0, cost_c(0.27), grid);
  for (std::size_t i = 0; i < vt.n_rho; ++i)
    for (std::size_t k = 0; k < vt.n_m; ++k) {
      const double g = stop_payoff(vt.m_at(k), 1.0, 2.0, 0.5);
      CHECK(vt.at(i, k) >= g - 1e-15);
    }
  // forced stops: both m edges and the terminal row
  for (std::size_t i = 0; i < vt.n_rho; ++i) {
    CHECK(vt.at(i, 0) == stop_payoff(vt.m_at(0), 1.0, 2.0, 0.5));
    CHECK(vt.at(i, vt.n_m - 1) ==
          stop_payoff(vt.m_at(vt.n_m - 1), 1.0, 2.0, 0.5));
  }
  for (std::size_t k = 0; k < vt.n_m; ++k)
    CHECK(vt.at(vt.n_rho - 1, k) == stop_payoff(vt.m_at(k), 1.0, 2.0, 0.5));
  // the root strictly prefers continuing
  CHECK(vt.at(0, std::size_t(vt.j_half)) >
        stop_payoff(0.0, 1.0, 2.0, 0.5));
}

TEST_CASE("lambda zero stops instantly on approval") {
  const PriorSpec p = plain_prior(9.7344);
  const GridSpec grid = make_grid(p.varrho0 / 600.0, 6.0 * std::sqrt(p.varrho0),
                                  0.999 * p.varrho0);
  BoundarySolution sol =
      solve_boundaries(p, util_b(1.0), 0.0, cost_c(0.27), grid);
  for (double b : sol.b_plus) CHECK(b == 0.0);
  for (double b : sol.b_minus) CHECK(b < 0.0);
  CHECK(sol.t_star == 0.0);
}

TEST_CASE("no approval payoff gives symmetric boundaries and no truncation") {
  const PriorSpec p = plain_prior(9.7344);
  const GridSpec grid = make_grid(p.varrho0 / 600.0, 6.0 * std::sqrt(p.varrho0),
                                  0.999 * p.varrho0);
  BoundarySolution sol =
      solve_boundaries(p, util_b(0.0), 2.5, cost_c(7.98), grid);
  double worst = 0.0;
  for (std::size_t i = 0; i < sol.b_plus.size(); ++i)
    worst = std::max(worst, std::fabs(sol.b_plus[i] + sol.b_minus[i]));
  CHECK(worst <= 2.0 * grid.delta_m + 1e-12);
  CHECK(std::isinf(sol.t_star));
}

TEST_CASE("boundary shape properties on a small config sweep") {
  const double slack_scale = 1.0 + 1e-9;
  const struct {
    double varrho0, B, lambda, c;
  } cfgs[] = {{4.0, 1.0, 1.0, 0.1},
              {9.7344, 1.0, 2.5, 0.3},
              {6.5, 0.5, 1.7, 0.8},
              {12.0, 0.2, 3.0, 0.05}};
  for (const auto& cf : cfgs) {
    CAPTURE(cf.varrho0);
    const PriorSpec p = plain_prior(cf.varrho0);
    const GridSpec grid = make_grid(cf.varrho0 / 600.0,
                                    6.0 * std::sqrt(cf.varrho0),
                                    0.999 * cf.varrho0);
    const double slack = grid.delta_m * slack_scale;
    const BoundarySolution sol =
        solve_boundaries(p, util_b(cf.B), cf.lambda, cost_c(cf.c), grid);
    for (std::size_t i = 0; i < sol.b_plus.size(); ++i) {
      CHECK(sol.b_plus[i] >= 0.0);
      CHECK(sol.b_minus[i] < 0.0);
      CHECK(sol.b_plus[i] <= -sol.b_minus[i] + slack);
      if (i + 1 < sol.b_plus.size()) {
        CHECK(sol.b_plus[i + 1] <= sol.b_plus[i] + slack);
        CHECK(-sol.b_minus[i + 1] <= -sol.b_minus[i] + slack);
      }
    }

    // wider welfare weight pushes both boundaries outward
    const BoundarySolution wide =
        solve_boundaries(p, util_b(cf.B), 1.5 * cf.lambda, cost_c(cf.c), grid);
    for (std::size_t i = 0; i < sol.b_plus.size(); ++i) {
      CHECK(wide.b_plus[i] >= sol.b_plus[i] - slack);
      CHECK(-wide.b_minus[i] >= -sol.b_minus[i] - slack);
    }

    // a larger approval payoff shifts both boundaries down (signed)
    const BoundarySolution rich =
        solve_boundaries(p, util_b(cf.B + 0.7), cf.lambda, cost_c(cf.c), grid);
    for (std::size_t i = 0; i < sol.b_plus.size(); ++i) {
      CHECK(rich.b_plus[i] <= sol.b_plus[i] + slack);
      CHECK(rich.b_minus[i] <= sol.b_minus[i] + slack);
    }
  }
}

TEST_CASE("upper boundary truncation matches -B/lambda within cells") {
  const PriorSpec p = plain_prior(9.7344);
  const GridSpec grid = make_grid(p.varrho0 / 1200.0,
                                  6.0 * std::sqrt(p.varrho0), 0.999 * p.varrho0);
  const double B = 1.0, lambda = 2.0;
  BoundarySolution sol =
      solve_boundaries(p, util_b(B), lambda, cost_c(0.2656), grid);
  REQUIRE(std::isfinite(sol.t_star));
  CHECK(sol.t_star > 0.0);
  // when b+ first hits zero, stopping at either boundary pays exactly B:
  // lambda*|b-|/2 = B, i.e. b-(t_star) = -2B/lambda
  CHECK(std::fabs(sol.b_minus_at_t_star + 2.0 * B / lambda) <=
        3.0 * grid.delta_m);
  CHECK(sol.t_star_cross_err <= 3.0 * grid.delta_m);
  CHECK(std::fabs(sol.b_plus_at_t(sol.t_star)) <= 1e-9);
  CHECK(sol.b_plus_at_t(sol.t_star + 1.0) == 0.0);
  CHECK(sol.b_plus_at_t(0.0) > 0.0);
}

TEST_CASE("stopping sets ignore the linear payoff tilt") {
  const struct {
    double varrho0, B, lambda, c;
  } cfgs[] = {{5.0, 1.0, 2.0, 0.3}, {8.0, 0.4, 1.2, 0.6}};
  for (const auto& cf : cfgs) {
    const PriorSpec p = plain_prior(cf.varrho0);
    const GridSpec grid = make_grid(cf.varrho0 / 500.0,
                                    6.0 * std::sqrt(cf.varrho0),
                                    0.999 * cf.varrho0);
    const ValueTable vhalf = solve_value_alpha(p, util_b(cf.B), cf.lambda,
                                               cost_c(cf.c), grid, 0.5);
    const ValueTable vone = solve_value_alpha(p, util_b(cf.B), cf.lambda,
                                              cost_c(cf.c), grid, 1.0);
    const BoundarySolution bh =
        extract_boundaries(vhalf, p, util_b(cf.B), cf.lambda);
    const BoundarySolution bo =
        extract_boundaries(vone, p, util_b(cf.B), cf.lambda);
    REQUIRE(bh.b_plus.size() == bo.b_plus.size());
    for (std::size_t i = 0; i < bh.b_plus.size(); ++i) {
      CHECK(bh.b_plus[i] == bo.b_plus[i]);
      CHECK(bh.b_minus[i] == bo.b_minus[i]);
    }
  }
}

TEST_CASE("band escalation widens m_bar until boundaries fit") {
  const PriorSpec p = plain_prior(9.7344);
  // start with a band that is far too narrow for this lambda
  const GridSpec tight = make_grid(p.varrho0 / 600.0,
                                   10.0 * std::sqrt(p.varrho0 / 600.0),
                                   0.999 * p.varrho0);
  CHECK_THROWS_AS(
      extract_boundaries(solve_value(p, util_b(1.0), 3.0, cost_c(0.1), tight),
                         p, util_b(1.0), 3.0),
      escalation_request);

  const BoundarySolution sol =
      solve_boundaries(p, util_b(1.0), 3.0, cost_c(0.1), tight);
  CHECK(sol.escalations >= 1);
  CHECK(sol.b_plus.front() > 0.0);
}

TEST_CASE("boundary interpolation is exact at nodes and clamped outside") {
  const PriorSpec p = plain_prior(4.0);
  const GridSpec grid =
      make_grid(4.0 / 200.0, 12.0, 0.999 * 4.0);
  const BoundarySolution sol =
      solve_boundaries(p, util_b(1.0), 2.0, cost_c(0.3), grid);
  for (std::size_t i = 0; i < sol.rho_grid.size(); i += 13)
    CHECK(sol.b_plus_at_rho(sol.rho_grid[i]) == sol.b_plus[i]);
  const double mid = 0.5 * (sol.rho_grid[3] + sol.rho_grid[4]);
  CHECK(sol.b_plus_at_rho(mid) ==
        doctest::Approx(0.5 * (sol.b_plus[3] + sol.b_plus[4])).epsilon(1e-12));
  CHECK(sol.b_minus_at_rho(-1.0) == sol.b_minus.front());
  CHECK(sol.b_minus_at_rho(100.0) == sol.b_minus.back());
  CHECK(sol.b_plus_at_t(0.0) == sol.b_plus.front());
}
