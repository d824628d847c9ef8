#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "seqstop/model.hpp"

namespace seqstop {

struct grid_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Raised when the extracted boundary presses against the m-grid edge; the
// caller should retry with a wider grid.
struct escalation_request : std::runtime_error {
  double m_bar;
  explicit escalation_request(double mb)
      : std::runtime_error("boundary touches m_bar = " + std::to_string(mb) +
                           "; widen the m-grid"),
        m_bar(mb) {}
};

// Binomial grid in the variance-reduction clock. One rho-step moves the
// posterior mean by exactly +-delta_m, which forces delta_m = sqrt(delta_rho).
struct GridSpec {
  double delta_rho = 0.0;
  double delta_m = 0.0;
  double m_bar = 0.0;
  double rho_max = 0.0;
};

inline GridSpec make_grid(double delta_rho, double m_bar, double rho_max) {
  if (!(delta_rho > 0.0))
    throw std::invalid_argument("GridSpec: delta_rho must be positive");
  if (!(rho_max > 0.0))
    throw std::invalid_argument("GridSpec: rho_max must be positive");
  GridSpec g;
  g.delta_rho = delta_rho;
  g.delta_m = std::sqrt(delta_rho);
  g.m_bar = m_bar;
  g.rho_max = rho_max;
  if (!(g.m_bar >= 10.0 * g.delta_m))
    throw std::invalid_argument("GridSpec: m_bar must be at least 10*delta_m");
  return g;
}

inline GridSpec default_grid(const PriorSpec& prior) {
  validate(prior);
  const double r0 = prior.varrho0;
  return make_grid(r0 / 4000.0, 6.0 * std::sqrt(r0), (1.0 - 1e-3) * r0);
}

struct ValueTable {
  GridSpec grid;
  std::size_t n_rho = 0;  // rows
  std::size_t n_m = 0;    // columns, odd, m = (col - j_half)*delta_m
  long j_half = 0;
  std::vector<double> rho;  // size n_rho
  std::vector<double> v;    // row-major, n_rho * n_m
  double alpha = 0.5;
  double lambda = 0.0;
  double B = 0.0;
  double c = 0.0;

  double m_at(std::size_t col) const {
    return (double(col) - double(j_half)) * grid.delta_m;
  }
  double at(std::size_t row, std::size_t col) const {
    return v[row * n_m + col];
  }
};

struct BoundarySolution {
  PriorSpec prior;
  GridSpec grid;
  double lambda = 0.0;
  double B = 0.0;
  double c = 0.0;
  double alpha = 0.5;
  std::vector<double> rho_grid;
  std::vector<double> t_grid;
  std::vector<double> b_plus;
  std::vector<double> b_minus;
  double t_star = std::numeric_limits<double>::infinity();
  double b_minus_at_t_star = std::numeric_limits<double>::quiet_NaN();
  double t_star_cross_err = std::numeric_limits<double>::quiet_NaN();
  int escalations = 0;
  std::optional<ValueTable> value_table;

  double rho_last() const { return rho_grid.back(); }
  double horizon() const { return t_grid.back(); }

  // clamped linear interpolation on the uniform rho grid
  double interp(const std::vector<double>& y, double rho) const {
    const double h = grid.delta_rho;
    if (rho <= 0.0) return y.front();
    if (rho >= rho_grid.back()) return y.back();
    const double fi = rho / h;
    std::size_t i = std::size_t(fi);
    if (i >= y.size() - 1) return y.back();
    const double w = fi - double(i);
    return y[i] * (1.0 - w) + y[i + 1] * w;
  }
  double b_plus_at_rho(double rho) const { return interp(b_plus, rho); }
  double b_minus_at_rho(double rho) const { return interp(b_minus, rho); }
  double b_plus_at_t(double t) const {
    return b_plus_at_rho(time_change_psi(t, prior));
  }
  double b_minus_at_t(double t) const {
    return b_minus_at_rho(time_change_psi(t, prior));
  }
};

// Stop payoff: approval bonus above zero plus the multiplier-weighted
// planner utility of stopping at m.
inline double stop_payoff(double m, double B, double lambda, double alpha) {
  return (m >= 0.0 ? B : 0.0) + lambda * s_alpha(m, alpha);
}

// Backward induction with an explicit asymmetry parameter. The production
// entry point below fixes alpha = 1/2; this variant exists because the
// affine-shift invariance across alpha is itself a tested property.
inline ValueTable solve_value_alpha(const PriorSpec& prior,
                                    const UtilitySpec& util, double lambda,
                                    const CostSpec& cost, const GridSpec& grid,
                                    double alpha) {
  validate(prior);
  validate(util);
  validate(cost);
  if (!(lambda >= 0.0))
    throw std::invalid_argument("solve_value: lambda must be nonnegative");
  if (!(grid.rho_max < prior.varrho0))
    throw std::invalid_argument("GridSpec: rho_max must be below varrho0");
  if (std::fabs(grid.delta_m * grid.delta_m - grid.delta_rho) >
      1e-12 * grid.delta_rho)
    throw std::invalid_argument("GridSpec: delta_m != sqrt(delta_rho)");

  ValueTable vt;
  vt.grid = grid;
  vt.alpha = alpha;
  vt.lambda = lambda;
  vt.B = util.B;
  vt.c = cost.c;
  vt.n_rho = std::size_t(std::floor(grid.rho_max / grid.delta_rho + 1e-9)) + 1;
  if (vt.n_rho < 2) throw std::invalid_argument("GridSpec: fewer than 2 rho rows");
  vt.j_half = long(std::ceil(grid.m_bar / grid.delta_m - 1e-9));
  vt.n_m = std::size_t(2 * vt.j_half + 1);
  vt.rho.resize(vt.n_rho);
  for (std::size_t i = 0; i < vt.n_rho; ++i) vt.rho[i] = double(i) * grid.delta_rho;
  vt.v.assign(vt.n_rho * vt.n_m, 0.0);

  std::vector<double> g(vt.n_m);
  for (std::size_t k = 0; k < vt.n_m; ++k)
    g[k] = stop_payoff(vt.m_at(k), util.B, lambda, alpha);

  // terminal row: stopping is forced at the cap
  double* last = &vt.v[(vt.n_rho - 1) * vt.n_m];
  for (std::size_t k = 0; k < vt.n_m; ++k) last[k] = g[k];

  for (std::size_t ii = vt.n_rho - 1; ii-- > 0;) {
    const double cost_step =
        cost.c * time_change_slope(vt.rho[ii], prior) * grid.delta_rho;
    const double* nxt = &vt.v[(ii + 1) * vt.n_m];
    double* cur = &vt.v[ii * vt.n_m];
    cur[0] = g[0];
    cur[vt.n_m - 1] = g[vt.n_m - 1];
    for (std::size_t k = 1; k + 1 < vt.n_m; ++k) {
      const double cont = 0.5 * (nxt[k + 1] + nxt[k - 1]) - cost_step;
      cur[k] = std::max(g[k], cont);
    }
  }
  return vt;
}

inline ValueTable solve_value(const PriorSpec& prior, const UtilitySpec& util,
                              double lambda, const CostSpec& cost,
                              const GridSpec& grid) {
  return solve_value_alpha(prior, util, lambda, cost, grid, 0.5);
}

// Reads the stopping set off the value table: per rho-row, the smallest
// nonnegative grid m whose stop payoff is at least the continuation value,
// and the largest negative one. Weak inequality, matching the inf/sup in
// the boundary definitions.
inline BoundarySolution extract_boundaries(const ValueTable& vt,
                                           const PriorSpec& prior,
                                           const UtilitySpec& util,
                                           double lambda) {
  validate(prior);
  const GridSpec& grid = vt.grid;
  const std::size_t n = vt.n_rho, M = vt.n_m;
  const long jh = vt.j_half;

  std::vector<double> g(M);
  for (std::size_t k = 0; k < M; ++k)
    g[k] = stop_payoff(vt.m_at(k), util.B, lambda, vt.alpha);

  BoundarySolution sol;
  sol.prior = prior;
  sol.grid = grid;
  sol.lambda = lambda;
  sol.B = util.B;
  sol.c = vt.c;
  sol.alpha = vt.alpha;
  sol.rho_grid = vt.rho;
  sol.t_grid.resize(n);
  for (std::size_t i = 0; i < n; ++i)
    sol.t_grid[i] = time_change_inverse(vt.rho[i], prior);
  sol.b_plus.resize(n);
  sol.b_minus.resize(n);

  std::vector<char> stop(M);
  for (std::size_t i = 0; i < n; ++i) {
    if (i + 1 == n) {
      std::fill(stop.begin(), stop.end(), 1);
    } else {
      const double cost_step =
          vt.c * time_change_slope(vt.rho[i], prior) * grid.delta_rho;
      const double* nxt = &vt.v[(i + 1) * M];
      stop[0] = 1;
      stop[M - 1] = 1;
      for (std::size_t k = 1; k + 1 < M; ++k) {
        const double cont = 0.5 * (nxt[k + 1] + nxt[k - 1]) - cost_step;
        stop[k] = g[k] >= cont;
      }
    }

    // upper boundary: first stopping cell at m >= 0
    std::size_t jp = M;
    for (std::size_t k = std::size_t(jh); k < M; ++k)
      if (stop[k]) { jp = k; break; }
    // lower boundary: first stopping cell below m = 0
    std::size_t jm = M;
    for (std::size_t k = std::size_t(jh); k-- > 0;)
      if (stop[k]) { jm = k; break; }
    if (jp == M || jm == M)
      throw grid_error("extract_boundaries: no stopping cell found in row " +
                       std::to_string(i));

    // a stopping set with holes beyond one grid cell means the grid is too
    // coarse to resolve the boundary
    std::size_t holes_up = 0, holes_dn = 0;
    for (std::size_t k = jp + 1; k < M; ++k)
      if (!stop[k]) ++holes_up;
    for (std::size_t k = 0; k < jm; ++k)
      if (!stop[k]) ++holes_dn;
    if (holes_up > 1 || holes_dn > 1)
      throw grid_error(
          "extract_boundaries: non-monotone stopping set in row " +
          std::to_string(i) + " (" + std::to_string(holes_up) + " up, " +
          std::to_string(holes_dn) + " down)");

    // boundary within one cell of the grid edge: the forced-stop edge rows
    // are biasing it, so ask for a wider grid
    if (jp + 2 >= M || jm <= 1) throw escalation_request(grid.m_bar);

    sol.b_plus[i] = vt.m_at(jp);
    sol.b_minus[i] = vt.m_at(jm);
  }

  // continuous-time boundaries are monotone; on the lattice that can slip
  // by at most one cell
  const double slack = grid.delta_m + 1e-9;
  for (std::size_t i = 0; i + 1 < n; ++i) {
    if (sol.b_plus[i + 1] > sol.b_plus[i] + slack ||
        -sol.b_minus[i + 1] > -sol.b_minus[i] + slack)
      throw grid_error("extract_boundaries: boundary not monotone at row " +
                       std::to_string(i));
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (sol.b_plus[i] > -sol.b_minus[i] + slack)
      throw grid_error("extract_boundaries: b_plus exceeds |b_minus| at row " +
                       std::to_string(i));
  }
  return sol;
}

// First grid time where the upper boundary hits zero. At that instant the
// two boundaries deliver the same stop payoff: lambda*|b-|/2 = B, so
// b_minus(t_star) ~ -2B/lambda; the deviation is recorded as a consistency
// diagnostic.
inline double find_t_star(BoundarySolution& sol, double B, double lambda) {
  if (!(B >= 0.0) || !(lambda >= 0.0))
    throw std::invalid_argument("find_t_star: B and lambda must be nonnegative");
  if (lambda == 0.0) {
    sol.t_star = 0.0;
    sol.b_minus_at_t_star = sol.b_minus.front();
    sol.t_star_cross_err = std::numeric_limits<double>::quiet_NaN();
    return sol.t_star;
  }
  if (B == 0.0) {
    sol.t_star = std::numeric_limits<double>::infinity();
    sol.b_minus_at_t_star = std::numeric_limits<double>::quiet_NaN();
    sol.t_star_cross_err = std::numeric_limits<double>::quiet_NaN();
    return sol.t_star;
  }
  for (std::size_t i = 0; i < sol.b_plus.size(); ++i) {
    if (sol.b_plus[i] == 0.0) {
      sol.t_star = sol.t_grid[i];
      sol.b_minus_at_t_star = sol.b_minus[i];
      sol.t_star_cross_err = std::fabs(sol.b_minus[i] + 2.0 * B / lambda);
      return sol.t_star;
    }
  }
  sol.t_star = std::numeric_limits<double>::infinity();
  sol.b_minus_at_t_star = std::numeric_limits<double>::quiet_NaN();
  sol.t_star_cross_err = std::numeric_limits<double>::quiet_NaN();
  return sol.t_star;
}

// Solve + extract with automatic m-grid widening (x1.5 per attempt).
inline BoundarySolution solve_boundaries(const PriorSpec& prior,
                                         const UtilitySpec& util,
                                         double lambda, const CostSpec& cost,
                                         GridSpec grid,
                                         bool keep_table = false) {
  std::string tried;
  for (int attempt = 0; attempt < 7; ++attempt) {
    try {
      ValueTable vt = solve_value(prior, util, lambda, cost, grid);
      BoundarySolution sol = extract_boundaries(vt, prior, util, lambda);
      sol.escalations = attempt;
      find_t_star(sol, util.B, lambda);
      if (keep_table) sol.value_table = std::move(vt);
      return sol;
    } catch (const escalation_request& e) {
      tried += (tried.empty() ? "" : ", ") + std::to_string(e.m_bar);
      grid = make_grid(grid.delta_rho, grid.m_bar * 1.5, grid.rho_max);
    }
  }
  throw grid_error("solve_boundaries: m_bar escalation failed (tried " + tried +
                   ")");
}

}  // namespace seqstop
