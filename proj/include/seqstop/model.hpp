#pragma once

#include <cmath>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>

#include "seqstop/math.hpp"

namespace seqstop {

// Prior covariance of the transformed pair (mu_1/sigma_1, -mu_0/sigma_0).
// Only needed when arm priors are correlated or scaled so the balanced
// (Neyman-from-the-start) formulas do not apply.
struct CovSpec {
  double s11 = 0.0;
  double s00 = 0.0;
  double s01 = 0.0;
};

struct PriorSpec {
  double m0 = 0.0;       // prior mean of the treatment effect
  double varrho0 = 0.0;  // prior variance of the treatment effect
  double sigma1 = 0.0;   // per-unit-time outcome noise sd, favored arm
  double sigma0 = 0.0;
  std::optional<CovSpec> cov;

  double sigma() const { return sigma1 + sigma0; }
};

struct UtilitySpec {
  double alpha = 0.5;        // planner's asymmetry between type I/II losses
  double alpha_prime = 0.5;  // designer's private asymmetry
  double gamma = 0.0;        // designer's weight on planner utility
  double B = 0.0;            // approval payoff
};

struct CostSpec {
  double c = 0.0;  // flow cost per unit of (rescaled) trial time
  struct Structural {
    double C_n = 0.0;      // per-observation cost, currency
    double B_n = 0.0;      // approval benefit, currency
    double gamma_n = 0.0;  // planner-utility weight, currency
    long n = 0;            // observations per unit of rescaled time
    double varrho_0n = 0.0;  // per-unit prior variance before scaling
  };
  std::optional<Structural> structural;
};

// ----- derived quantities for a correlated/unbalanced prior -----
//
// With tilde-Sigma the covariance of (mu_1/sigma_1, -mu_0/sigma_0), the
// exclusive-then-Neyman allocation switches at t_star and the posterior
// variance of the effect follows two closed-form branches.  The constants:
//   cov_1 = sigma_1*S11 + sigma_0*S01,  cov_0 = sigma_0*S00 + sigma_1*S01.
// Cross-sigma weights on the off-diagonal term are what make the two
// branches meet continuously at t_star and match direct posterior
// computation; see tests for the machine-precision checks. Arms are
// relabeled internally so cov_1 >= cov_0, and the flag is recorded.
struct CovDerived {
  double a = 0.0, d = 0.0, b = 0.0;  // relabeled tilde-Sigma entries
  double det = 0.0;
  double cov1 = 0.0, cov0 = 0.0;
  double s1 = 0.0, s0 = 0.0;  // relabeled sigmas
  double rho0 = 0.0;
  double t_star = 0.0;
  double rho_star = 0.0;  // psi(t_star)
  double F = 0.0;         // a + d - 2b
  bool swapped = false;
};

inline void validate(const PriorSpec& p) {
  if (!(p.varrho0 > 0.0))
    throw std::invalid_argument("PriorSpec: varrho0 must be positive");
  if (!(p.sigma1 > 0.0) || !(p.sigma0 > 0.0))
    throw std::invalid_argument("PriorSpec: sigma1, sigma0 must be positive");
  if (!std::isfinite(p.m0))
    throw std::invalid_argument("PriorSpec: m0 must be finite");
  if (p.cov) {
    const CovSpec& c = *p.cov;
    if (!(c.s11 > 0.0) || !(c.s00 > 0.0))
      throw std::invalid_argument("PriorSpec: cov diagonal must be positive");
    const double det = c.s11 * c.s00 - c.s01 * c.s01;
    const double scale = c.s11 * c.s00;
    if (!(det > 1e-12 * scale))
      throw std::invalid_argument("PriorSpec: cov is singular or indefinite");
    const double cov1 = p.sigma1 * c.s11 + p.sigma0 * c.s01;
    const double cov0 = p.sigma0 * c.s00 + p.sigma1 * c.s01;
    if (cov1 + cov0 < 0.0)
      throw std::invalid_argument("PriorSpec: cov violates cov1 + cov0 >= 0");
    const double rho0 = p.sigma1 * p.sigma1 * c.s11 +
                        p.sigma0 * p.sigma0 * c.s00 +
                        2.0 * p.sigma0 * p.sigma1 * c.s01;
    if (std::fabs(rho0 - p.varrho0) > 1e-6 * std::fabs(rho0))
      throw std::invalid_argument(
          "PriorSpec: varrho0 inconsistent with cov (expect "
          "s1^2*S11 + s0^2*S00 + 2*s0*s1*S01)");
  }
}

inline void validate(const UtilitySpec& u) {
  if (!(u.alpha >= 0.0 && u.alpha <= 1.0))
    throw std::invalid_argument("UtilitySpec: alpha must lie in [0,1]");
  if (!(u.alpha_prime >= 0.0 && u.alpha_prime <= 1.0))
    throw std::invalid_argument("UtilitySpec: alpha_prime must lie in [0,1]");
  if (!(u.gamma >= 0.0))
    throw std::invalid_argument("UtilitySpec: gamma must be nonnegative");
  if (!(u.B >= 0.0))
    throw std::invalid_argument("UtilitySpec: B must be nonnegative");
}

inline void validate(const CostSpec& c) {
  if (!(c.c > 0.0)) throw std::invalid_argument("CostSpec: c must be positive");
}

inline CovDerived derive_cov(const PriorSpec& p) {
  if (!p.cov) throw std::invalid_argument("derive_cov: prior has no cov block");
  validate(p);
  CovDerived g;
  g.a = p.cov->s11;
  g.d = p.cov->s00;
  g.b = p.cov->s01;
  g.det = g.a * g.d - g.b * g.b;
  g.s1 = p.sigma1;
  g.s0 = p.sigma0;
  g.cov1 = g.s1 * g.a + g.s0 * g.b;
  g.cov0 = g.s0 * g.d + g.s1 * g.b;
  g.swapped = g.cov0 > g.cov1;
  if (g.swapped) {
    std::swap(g.a, g.d);
    std::swap(g.s1, g.s0);
    std::swap(g.cov1, g.cov0);
  }
  g.rho0 = g.s1 * g.s1 * g.a + g.s0 * g.s0 * g.d + 2.0 * g.s0 * g.s1 * g.b;
  g.F = g.a + g.d - 2.0 * g.b;
  g.t_star = (g.cov1 - g.cov0) / (g.s0 * g.det);
  // branch-1 variance at t_star, then rho_star = rho0 - that
  const double v_at_star =
      (g.rho0 + g.s0 * g.s0 * g.det * g.t_star) / (1.0 + g.a * g.t_star);
  g.rho_star = g.rho0 - v_at_star;
  return g;
}

// S_alpha(x) = max{alpha*x, -(1-alpha)*x}: the planner's utility of the
// optimal approve/reject call when the posterior mean is x.
inline double s_alpha(double x, double alpha) {
  return std::max(x, 0.0) - (1.0 - alpha) * x;
}

// Variance-minimizing split of a sampling budget across the two arms.
inline double neyman_fraction(double sigma1, double sigma0) {
  if (!(sigma1 > 0.0) || !(sigma0 > 0.0))
    throw std::invalid_argument("neyman_fraction: sigmas must be positive");
  return sigma1 / (sigma1 + sigma0);
}

// Posterior variance of the effect at time t under the optimal allocation.
inline double posterior_variance(double t, const PriorSpec& p) {
  if (!(t >= 0.0))
    throw std::invalid_argument("posterior_variance: t must be nonnegative");
  validate(p);
  if (!p.cov) {
    const double s2 = p.sigma() * p.sigma();
    return s2 / (s2 / p.varrho0 + t);
  }
  const CovDerived g = derive_cov(p);
  if (t <= g.t_star)
    return (g.rho0 + g.s0 * g.s0 * g.det * t) / (1.0 + g.a * t);
  const double sig = g.s1 + g.s0;
  return sig * sig * g.det / (g.F + g.det * t);
}

// psi: elapsed time -> accumulated variance reduction (the solver's clock).
inline double time_change_psi(double t, const PriorSpec& p) {
  return p.varrho0 - posterior_variance(t, p);
}

// Inverse of psi. Domain [0, varrho0); diverges at the right endpoint.
inline double time_change_inverse(double rho, const PriorSpec& p) {
  validate(p);
  if (!(rho >= 0.0))
    throw std::invalid_argument("time_change_inverse: rho must be nonnegative");
  if (!(rho < p.varrho0))
    throw std::invalid_argument(
        "time_change_inverse: rho must be below varrho0 (infinite time)");
  if (!p.cov) {
    const double s2 = p.sigma() * p.sigma();
    return rho * s2 / (p.varrho0 * (p.varrho0 - rho));
  }
  const CovDerived g = derive_cov(p);
  if (rho <= g.rho_star) return rho / (g.cov1 * g.cov1 - g.a * rho);
  const double sig = g.s1 + g.s0;
  return sig * sig / (g.rho0 - rho) - g.F / g.det;
}

// d(inverse)/d(rho): converts a rho-step into elapsed-time units.
inline double time_change_slope(double rho, const PriorSpec& p) {
  validate(p);
  if (!(rho >= 0.0 && rho < p.varrho0))
    throw std::invalid_argument("time_change_slope: rho outside [0, varrho0)");
  if (!p.cov) {
    const double s2 = p.sigma() * p.sigma();
    const double d = p.varrho0 - rho;
    return s2 / (d * d);
  }
  const CovDerived g = derive_cov(p);
  if (rho <= g.rho_star) {
    const double den = g.cov1 * g.cov1 - g.a * rho;
    return g.cov1 * g.cov1 / (den * den);
  }
  const double sig = g.s1 + g.s0;
  const double d = g.rho0 - rho;
  return sig * sig / (d * d);
}

// Switch time of the exclusive-then-Neyman allocation; 0 when the prior is
// already balanced.
inline double general_cov_t_star(const PriorSpec& p) {
  validate(p);
  if (!p.cov) return 0.0;
  return derive_cov(p).t_star;
}

// Asymptotic-regime parameters from per-observation trial economics,
// normalized so the approval benefit is 1.
struct ScaledParams {
  double c = 0.0;
  double B = 1.0;
  double gamma = 0.0;
  double varrho0 = 0.0;
  double c_over_B = 0.0;
  double gamma_over_c = 0.0;
};

inline ScaledParams scale_params(double C, double B_n, double gamma_n, long n,
                                 double varrho_0n) {
  if (!(C > 0.0)) throw std::invalid_argument("scale_params: C must be positive");
  if (n < 1) throw std::invalid_argument("scale_params: n must be at least 1");
  if (gamma_n < 0.0)
    throw std::invalid_argument("scale_params: gamma_n must be nonnegative");
  if (!(B_n > 0.0))
    throw std::invalid_argument(
        "scale_params: B_n = 0 leaves nothing to normalize by; supply c "
        "directly for benefit-free designs");
  ScaledParams s;
  const double nd = double(n);
  s.c = nd * C / B_n;
  s.B = 1.0;
  s.gamma = gamma_n / (std::sqrt(nd) * B_n);
  s.varrho0 = std::sqrt(nd) * varrho_0n;
  s.c_over_B = s.c;
  s.gamma_over_c = gamma_n / (std::pow(nd, 1.5) * C);
  return s;
}

inline ScaledParams scale_params(const CostSpec::Structural& st) {
  return scale_params(st.C_n, st.B_n, st.gamma_n, st.n, st.varrho_0n);
}

// Expected planner welfare of the fixed-length unit-time experiment with
// Neyman allocation: the benchmark every calibration targets.
inline double rct_welfare(double m0, const PriorSpec& p, double alpha) {
  validate(p);
  if (!(alpha >= 0.0 && alpha <= 1.0))
    throw std::invalid_argument("rct_welfare: alpha must lie in [0,1]");
  const double s2 = p.sigma() * p.sigma();
  const double nu2 = p.varrho0 / (1.0 + s2 / p.varrho0);
  const double nu = std::sqrt(nu2);
  return m0 * norm_cdf(m0 / nu) + nu * norm_pdf(m0 / nu) - (1.0 - alpha) * m0;
}

}  // namespace seqstop
