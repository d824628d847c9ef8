#pragma once

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "seqstop/bernoulli.hpp"
#include "seqstop/calibrate.hpp"
#include "seqstop/model.hpp"
#include "seqstop/scenario.hpp"
#include "seqstop/simulate.hpp"
#include "seqstop/solver.hpp"

namespace seqstop {

using json = nlohmann::json;

inline constexpr int kSchemaVersion = 1;

// ----- non-finite doubles travel as null -----

inline json num_or_null(double x) {
  if (std::isfinite(x)) return x;
  return nullptr;
}

inline double num_from(const json& j, double if_null) {
  if (j.is_null()) return if_null;
  return j.get<double>();
}

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kNan = std::numeric_limits<double>::quiet_NaN();

// ----- spec types -----

inline void to_json(json& j, const CovSpec& c) {
  j = json{{"s11", c.s11}, {"s00", c.s00}, {"s01", c.s01}};
}
inline void from_json(const json& j, CovSpec& c) {
  j.at("s11").get_to(c.s11);
  j.at("s00").get_to(c.s00);
  j.at("s01").get_to(c.s01);
}

inline void to_json(json& j, const PriorSpec& p) {
  j = json{{"m0", p.m0},
           {"varrho0", p.varrho0},
           {"sigma1", p.sigma1},
           {"sigma0", p.sigma0},
           {"cov", p.cov ? json(*p.cov) : json(nullptr)}};
}
inline void from_json(const json& j, PriorSpec& p) {
  j.at("m0").get_to(p.m0);
  j.at("varrho0").get_to(p.varrho0);
  j.at("sigma1").get_to(p.sigma1);
  j.at("sigma0").get_to(p.sigma0);
  p.cov.reset();
  if (j.contains("cov") && !j.at("cov").is_null())
    p.cov = j.at("cov").get<CovSpec>();
}

inline void to_json(json& j, const UtilitySpec& u) {
  j = json{{"alpha", u.alpha},
           {"alpha_prime", u.alpha_prime},
           {"gamma", u.gamma},
           {"B", u.B}};
}
inline void from_json(const json& j, UtilitySpec& u) {
  UtilitySpec d;
  u.alpha = j.value("alpha", d.alpha);
  u.alpha_prime = j.value("alpha_prime", d.alpha_prime);
  u.gamma = j.value("gamma", d.gamma);
  u.B = j.value("B", d.B);
}

inline void to_json(json& j, const CostSpec::Structural& s) {
  j = json{{"C_n", s.C_n},
           {"B_n", s.B_n},
           {"gamma_n", s.gamma_n},
           {"n", s.n},
           {"varrho_0n", s.varrho_0n}};
}
inline void from_json(const json& j, CostSpec::Structural& s) {
  j.at("C_n").get_to(s.C_n);
  j.at("B_n").get_to(s.B_n);
  j.at("gamma_n").get_to(s.gamma_n);
  j.at("n").get_to(s.n);
  j.at("varrho_0n").get_to(s.varrho_0n);
}

inline void to_json(json& j, const CostSpec& c) {
  j = json{{"c", c.c},
           {"structural",
            c.structural ? json(*c.structural) : json(nullptr)}};
}
inline void from_json(const json& j, CostSpec& c) {
  j.at("c").get_to(c.c);
  c.structural.reset();
  if (j.contains("structural") && !j.at("structural").is_null())
    c.structural = j.at("structural").get<CostSpec::Structural>();
}

inline void to_json(json& j, const GridSpec& g) {
  j = json{{"delta_rho", g.delta_rho},
           {"delta_m", g.delta_m},
           {"m_bar", g.m_bar},
           {"rho_max", g.rho_max}};
}
inline void from_json(const json& j, GridSpec& g) {
  j.at("delta_rho").get_to(g.delta_rho);
  j.at("m_bar").get_to(g.m_bar);
  j.at("rho_max").get_to(g.rho_max);
  g.delta_m = j.value("delta_m", 0.0);
  if (g.delta_rho > 0.0) g = make_grid(g.delta_rho, g.m_bar, g.rho_max);
}

inline void to_json(json& j, const SimConfig& s) {
  j = json{{"n_paths", s.n_paths},
           {"seed", s.seed},
           {"rho_step", s.rho_step},
           {"xi", s.xi}};
}
inline void from_json(const json& j, SimConfig& s) {
  SimConfig d;
  s.n_paths = j.value("n_paths", d.n_paths);
  s.seed = j.value("seed", d.seed);
  s.rho_step = j.value("rho_step", d.rho_step);
  s.xi = j.value("xi", d.xi);
}

inline void to_json(json& j, const ScaledParams& s) {
  j = json{{"c", s.c},
           {"B", s.B},
           {"gamma", s.gamma},
           {"varrho0", s.varrho0},
           {"c_over_B", s.c_over_B},
           {"gamma_over_c", s.gamma_over_c}};
}
inline void from_json(const json& j, ScaledParams& s) {
  j.at("c").get_to(s.c);
  j.at("B").get_to(s.B);
  j.at("gamma").get_to(s.gamma);
  j.at("varrho0").get_to(s.varrho0);
  j.at("c_over_B").get_to(s.c_over_B);
  j.at("gamma_over_c").get_to(s.gamma_over_c);
}

// ----- results -----

inline void to_json(json& j, const Est& e) {
  j = json{{"value", num_or_null(e.value)}, {"se", num_or_null(e.se)}};
}
inline void from_json(const json& j, Est& e) {
  e.value = num_from(j.at("value"), kNan);
  e.se = num_from(j.at("se"), kNan);
}

inline void to_json(json& j, const Histogram& h) {
  j = json{{"lo", h.lo}, {"hi", h.hi}, {"counts", h.counts}};
}
inline void from_json(const json& j, Histogram& h) {
  j.at("lo").get_to(h.lo);
  j.at("hi").get_to(h.hi);
  j.at("counts").get_to(h.counts);
}

inline void to_json(json& j, const BoundarySolution& s) {
  j = json{{"prior", s.prior},
           {"grid", s.grid},
           {"lambda", s.lambda},
           {"B", s.B},
           {"c", s.c},
           {"alpha", s.alpha},
           {"rho_grid", s.rho_grid},
           {"t_grid", s.t_grid},
           {"b_plus", s.b_plus},
           {"b_minus", s.b_minus},
           {"t_star", num_or_null(s.t_star)},
           {"b_minus_at_t_star", num_or_null(s.b_minus_at_t_star)},
           {"t_star_cross_err", num_or_null(s.t_star_cross_err)},
           {"escalations", s.escalations}};
}
inline void from_json(const json& j, BoundarySolution& s) {
  j.at("prior").get_to(s.prior);
  j.at("grid").get_to(s.grid);
  j.at("lambda").get_to(s.lambda);
  j.at("B").get_to(s.B);
  j.at("c").get_to(s.c);
  j.at("alpha").get_to(s.alpha);
  j.at("rho_grid").get_to(s.rho_grid);
  j.at("t_grid").get_to(s.t_grid);
  j.at("b_plus").get_to(s.b_plus);
  j.at("b_minus").get_to(s.b_minus);
  s.t_star = num_from(j.at("t_star"), kInf);
  s.b_minus_at_t_star = num_from(j.at("b_minus_at_t_star"), kNan);
  s.t_star_cross_err = num_from(j.at("t_star_cross_err"), kNan);
  j.at("escalations").get_to(s.escalations);
  s.value_table.reset();
}

inline void to_json(json& j, const SimResult& r) {
  json fracs = json::array();
  for (const auto& [threshold, est] : r.frac_stop_before)
    fracs.push_back(json{{"t", threshold}, {"frac", est}});
  j = json{{"n_paths", r.n_paths},
           {"seed", r.seed},
           {"rho_step", r.rho_step},
           {"xi", r.xi},
           {"mean_tau", r.mean_tau},
           {"median_tau", r.median_tau},
           {"welfare_alice", r.welfare_alice},
           {"welfare_bob", r.welfare_bob},
           {"approval_rate", r.approval_rate},
           {"mean_m_tau", r.mean_m_tau},
           {"frac_stop_before", fracs},
           {"hist_tau", r.hist_tau},
           {"hist_m_tau", r.hist_m_tau}};
}
inline void from_json(const json& j, SimResult& r) {
  j.at("n_paths").get_to(r.n_paths);
  j.at("seed").get_to(r.seed);
  j.at("rho_step").get_to(r.rho_step);
  j.at("xi").get_to(r.xi);
  j.at("mean_tau").get_to(r.mean_tau);
  j.at("median_tau").get_to(r.median_tau);
  j.at("welfare_alice").get_to(r.welfare_alice);
  j.at("welfare_bob").get_to(r.welfare_bob);
  j.at("approval_rate").get_to(r.approval_rate);
  j.at("mean_m_tau").get_to(r.mean_m_tau);
  r.frac_stop_before.clear();
  for (const auto& row : j.at("frac_stop_before"))
    r.frac_stop_before.emplace_back(row.at("t").get<double>(),
                                    row.at("frac").get<Est>());
  j.at("hist_tau").get_to(r.hist_tau);
  j.at("hist_m_tau").get_to(r.hist_m_tau);
}

inline void to_json(json& j, const RctComparison& r) {
  j = json{{"v0_star", r.v0_star},
           {"nu", r.nu},
           {"welfare_ratio", r.welfare_ratio},
           {"sample_reduction", r.sample_reduction},
           {"has_savings", r.has_savings},
           {"savings", num_or_null(r.savings)}};
}
inline void from_json(const json& j, RctComparison& r) {
  j.at("v0_star").get_to(r.v0_star);
  j.at("nu").get_to(r.nu);
  j.at("welfare_ratio").get_to(r.welfare_ratio);
  j.at("sample_reduction").get_to(r.sample_reduction);
  j.at("has_savings").get_to(r.has_savings);
  r.savings = num_from(j.at("savings"), kNan);
}

inline void to_json(json& j, const CalibrationResult& r) {
  json hist = json::array();
  for (const auto& [lo, hi] : r.bracket_history)
    hist.push_back(json{{"lo", lo}, {"hi", hi}});
  j = json{{"lambda_star", r.lambda_star},
           {"achieved_welfare", r.achieved_welfare},
           {"target_v0", r.target_v0},
           {"tol_w", r.tol_w},
           {"iterations", r.iterations},
           {"bracket_history", hist},
           {"sol", r.sol},
           {"final_sim", r.final_sim}};
}
inline void from_json(const json& j, CalibrationResult& r) {
  j.at("lambda_star").get_to(r.lambda_star);
  j.at("achieved_welfare").get_to(r.achieved_welfare);
  j.at("target_v0").get_to(r.target_v0);
  j.at("tol_w").get_to(r.tol_w);
  j.at("iterations").get_to(r.iterations);
  r.bracket_history.clear();
  for (const auto& row : j.at("bracket_history"))
    r.bracket_history.emplace_back(row.at("lo").get<double>(),
                                   row.at("hi").get<double>());
  j.at("sol").get_to(r.sol);
  j.at("final_sim").get_to(r.final_sim);
}

inline void to_json(json& j, const SweepRow& r) {
  j = json{{"value", r.value},
           {"lambda_star", r.lambda_star},
           {"mean_tau", r.mean_tau},
           {"median_tau", r.median_tau},
           {"welfare", r.welfare},
           {"approval_rate", r.approval_rate}};
}
inline void from_json(const json& j, SweepRow& r) {
  j.at("value").get_to(r.value);
  j.at("lambda_star").get_to(r.lambda_star);
  j.at("mean_tau").get_to(r.mean_tau);
  j.at("median_tau").get_to(r.median_tau);
  j.at("welfare").get_to(r.welfare);
  j.at("approval_rate").get_to(r.approval_rate);
}

inline void to_json(json& j, const Benchmarks& b) {
  j = json{{"v0_alice", b.v0_alice}, {"bob_limit", b.bob_limit}};
}
inline void from_json(const json& j, Benchmarks& b) {
  j.at("v0_alice").get_to(b.v0_alice);
  j.at("bob_limit").get_to(b.bob_limit);
}

inline void to_json(json& j, const ConvergencePoint& p) {
  j = json{{"n", p.n},
           {"alice_welfare", p.alice_welfare},
           {"alice_se", p.alice_se},
           {"alice_ratio", p.alice_ratio},
           {"bob_welfare", p.bob_welfare},
           {"bob_se", p.bob_se},
           {"bob_ratio", p.bob_ratio},
           {"mean_tau", p.mean_tau},
           {"approval_rate", p.approval_rate},
           {"clamp_frac", p.clamp_frac}};
}
inline void from_json(const json& j, ConvergencePoint& p) {
  j.at("n").get_to(p.n);
  j.at("alice_welfare").get_to(p.alice_welfare);
  j.at("alice_se").get_to(p.alice_se);
  j.at("alice_ratio").get_to(p.alice_ratio);
  j.at("bob_welfare").get_to(p.bob_welfare);
  j.at("bob_se").get_to(p.bob_se);
  j.at("bob_ratio").get_to(p.bob_ratio);
  j.at("mean_tau").get_to(p.mean_tau);
  j.at("approval_rate").get_to(p.approval_rate);
  j.at("clamp_frac").get_to(p.clamp_frac);
}

inline void to_json(json& j, const ConvergenceTable& t) {
  j = json{{"benchmarks", t.benchmarks},
           {"reps", t.reps},
           {"seed", t.seed},
           {"points", t.points}};
}
inline void from_json(const json& j, ConvergenceTable& t) {
  j.at("benchmarks").get_to(t.benchmarks);
  j.at("reps").get_to(t.reps);
  j.at("seed").get_to(t.seed);
  j.at("points").get_to(t.points);
}

// ----- scenarios -----

inline void to_json(json& j, const BernoulliBlock& b) {
  j = json{{"theta0", b.theta0},
           {"nu2", b.nu2},
           {"xi", b.xi},
           {"T", num_or_null(b.T)},
           {"n_list", b.n_list},
           {"reps", b.reps}};
}
inline void from_json(const json& j, BernoulliBlock& b) {
  BernoulliBlock d;
  b.theta0 = j.value("theta0", d.theta0);
  b.nu2 = j.value("nu2", d.nu2);
  b.xi = j.value("xi", d.xi);
  b.T = j.contains("T") ? num_from(j.at("T"), kInf) : d.T;
  b.n_list = j.value("n_list", d.n_list);
  b.reps = j.value("reps", d.reps);
}

inline void to_json(json& j, const SweepBlock& s) {
  j = json{{"kind", s.kind}, {"values", s.values}};
}
inline void from_json(const json& j, SweepBlock& s) {
  SweepBlock d;
  s.kind = j.value("kind", d.kind);
  s.values = j.value("values", d.values);
}

inline void to_json(json& j, const Scenario& s) {
  j = json{{"schema_version", kSchemaVersion},
           {"name", s.name},
           {"prior", s.prior},
           {"util", s.util},
           {"cost", s.cost},
           {"grid", s.grid},
           {"simcfg", s.simcfg},
           {"v0_mode", s.v0_mode},
           {"v0", s.v0},
           {"bernoulli", s.bernoulli},
           {"sweep", s.sweep}};
}
inline void from_json(const json& j, Scenario& s) {
  Scenario d;
  j.at("name").get_to(s.name);
  j.at("prior").get_to(s.prior);
  j.at("util").get_to(s.util);
  j.at("cost").get_to(s.cost);
  s.grid = GridSpec{};
  if (j.contains("grid") && !j.at("grid").is_null())
    j.at("grid").get_to(s.grid);
  s.simcfg = j.value("simcfg", d.simcfg);
  s.v0_mode = j.value("v0_mode", d.v0_mode);
  s.v0 = j.value("v0", d.v0);
  s.bernoulli = j.value("bernoulli", d.bernoulli);
  s.sweep = j.value("sweep", d.sweep);
}

// ----- file plumbing -----

inline void atomic_write(const std::filesystem::path& path,
                         const std::string& content) {
  namespace fs = std::filesystem;
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open " + tmp.string());
    out << content;
    if (!out.flush())
      throw std::runtime_error("short write to " + tmp.string());
  }
  fs::rename(tmp, path);
}

inline void write_json(const std::filesystem::path& path, json j) {
  if (!j.contains("schema_version")) j["schema_version"] = kSchemaVersion;
  atomic_write(path, j.dump(2) + "\n");
}

inline json read_json(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  json j = json::parse(in);
  if (!j.is_object() || !j.contains("schema_version"))
    throw std::runtime_error(path.string() + ": missing schema_version");
  const int v = j.at("schema_version").get<int>();
  if (v != kSchemaVersion)
    throw std::runtime_error(path.string() + ": schema_version " +
                             std::to_string(v) + " unsupported (want " +
                             std::to_string(kSchemaVersion) + ")");
  return j;
}

// scenario file: builtin name, or a JSON file, optionally inheriting a
// builtin via {"base": "<builtin>", ...overrides} (RFC 7386 merge)
inline Scenario load_scenario(const std::string& path_or_name) {
  for (const std::string& name : builtin_scenario_names())
    if (path_or_name == name) return builtin_scenario(name);
  if (!std::filesystem::exists(path_or_name))
    throw std::runtime_error("scenario '" + path_or_name +
                             "' is neither a built-in name nor a file");
  json user = read_json(path_or_name);
  json merged;
  if (user.contains("base")) {
    const std::string base = user.at("base").get<std::string>();
    merged = json(builtin_scenario(base));
    user.erase("base");
    user.erase("schema_version");
    merged.merge_patch(user);
  } else {
    merged = std::move(user);
  }
  try {
    return finalize(merged.get<Scenario>());
  } catch (const json::exception& e) {
    throw std::runtime_error("scenario " + path_or_name + ": " + e.what());
  }
}

// ----- CSV emitters (%.12g, '.' decimal separator, header row) -----

namespace detail {

inline std::string fmt_g(double x) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.12g", x);
  return buf;
}

}  // namespace detail

inline std::string boundaries_csv(const BoundarySolution& sol) {
  std::string out = "rho,t,b_plus,b_minus\n";
  for (std::size_t i = 0; i < sol.rho_grid.size(); ++i) {
    out += detail::fmt_g(sol.rho_grid[i]);
    out += ',';
    out += detail::fmt_g(sol.t_grid[i]);
    out += ',';
    out += detail::fmt_g(sol.b_plus[i]);
    out += ',';
    out += detail::fmt_g(sol.b_minus[i]);
    out += '\n';
  }
  return out;
}

inline std::string histogram_csv(const Histogram& h) {
  std::string out = "bin_left,bin_right,count\n";
  const int n = static_cast<int>(h.counts.size());
  const double w = n > 0 ? (h.hi - h.lo) / n : 0.0;
  for (int i = 0; i < n; ++i) {
    out += detail::fmt_g(h.lo + i * w);
    out += ',';
    out += detail::fmt_g(i + 1 == n ? h.hi : h.lo + (i + 1) * w);
    out += ',';
    out += std::to_string(h.counts[static_cast<std::size_t>(i)]);
    out += '\n';
  }
  return out;
}

inline std::string sweep_csv(const SweepResult& r) {
  std::string out =
      "value,lambda_star,mean_tau,median_tau,welfare,approval_rate\n";
  for (const SweepRow& row : r.rows) {
    out += detail::fmt_g(row.value);
    out += ',';
    out += detail::fmt_g(row.lambda_star);
    out += ',';
    out += detail::fmt_g(row.mean_tau);
    out += ',';
    out += detail::fmt_g(row.median_tau);
    out += ',';
    out += detail::fmt_g(row.welfare);
    out += ',';
    out += detail::fmt_g(row.approval_rate);
    out += '\n';
  }
  return out;
}

inline std::string convergence_csv(const ConvergenceTable& t) {
  std::string out =
      "n,alice_welfare,alice_se,alice_ratio,bob_welfare,bob_se,bob_ratio,"
      "mean_tau,approval_rate,clamp_frac\n";
  for (const ConvergencePoint& p : t.points) {
    out += std::to_string(p.n);
    out += ',';
    out += detail::fmt_g(p.alice_welfare);
    out += ',';
    out += detail::fmt_g(p.alice_se);
    out += ',';
    out += detail::fmt_g(p.alice_ratio);
    out += ',';
    out += detail::fmt_g(p.bob_welfare);
    out += ',';
    out += detail::fmt_g(p.bob_se);
    out += ',';
    out += detail::fmt_g(p.bob_ratio);
    out += ',';
    out += detail::fmt_g(p.mean_tau);
    out += ',';
    out += detail::fmt_g(p.approval_rate);
    out += ',';
    out += detail::fmt_g(p.clamp_frac);
    out += '\n';
  }
  return out;
}

}  // namespace seqstop
