#pragma once

#include <string>
#include <vector>

#include "bermudan/lp_oracle.hpp"
#include "bermudan/primal_models.hpp"
#include "bermudan/scenario.hpp"
#include "bermudan/symmetric_solver.hpp"
#include "bermudan/time0.hpp"

namespace bermudan {

// JSON views of the solver objects. Keys are sorted by the json library, so
// equal inputs give equal bytes. Nothing here records time or paths.

inline Json to_json(const Line& l) { return Json{{"slope", l.slope}, {"intercept", l.intercept}}; }

inline Json scenario_json(const Scenario& s) {
  Json j{{"name", s.name},
         {"mode", to_string(s.mode)},
         {"seed", s.seed},
         {"payoffs", {{"a", s.a_json}, {"b", s.b_json}}},
         {"solver", {{"grid_n", s.solver.grid_n}, {"trunc_quantile", s.solver.trunc_quantile}, {"tol", s.solver.tol}}},
         {"oracle", {{"n_mu", s.oracle.n_mu}, {"n_nu", s.oracle.n_nu}, {"enabled", s.oracle.enabled}}}};
  auto m = [](const MeasureSpec& spec) {
    Json o{{"family", to_string(spec.family)}};
    switch (spec.family) {
      case MeasureFamily::gaussian: o["sigma"] = spec.sigma; o["mean"] = spec.center; break;
      case MeasureFamily::uniform:
      case MeasureFamily::triangle: o["half_width"] = spec.half_width; o["center"] = spec.center; break;
      case MeasureFamily::table: o["xs"] = spec.xs; o["densities"] = spec.densities; break;
      case MeasureFamily::atoms: o["locs"] = spec.locs; o["weights"] = spec.weights; break;
    }
    return o;
  };
  if (s.has_mu) j["mu"] = m(s.mu);
  j["nu"] = m(s.nu);
  return j;
}

inline Json to_json(const ConvexOrderResult& r) {
  return Json{{"ordered", r.ordered}, {"mean_gap", r.mean_gap}, {"worst_k", r.worst_k}, {"worst_gap", r.worst_gap}};
}

inline Json to_json(const DispersionResult& d) { return Json{{"e", d.e}, {"alpha", d.alpha}, {"beta", d.beta}}; }

inline Json instance_json(const Instance& in) {
  return Json{{"x0", in.x0},
              {"g0", in.g0},
              {"e", in.e()},
              {"alpha", in.alpha()},
              {"beta", in.beta()},
              {"a_substituted", in.pay.substituted},
              {"a_equals_b", in.pay.identical},
              {"b_at_beta", in.pay.b_limit_at_beta}};
}

inline Json to_json(const CaseSolution& s) {
  Json lines = Json::object();
  for (const auto& [k, l] : s.lines) lines[k] = to_json(l);
  return Json{{"label", to_string(s.label)},
              {"thresholds", s.thresholds},
              {"lines", lines},
              {"dual_value", s.dual_value},
              {"l0", s.l0},
              {"a0", s.a0},
              {"a_x0", s.ax0},
              {"degenerate_root", s.degenerate_root},
              {"checks", s.checks}};
}

inline double region_mass(const Measure& mu, const Region& r) {
  double m = 0.0;
  for (const auto& [lo, hi] : r.xs) m += mu.mass(lo, hi);
  return m;
}

inline Json to_json(const StopModel& m) {
  Json regions = Json::array();
  for (const auto& r : m.regions) {
    Json xs = Json::array();
    for (const auto& [lo, hi] : r.xs) xs.push_back({lo, hi});
    regions.push_back({{"name", r.name},
                       {"source", to_string(r.source)},
                       {"stop_time", r.stop_time},
                       {"intervals", xs},
                       {"mu_mass", region_mass(*m.mu, r)}});
  }
  return Json{{"label", to_string(m.label)},
              {"randomization_required", m.randomization_required},
              {"regions", regions}};
}

// one row per interval: region,source,stop_time,lo,hi,mu_mass
inline TextTable region_table(const StopModel& m) {
  TextTable t;
  t.columns = {"region", "source", "stop_time", "lo", "hi", "mu_mass"};
  for (const auto& r : m.regions)
    for (const auto& [lo, hi] : r.xs)
      t.rows.push_back({r.name, std::string(to_string(r.source)), std::to_string(r.stop_time), fmt_double(lo),
                        fmt_double(hi), fmt_double(m.mu->mass(lo, hi))});
  return t;
}

inline Json to_json(const PrimalBreakdown& p) {
  Json parts = Json::array();
  for (const auto& [k, v] : p.parts) parts.push_back({{"region", k}, {"value", v}});
  return Json{{"value", p.value}, {"parts", parts}};
}

inline Json to_json(const CouplingReport& c) {
  Json regions = Json::array();
  for (const auto& r : c.regions)
    regions.push_back({{"name", r.name},
                       {"mu_mass", r.mu_mass},
                       {"pushed_mass", r.pushed_mass},
                       {"mean_residual", r.mean_residual},
                       {"bookkeeping_error", r.bookkeeping_error()}});
  return Json{{"bins", c.bins},
              {"marginal_sup_error", c.marginal_sup_error},
              {"worst_y", c.worst_y},
              {"mean_residual", c.mean_residual},
              {"bookkeeping_error", c.bookkeeping_error},
              {"regions", regions}};
}

inline Json to_json(const MonteCarloResult& r, std::uint64_t seed) {
  return Json{{"paths", r.n},   {"seed", seed},       {"mean", r.mean},
              {"stddev", r.stddev}, {"ci99_lo", r.ci_lo}, {"ci99_hi", r.ci_hi}};
}

inline Json to_json(const Time0Result& r) {
  return Json{{"branch", to_string(r.branch)},
              {"mean", r.mean},
              {"a_mean", r.a_mean},
              {"f", r.f},
              {"g", r.g},
              {"Lambda", r.Lambda},
              {"value", r.value},
              {"canonical_bound", r.canonical_bound},
              {"excess", r.excess},
              {"stop_mass", r.stop_mass},
              {"line", to_json(r.line)},
              {"barycenter_residual", r.barycenter_residual},
              {"chord_residual", r.chord_residual}};
}

inline Json to_json(const HedgeCost& c) {
  return Json{{"phi_pos", c.phi_pos}, {"phi_neg", c.phi_neg}, {"psi_pos", c.psi_pos},
              {"psi_neg", c.psi_neg}, {"total", c.total}};
}

inline CsvTable curtain_table(const CurtainMap& m) {
  CsvTable t;
  t.columns = {"x", "f", "g"};
  for (std::size_t k = 0; k < m.nodes().size(); ++k) t.rows.push_back({m.nodes()[k], m.f_nodes()[k], m.g_nodes()[k]});
  return t;
}

inline CsvTable function_table(const GridFunction& f, const std::string& name) {
  CsvTable t;
  t.columns = {"x", name};
  for (std::size_t k = 0; k < f.size(); ++k) t.rows.push_back({f.x(k), f.v(k)});
  return t;
}

}  // namespace bermudan
