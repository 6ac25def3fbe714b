#pragma once

#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include "bermudan/hedge_io.hpp"
#include "bermudan/report.hpp"

namespace bermudan {

struct RunOptions {
  std::string scenario_path;
  std::string command;
  std::optional<int> grid_n;
  std::optional<double> tol;
  std::optional<std::uint64_t> seed;
  std::string out_dir;     // empty: no files
  std::string hedge_path;  // reduce only
  std::size_t mc_paths = 100000;
};

struct CommandResult {
  Json report;
  int exit_code = 0;
  std::string message;  // stderr diagnostic for a nonzero exit
};

inline const std::vector<std::string>& command_names() {
  static const std::vector<std::string> names{"check", "solve", "oracle", "reduce", "report"};
  return names;
}

namespace detail {

inline SolverConfig solver_config(const Scenario& s) {
  SolverConfig c;
  c.grid_n = s.solver.grid_n;
  c.resolution = s.solver.grid_n;
  c.tol = s.solver.tol;
  return c;
}

inline void write_file(const RunOptions& o, const std::string& name, const auto& table) {
  if (o.out_dir.empty()) return;
  std::ofstream f(std::filesystem::path(o.out_dir) / name, std::ios::binary);
  require(static_cast<bool>(f), ErrorKind::invalid_scenario, "cannot write " + name + " under " + o.out_dir);
  write_csv(f, table);
}

inline void write_json(const RunOptions& o, const std::string& name, const Json& j) {
  if (o.out_dir.empty()) return;
  std::ofstream f(std::filesystem::path(o.out_dir) / name, std::ios::binary);
  require(static_cast<bool>(f), ErrorKind::invalid_scenario, "cannot write " + name + " under " + o.out_dir);
  f << j.dump(2) << '\n';
}

struct Solved {
  Instance in;
  CaseSolution sol;
  StopModel model;
};

inline Solved solve_scenario(const Scenario& s, const Measure& mu, const Measure& nu) {
  Instance in = make_instance(mu, nu, s.a, s.b, solver_config(s));
  CaseSolution sol = solve(in);
  StopModel m = build_model(sol, in);
  return {std::move(in), std::move(sol), std::move(m)};
}

inline CommandResult run_check(const Scenario& s, const Measure* mu, const Measure& nu) {
  CommandResult r;
  if (!mu) {
    // time0 without mu: the initial law is the point mass at the mean of nu
    r.report["convex_order"] = {{"ordered", true}, {"initial_law", "delta_at_mean"}, {"mean", nu.mean()}};
    r.report["nu_is_density"] = nu.is_density();
    return r;
  }
  const ConvexOrderResult co = check_convex_order(*mu, nu, s.solver.tol);
  r.report["convex_order"] = to_json(co);
  if (!co.ordered) {
    r.exit_code = 3;
    r.message = "assumption-violated: marginals are not in convex order (worst k = " + fmt_double(co.worst_k) +
                ", gap " + fmt_double(co.worst_gap) + ", mean gap " + fmt_double(co.mean_gap) + ")";
    return r;
  }
  if (s.mode == ScenarioMode::bermudan_12) r.report["dispersion"] = to_json(check_dispersion(*mu, nu));
  return r;
}

inline CommandResult run_time0(const Scenario& s, const Measure& nu, const RunOptions& o, bool files) {
  CommandResult r;
  const Time0Result t = solve_time0(nu, s.a, s.b);
  r.report["time0"] = to_json(t);
  if (files) {
    const GridFunction psi = t.psi.sample(GridFunction::uniform_grid(nu.lo(), nu.hi(), 2001));
    write_file(o, "psi_star.csv", function_table(psi, "psi"));
  }
  return r;
}

inline CommandResult run_solve(const Scenario& s, const Measure& mu, const Measure& nu, const RunOptions& o,
                               bool files) {
  CommandResult r;
  const Solved st = solve_scenario(s, mu, nu);
  const PrimalBreakdown pb = primal_breakdown(st.model);
  Json& j = r.report;
  j["instance"] = instance_json(st.in);
  j["solution"] = to_json(st.sol);
  j["model"] = to_json(st.model);
  j["primal"] = to_json(pb);
  j["dual_value"] = st.sol.dual_value;
  j["gap"] = pb.value - st.sol.dual_value;
  j["canonical_value"] = canonical_value(st.model);
  j["coupling"] = to_json(check_coupling(st.model, 512));
  j["monte_carlo"] = to_json(sample_paths(st.model, o.mc_paths, s.seed), s.seed);
  if (!files) return r;

  const GridFunction psi = psi_star_grid(st.in, st.sol);
  HedgingSession hs([&](double x) { return st.in.a()(x); }, [&](double x) { return st.in.b()(x); }, *st.in.mu,
                    *st.in.nu);
  const Superhedge h = hs.generate(psi);
  j["hedge"] = {{"cost", to_json(h.cost)}, {"verified", h.verified}};
  write_file(o, "psi_star.csv", function_table(h.psi, "psi"));
  write_file(o, "phi_star.csv", function_table(h.phi, "phi"));
  write_file(o, "curtain.csv", curtain_table(*st.in.right));
  write_file(o, "curtain_left.csv", curtain_table(*st.in.left));
  write_file(o, "regions.csv", region_table(st.model));
  return r;
}

inline CommandResult run_oracle(const Scenario& s, const Measure& mu, const Measure& nu, const RunOptions& o) {
  CommandResult r;
  if (!s.oracle.enabled) {
    r.report["oracle"] = {{"enabled", false}};
    return r;
  }
  const Instance in = make_instance(mu, nu, s.a, s.b, solver_config(s));
  const double dual = solve(in).dual_value;
  const RealFn a = [&](double x) { return s.a(x); }, b = [&](double y) { return s.b(y); };
  Json levels = Json::array();
  bool monotone = true;
  double last = INFINITY;
  for (int d : {4, 2, 1}) {
    const int nm = s.oracle.n_mu / d, nn = s.oracle.n_nu / d;
    const LatticeInstance L = discretize(mu, nu, nm, nn, a, b);
    const LPSolution sol = solve_primal_lp(L);
    const double err = std::abs(sol.value - dual);
    monotone = monotone && err < last;
    last = err;
    levels.push_back({{"n_mu", nm},
                      {"n_nu", nn},
                      {"value", sol.value},
                      {"error", err},
                      {"residual", sol.residual},
                      {"iterations", sol.iterations},
                      {"y_shift", L.y_shift},
                      {"potential_gap", L.potential_gap}});
    if (d == 1 && !o.out_dir.empty()) {
      std::ofstream f(std::filesystem::path(o.out_dir) / "optimizer.csv", std::ios::binary);
      require(static_cast<bool>(f), ErrorKind::invalid_scenario, "cannot write optimizer.csv under " + o.out_dir);
      write_optimizer_csv(f, L, sol);
    }
  }
  r.report["oracle"] = {{"enabled", true}, {"dual_value", dual}, {"levels", levels}, {"monotone", monotone}};
  return r;
}

inline CommandResult run_reduce(const Scenario& s, const Measure& mu, const Measure& nu, const RunOptions& o) {
  CommandResult r;
  require(!o.hedge_path.empty(), ErrorKind::invalid_scenario, "reduce needs --hedge <file>");
  const Superhedge input = load_hedge(o.hedge_path);
  HedgingSession hs([&](double x) { return s.a(x); }, [&](double y) { return s.b(y); }, mu, nu);
  const auto trail = hs.reduce(input);
  Json stages = Json::array();
  bool non_increasing = true;
  for (std::size_t k = 0; k < trail.size(); ++k) {
    const auto& st = trail[k];
    if (k > 0) non_increasing = non_increasing && st.hedge.cost.total <= trail[k - 1].hedge.cost.total + 1e-8;
    stages.push_back({{"stage", st.name},
                      {"cost", to_json(st.hedge.cost)},
                      {"verified", st.hedge.verified},
                      {"excess_envelope_sup", hs.excess_envelope_sup(st.hedge.psi)}});
  }
  r.report["reduce"] = {{"trail", stages}, {"non_increasing", non_increasing},
                     {"final_excess_envelope_sup", hs.excess_envelope_sup(trail.back().hedge.psi)}};
  if (!o.out_dir.empty()) {
    std::ofstream f(std::filesystem::path(o.out_dir) / "collapsed_hedge.csv", std::ios::binary);
    require(static_cast<bool>(f), ErrorKind::invalid_scenario, "cannot write collapsed_hedge.csv under " + o.out_dir);
    write_hedge(f, trail.back().hedge);
    CsvTable t;
    t.columns = {"stage", "cost"};
    for (std::size_t k = 0; k < trail.size(); ++k) t.rows.push_back({static_cast<double>(k), trail[k].hedge.cost.total});
    write_file(o, "cost_trail.csv", t);
  }
  return r;
}

}  // namespace detail

inline Scenario apply_overrides(Scenario s, const RunOptions& o) {
  if (o.grid_n) {
    require(*o.grid_n >= 16, ErrorKind::invalid_scenario, "--grid-n must be >= 16");
    s.solver.grid_n = *o.grid_n;
  }
  if (o.tol) {
    require(*o.tol > 0.0 && std::isfinite(*o.tol), ErrorKind::invalid_scenario, "--tol must be positive");
    s.solver.tol = *o.tol;
  }
  if (o.seed) s.seed = *o.seed;
  return s;
}

inline CommandResult run_command(const RunOptions& o) {
  using namespace detail;
  bool known = false;
  for (const auto& c : command_names()) known = known || c == o.command;
  require(known, ErrorKind::invalid_scenario, "unknown command '" + o.command + "'");
  const Scenario s = apply_overrides(load_scenario(o.scenario_path), o);
  if (!o.out_dir.empty()) {
    std::error_code ec;
    std::filesystem::create_directories(o.out_dir, ec);
    require(!ec, ErrorKind::invalid_scenario, "cannot create " + o.out_dir);
  }
  const Measure nu = make_measure(s.nu);
  std::optional<Measure> mu;
  if (s.has_mu) mu = make_measure(s.mu);

  CommandResult r;
  if (o.command == "check") {
    r = run_check(s, mu ? &*mu : nullptr, nu);
  } else if (s.mode == ScenarioMode::time0) {
    require(o.command == "solve" || o.command == "report", ErrorKind::invalid_scenario,
            "time0 scenarios support check, solve and report");
    r = run_time0(s, nu, o, o.command == "report");
  } else if (o.command == "solve" || o.command == "report") {
    r = run_solve(s, *mu, nu, o, o.command == "report");
  } else if (o.command == "oracle") {
    r = run_oracle(s, *mu, nu, o);
  } else {
    r = run_reduce(s, *mu, nu, o);
  }
  Json full{{"schema", 1}, {"command", o.command}, {"scenario", scenario_json(s)}, {"exit_code", r.exit_code}};
  full.update(r.report);
  r.report = std::move(full);
  write_json(o, o.command + ".json", r.report);
  return r;
}

}  // namespace bermudan
