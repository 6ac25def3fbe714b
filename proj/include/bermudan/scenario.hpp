#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "bermudan/error.hpp"
#include "bermudan/measure.hpp"
#include "bermudan/payoff.hpp"
#include "json.hpp"

namespace bermudan {

using Json = nlohmann::json;

enum class ScenarioMode { bermudan_12, time0 };

inline std::string to_string(ScenarioMode m) { return m == ScenarioMode::time0 ? "time0" : "bermudan_12"; }

struct OracleSettings {
  int n_mu = 200, n_nu = 400;
  bool enabled = true;
};

struct SolverSettings {
  int grid_n = 256;
  double trunc_quantile = 1e-9;
  double tol = 1e-9;
};

struct Scenario {
  std::string name;
  ScenarioMode mode = ScenarioMode::bermudan_12;
  bool has_mu = false;
  MeasureSpec mu, nu;
  Payoff a = Payoff::quadratic(0.0, 0.0), b = Payoff::quadratic(0.0, 1.0);
  Json a_json, b_json;  // descriptors as given, echoed in reports
  SolverSettings solver;
  OracleSettings oracle;
  std::uint64_t seed = 0;
};

namespace detail {

[[noreturn]] inline void bad(const std::string& where, const std::string& what) {
  fail(ErrorKind::invalid_scenario, where + ": " + what);
}

inline void only_keys(const Json& j, const std::string& where, std::initializer_list<const char*> keys) {
  if (!j.is_object()) bad(where, "expected an object");
  std::set<std::string> ok(keys.begin(), keys.end());
  for (auto it = j.begin(); it != j.end(); ++it)
    if (!ok.count(it.key())) bad(where, "unknown key '" + it.key() + "'");
}

inline double number(const Json& j, const std::string& where, const char* key) {
  if (!j.contains(key)) bad(where, std::string("missing '") + key + "'");
  const Json& v = j.at(key);
  if (!v.is_number()) bad(where, std::string("'") + key + "' must be a number");
  const double d = v.get<double>();
  if (!std::isfinite(d)) bad(where, std::string("'") + key + "' must be finite");
  return d;
}

inline double number_or(const Json& j, const std::string& where, const char* key, double dflt) {
  return j.contains(key) ? number(j, where, key) : dflt;
}

inline std::vector<double> numbers(const Json& j, const std::string& where, const char* key) {
  if (!j.contains(key) || !j.at(key).is_array()) bad(where, std::string("'") + key + "' must be an array");
  std::vector<double> out;
  for (const auto& v : j.at(key)) {
    if (!v.is_number()) bad(where, std::string("'") + key + "' must hold numbers");
    out.push_back(v.get<double>());
    if (!std::isfinite(out.back())) bad(where, std::string("'") + key + "' must be finite");
  }
  return out;
}

inline std::string family_of(const Json& j, const std::string& where) {
  if (!j.is_object() || !j.contains("family") || !j.at("family").is_string()) bad(where, "missing 'family'");
  return j.at("family").get<std::string>();
}

inline MeasureSpec parse_measure(const Json& j, const std::string& where, double trunc_quantile) {
  const std::string fam = family_of(j, where);
  MeasureSpec s;
  if (fam == "gaussian") {
    only_keys(j, where, {"family", "sigma", "mean"});
    s = MeasureSpec::gaussian(number(j, where, "sigma"), number_or(j, where, "mean", 0.0));
    if (!(s.sigma > 0.0)) bad(where, "sigma must be positive");
  } else if (fam == "uniform" || fam == "triangle") {
    only_keys(j, where, {"family", "half_width", "center"});
    const double w = number(j, where, "half_width"), c = number_or(j, where, "center", 0.0);
    if (!(w > 0.0)) bad(where, "half_width must be positive");
    s = fam == "uniform" ? MeasureSpec::uniform(w, c) : MeasureSpec::triangle(w, c);
  } else if (fam == "table") {
    only_keys(j, where, {"family", "xs", "densities"});
    s = MeasureSpec::table(numbers(j, where, "xs"), numbers(j, where, "densities"));
    if (s.xs.size() < 2 || s.xs.size() != s.densities.size()) bad(where, "table needs >= 2 matching nodes");
  } else if (fam == "atoms") {
    only_keys(j, where, {"family", "locs", "weights"});
    s = MeasureSpec::atoms(numbers(j, where, "locs"), numbers(j, where, "weights"));
    if (s.locs.empty() || s.locs.size() != s.weights.size()) bad(where, "atoms need matching locs and weights");
  } else {
    bad(where, "unknown measure family '" + fam + "'");
  }
  s.trunc_quantile = trunc_quantile;
  return s;
}

// the three checkable convex families; anything else is rejected
inline Payoff parse_payoff(const Json& j, const std::string& where) {
  const std::string fam = family_of(j, where);
  if (fam == "quadratic") {
    only_keys(j, where, {"family", "c0", "c2"});
    return Payoff::quadratic(number(j, where, "c0"), number(j, where, "c2"));
  }
  if (fam == "pwl") {
    only_keys(j, where, {"family", "breakpoints", "values"});
    auto xs = numbers(j, where, "breakpoints"), vs = numbers(j, where, "values");
    if (xs.size() < 2 || xs.size() != vs.size()) bad(where, "pwl needs >= 2 matching breakpoints and values");
    for (std::size_t k = 1; k < xs.size(); ++k)
      if (!(xs[k] > xs[k - 1])) bad(where, "pwl breakpoints must increase");
    return Payoff::pwl(std::move(xs), std::move(vs));
  }
  if (fam == "max_of_lines") {
    only_keys(j, where, {"family", "lines"});
    if (!j.contains("lines") || !j.at("lines").is_array() || j.at("lines").empty())
      bad(where, "'lines' must be a non-empty array of [slope, intercept]");
    std::vector<Line> lines;
    for (const auto& l : j.at("lines")) {
      if (!l.is_array() || l.size() != 2 || !l[0].is_number() || !l[1].is_number())
        bad(where, "each line is [slope, intercept]");
      lines.push_back({l[0].get<double>(), l[1].get<double>()});
    }
    return Payoff::max_of_lines(std::move(lines));
  }
  bad(where, "unknown payoff family '" + fam + "' (quadratic, pwl, max_of_lines)");
}

}  // namespace detail

inline Scenario parse_scenario(const Json& j) {
  using namespace detail;
  only_keys(j, "scenario", {"schema", "name", "mode", "mu", "nu", "payoffs", "solver", "oracle", "seed"});
  if (!j.contains("schema") || !j.at("schema").is_number_integer() || j.at("schema").get<int>() != 1)
    bad("scenario", "'schema' must be 1");
  Scenario s;
  if (j.contains("name")) {
    if (!j.at("name").is_string()) bad("scenario", "'name' must be a string");
    s.name = j.at("name").get<std::string>();
  }
  if (j.contains("mode")) {
    const Json& m = j.at("mode");
    if (!m.is_string()) bad("scenario", "'mode' must be a string");
    if (m == "bermudan_12") s.mode = ScenarioMode::bermudan_12;
    else if (m == "time0") s.mode = ScenarioMode::time0;
    else bad("scenario", "mode must be bermudan_12 or time0");
  }
  if (j.contains("solver")) {
    const Json& v = j.at("solver");
    only_keys(v, "solver", {"grid_n", "trunc_quantile", "tol"});
    if (v.contains("grid_n")) {
      if (!v.at("grid_n").is_number_integer()) bad("solver", "'grid_n' must be an integer");
      s.solver.grid_n = v.at("grid_n").get<int>();
    }
    s.solver.trunc_quantile = number_or(v, "solver", "trunc_quantile", s.solver.trunc_quantile);
    s.solver.tol = number_or(v, "solver", "tol", s.solver.tol);
  }
  if (s.solver.grid_n < 16) bad("solver", "grid_n must be >= 16");
  if (!(s.solver.tol > 0.0)) bad("solver", "tol must be positive");
  if (!(s.solver.trunc_quantile > 0.0 && s.solver.trunc_quantile < 0.01))
    bad("solver", "trunc_quantile must lie in (0, 0.01)");
  if (j.contains("oracle")) {
    const Json& v = j.at("oracle");
    only_keys(v, "oracle", {"n_mu", "n_nu", "enabled"});
    for (const char* k : {"n_mu", "n_nu"})
      if (v.contains(k) && !v.at(k).is_number_integer()) bad("oracle", std::string("'") + k + "' must be an integer");
    if (v.contains("n_mu")) s.oracle.n_mu = v.at("n_mu").get<int>();
    if (v.contains("n_nu")) s.oracle.n_nu = v.at("n_nu").get<int>();
    if (v.contains("enabled")) {
      if (!v.at("enabled").is_boolean()) bad("oracle", "'enabled' must be a boolean");
      s.oracle.enabled = v.at("enabled").get<bool>();
    }
  }
  if (s.oracle.n_mu < 8 || s.oracle.n_nu < 8) bad("oracle", "n_mu and n_nu must be >= 8");
  if (j.contains("seed")) {
    if (!j.at("seed").is_number_unsigned()) bad("scenario", "'seed' must be a non-negative integer");
    s.seed = j.at("seed").get<std::uint64_t>();
  }

  if (!j.contains("nu")) bad("scenario", "missing 'nu'");
  s.nu = parse_measure(j.at("nu"), "nu", s.solver.trunc_quantile);
  if (j.contains("mu")) {
    s.mu = parse_measure(j.at("mu"), "mu", s.solver.trunc_quantile);
    s.has_mu = true;
  } else if (s.mode == ScenarioMode::bermudan_12) {
    bad("scenario", "missing 'mu'");
  }

  if (!j.contains("payoffs")) bad("scenario", "missing 'payoffs'");
  const Json& p = j.at("payoffs");
  only_keys(p, "payoffs", {"a", "b"});
  if (!p.contains("a") || !p.contains("b")) bad("payoffs", "need both 'a' and 'b'");
  s.a_json = p.at("a");
  s.b_json = p.at("b");
  s.a = parse_payoff(s.a_json, "payoffs.a");
  s.b = parse_payoff(s.b_json, "payoffs.b");

  // family-level checks: a violated precondition, not a malformed file
  require(s.a.convex_by_family(), ErrorKind::invalid_payoffs, "payoff a is not convex");
  require(s.b.convex_by_family(), ErrorKind::invalid_payoffs, "payoff b is not convex");
  if (s.mode == ScenarioMode::bermudan_12) {
    const double reach = 10.0 * (1.0 + std::abs(s.nu.center) + s.nu.sigma + s.nu.half_width);
    require(probe_symmetric(s.a, reach) && probe_symmetric(s.b, reach), ErrorKind::invalid_payoffs,
            "bermudan_12 needs even payoffs");
  }
  return s;
}

inline Scenario load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::invalid_scenario, "cannot open " + path);
  Json j;
  try {
    j = Json::parse(in);
  } catch (const Json::parse_error& e) {
    fail(ErrorKind::invalid_scenario, path + ": " + e.what());
  }
  return parse_scenario(j);
}

}  // namespace bermudan
