#pragma once

#include <algorithm>
#include <cmath>
#include <string>

#include "bermudan/error.hpp"
#include "bermudan/measure.hpp"
#include "bermudan/numeric/roots.hpp"
#include "bermudan/payoff.hpp"
#include "bermudan/symmetric_solver.hpp"

namespace bermudan {

// Initial law delta at the mean of nu, choice of stopping at time 0 (payoff a) or 1 (payoff b).
struct Time0Result {
  enum class Branch { interior, never_stop, always_stop, no_interior };
  Branch branch = Branch::interior;
  double mean = 0.0, a_mean = 0.0;
  double f = 0.0, g = 0.0, Lambda = 0.0;
  double value = 0.0;
  double canonical_bound = 0.0;  // a(mean) v int b dnu
  double excess = 0.0;           // value - canonical_bound
  double stop_mass = 0.0;        // nu((f, g))
  PsiStar psi;
  Line line;
  double barycenter_residual = 0.0, chord_residual = 0.0;
};

inline std::string to_string(Time0Result::Branch b) {
  switch (b) {
    case Time0Result::Branch::interior: return "interior";
    case Time0Result::Branch::never_stop: return "never_stop";
    case Time0Result::Branch::always_stop: return "always_stop";
    case Time0Result::Branch::no_interior: return "no_interior";
  }
  return "unknown";
}

inline Time0Result solve_time0(const Measure& nu, const Payoff& a, const Payoff& b) {
  require(nu.is_density(), ErrorKind::assumption_violated, "time-0 solver needs a density law");
  const PiecewiseDensity& d = nu.table();
  const double lo = nu.lo(), hi = nu.hi();
  require(probe_convex(b, lo, hi), ErrorKind::invalid_payoffs, "b is not convex");
  Time0Result r;
  r.mean = nu.mean();
  r.a_mean = a(r.mean);
  const double nb = r.mean;
  const std::vector<double> kb = b.kinks(lo, hi);
  const double int_b = nu.integrate([&](double y) { return b(y); }, kb, 256);
  r.canonical_bound = std::max(r.a_mean, int_b);

  // f(g): barycenter of nu on (f, g) equals the mean
  auto f_of = [&](double g) {
    if (!(d.moment(lo, g, nb) < 0.0)) return lo;
    return numeric::bisect_increasing([&](double f) { return d.moment(f, g, nb); }, lo, nb).x;
  };
  auto chord_at_mean = [&](double g) {
    const double f = f_of(g);
    if (!(g > f)) return b(nb);
    return Line::through(f, b(f), g, b(g))(nb);
  };

  auto finish = [&](Line l) {
    r.line = l;
    r.psi = PsiStar({{-INFINITY, INFINITY, PsiStar::Kind::max_b_lines, {l}}}, a, b);
  };

  if (!(b(nb) < r.a_mean)) {
    r.branch = Time0Result::Branch::never_stop;
    r.value = int_b;
    r.f = r.g = nb;
    r.psi = PsiStar({{-INFINITY, INFINITY, PsiStar::Kind::b, {}}}, a, b);
    return r;
  }
  // the chord condition sweeps monotonically as (f, g) widens
  const double g_top = hi - 1e-12 * (hi - lo);
  if (!(chord_at_mean(g_top) > r.a_mean)) {
    // stopping everything at time 0 is optimal
    r.branch = Time0Result::Branch::always_stop;
    r.value = r.a_mean;
    r.f = lo;
    r.g = hi;
    r.stop_mass = 1.0;
    const double h = 1e-6 * (hi - lo);
    const double slope = (b(nb + h) - b(nb - h)) / (2 * h);  // a subgradient of convex b
    finish(Line{slope, r.a_mean - slope * nb});
    r.excess = r.value - r.canonical_bound;
    return r;
  }
  const auto root = numeric::bisect_increasing(
      [&](double g) { return chord_at_mean(g) - r.a_mean; }, nb, g_top);
  if (!root.bracketed) {
    r.branch = Time0Result::Branch::no_interior;
    r.value = r.canonical_bound;
    r.psi = PsiStar({{-INFINITY, INFINITY, PsiStar::Kind::b, {}}}, a, b);
    return r;
  }
  r.g = root.x;
  r.f = f_of(r.g);
  r.Lambda = (b(r.g) - b(r.f)) / (r.g - r.f);
  finish(Line{r.Lambda, r.a_mean - r.Lambda * nb});
  r.barycenter_residual = std::abs(d.moment(r.f, r.g, nb));
  r.chord_residual = std::abs(r.Lambda - (r.a_mean - b(r.f)) / (nb - r.f));
  r.stop_mass = nu.mass(r.f, r.g);
  std::vector<double> br = kb;
  br.push_back(r.f);
  br.push_back(r.g);
  const Line L = r.line;
  r.value = nu.integrate([&](double y) { return std::max(b(y), L(y)); }, br, 256);
  r.excess = r.value - r.canonical_bound;
  return r;
}

}  // namespace bermudan
