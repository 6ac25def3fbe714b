#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "bermudan/convex_order.hpp"
#include "bermudan/couplings.hpp"
#include "bermudan/error.hpp"
#include "bermudan/grid_function.hpp"
#include "bermudan/measure.hpp"
#include "bermudan/numeric/roots.hpp"
#include "bermudan/payoff.hpp"

namespace bermudan {

struct PayoffPair {
  Payoff a_input, b;  // as given
  Payoff a;           // a v b
  bool substituted = false;
  bool symmetric = false;
  bool identical = false;  // a v b == b on the probe grid
  double b_limit_at_beta = 0.0;
};

// Replaces a by a v b after checking convexity of b and of a v b on [lo, hi].
inline PayoffPair normalize_payoffs(const Payoff& a, const Payoff& b, double lo, double hi) {
  require(probe_convex(b, lo, hi), ErrorKind::invalid_payoffs, "b is not convex");
  PayoffPair p{a, b, Payoff::maximum(a, b)};
  require(probe_convex(p.a, lo, hi), ErrorKind::invalid_payoffs, "a v b is not convex");
  const int n = 4001;
  double gap_max = 0.0, below = 0.0, scale = 1.0;
  for (int i = 0; i < n; ++i) {
    const double x = lo + (hi - lo) * i / (n - 1);
    scale = std::max({scale, std::abs(a(x)), std::abs(b(x))});
    below = std::max(below, b(x) - a(x));
    gap_max = std::max(gap_max, p.a(x) - b(x));
  }
  p.substituted = below > 0.0;
  p.identical = gap_max <= 1e-14 * scale;
  const double h = std::max(std::abs(lo), std::abs(hi));
  p.symmetric = probe_symmetric(p.a, h) && probe_symmetric(b, h);
  p.b_limit_at_beta = b(hi);
  return p;
}

enum class CaseLabel { C1, C2, C3, C3_tilde, always_stop, always_continue };

inline std::string to_string(CaseLabel c) {
  switch (c) {
    case CaseLabel::C1: return "C1";
    case CaseLabel::C2: return "C2";
    case CaseLabel::C3: return "C3";
    case CaseLabel::C3_tilde: return "C3_tilde";
    case CaseLabel::always_stop: return "always_stop";
    case CaseLabel::always_continue: return "always_continue";
  }
  return "unknown";
}

struct SolverConfig {
  int grid_n = 256;     // nodes of stored curtain/HK maps
  int resolution = 256;  // quadrature nodes per primal region
  double tol = 1e-9;     // convex-order tolerance
};

// Symmetric dispersion instance with the right/left curtains and x0 solved.
struct Instance {
  std::shared_ptr<const Measure> mu, nu;
  PayoffPair pay;
  DispersionResult disp;
  SolverConfig config;
  std::shared_ptr<const CurtainMap> right, left;
  double x0 = 0.0, g0 = 0.0;

  double e() const { return disp.e; }
  double alpha() const { return disp.alpha; }
  double beta() const { return disp.beta; }
  const Payoff& a() const { return pay.a; }
  const Payoff& b() const { return pay.b; }
  // boundaries of the right curtain by a fresh solve
  std::pair<double, double> fg_right(double x) const {
    const auto c = right->solve(x);
    return {c.f, c.g};
  }
};

inline Instance make_instance(const Measure& mu, const Measure& nu, const Payoff& a, const Payoff& b,
                              SolverConfig cfg = {}) {
  require(mu.is_density() && nu.is_density(), ErrorKind::assumption_violated,
          "the solver needs density marginals");
  const auto order = check_convex_order(mu, nu, cfg.tol);
  if (!order.ordered)
    fail(ErrorKind::assumption_violated, "marginals are not in convex order (worst k = " +
                                             std::to_string(order.worst_k) + ")");
  const DispersionResult disp = check_dispersion(mu, nu);
  PayoffPair pay = normalize_payoffs(a, b, nu.lo(), nu.hi());
  require(pay.symmetric, ErrorKind::assumption_violated, "payoffs must be symmetric");
  Instance in{std::make_shared<const Measure>(mu), std::make_shared<const Measure>(nu),
              std::move(pay), disp, cfg, nullptr, nullptr};
  in.right = std::make_shared<const CurtainMap>(solve_right_curtain(mu, nu, in.e(), cfg.grid_n));
  in.left = std::make_shared<const CurtainMap>(solve_left_curtain(*in.right));
  in.x0 = find_x0(*in.right);
  in.g0 = in.right->solve(in.x0).g;
  return in;
}

// psi* as a list of pieces on consecutive intervals covering the real line.
class PsiStar {
 public:
  enum class Kind { b, a, line, max_b_lines };
  struct Piece {
    double lo, hi;
    Kind kind;
    std::vector<Line> lines;
  };

  PsiStar() = default;
  PsiStar(std::vector<Piece> pieces, Payoff a, Payoff b)
      : pieces_(std::move(pieces)), a_(std::make_shared<Payoff>(std::move(a))),
        b_(std::make_shared<Payoff>(std::move(b))) {}

  double operator()(double x) const {
    for (const auto& p : pieces_)
      if (x <= p.hi || &p == &pieces_.back()) return eval(p, x);
    return eval(pieces_.back(), x);
  }

  const std::vector<Piece>& pieces() const { return pieces_; }

  std::vector<double> breaks() const {
    std::vector<double> br;
    for (const auto& p : pieces_) {
      if (std::isfinite(p.lo)) br.push_back(p.lo);
      if (std::isfinite(p.hi)) br.push_back(p.hi);
    }
    return br;
  }

  GridFunction sample(const std::vector<double>& grid) const {
    return GridFunction::sample(grid, *this);
  }

 private:
  double eval(const Piece& p, double x) const {
    switch (p.kind) {
      case Kind::b: return (*b_)(x);
      case Kind::a: return (*a_)(x);
      case Kind::line: return p.lines.front()(x);
      case Kind::max_b_lines: {
        double v = (*b_)(x);
        for (const auto& l : p.lines) v = std::max(v, l(x));
        return v;
      }
    }
    return 0.0;
  }

  std::vector<Piece> pieces_;
  std::shared_ptr<const Payoff> a_, b_;
};

struct CaseSolution {
  CaseLabel label = CaseLabel::C1;
  std::map<std::string, double> thresholds;
  std::map<std::string, Line> lines;
  PsiStar psi;
  double dual_value = 0.0;
  // classification diagnostics
  double l0 = 0.0, a0 = 0.0, ax0 = 0.0;
  bool degenerate_root = false;  // b(beta) == a(0)
  std::map<std::string, double> checks;  // named identity residuals

  double threshold(const std::string& k) const {
    auto it = thresholds.find(k);
    require(it != thresholds.end(), ErrorKind::internal_error, "missing threshold " + k);
    return it->second;
  }
};

struct Classification {
  CaseLabel label;
  double l0, a0, ax0;
  bool degenerate_root = false;
};

inline Line chord_l(const Instance& in) {
  return Line::through(in.x0, in.a()(in.x0), in.g0, in.b()(in.g0));
}

inline Classification classify_case(const Instance& in) {
  const Payoff& a = in.a();
  const Payoff& b = in.b();
  Classification c{CaseLabel::C1, 0.0, a(0.0), a(in.x0)};
  c.l0 = chord_l(in)(0.0);
  const double b_beta = in.pay.b_limit_at_beta;
  c.degenerate_root = std::abs(b_beta - c.a0) <= 1e-12 * (1.0 + std::abs(c.a0));
  if (in.pay.identical) {
    c.label = CaseLabel::always_continue;
  } else if (!(b_beta > c.a0) && !c.degenerate_root) {
    c.label = CaseLabel::always_stop;
  } else if (c.a0 <= c.l0 && c.l0 <= c.ax0) {
    c.label = CaseLabel::C1;
  } else if (c.l0 > c.ax0) {
    c.label = CaseLabel::C2;
  } else {
    const double e = in.e();
    c.label = std::abs(a(e) - b(e)) <= 1e-10 ? CaseLabel::C3_tilde : CaseLabel::C3;
  }
  return c;
}

namespace detail {

// sign changes of a - psi on a probe grid, refined by bisection
inline std::vector<double> crossings(const Payoff& a, const PsiStar& psi, double lo, double hi,
                                     int n = 4096) {
  std::vector<double> out;
  auto d = [&](double x) { return a(x) - psi(x); };
  double prev = d(lo);
  for (int i = 1; i <= n; ++i) {
    const double x0 = lo + (hi - lo) * (i - 1) / n, x1 = lo + (hi - lo) * i / n;
    const double cur = d(x1);
    if ((prev < 0 && cur > 0) || (prev > 0 && cur < 0)) out.push_back(numeric::bisect_sign(d, x0, x1).x);
    prev = cur;
  }
  return out;
}

}  // namespace detail

// integral of (a - psi)^+ against mu plus psi against nu
inline double dual_value_of(const Instance& in, const PsiStar& psi,
                            const std::vector<double>& thresholds) {
  std::vector<double> br = psi.breaks();
  for (double t : thresholds) {
    br.push_back(t);
    br.push_back(-t);
  }
  const auto ka = in.a().kinks(in.nu->lo(), in.nu->hi());
  const auto kb = in.b().kinks(in.nu->lo(), in.nu->hi());
  br.insert(br.end(), ka.begin(), ka.end());
  br.insert(br.end(), kb.begin(), kb.end());
  const auto cr = detail::crossings(in.a(), psi, in.mu->lo(), in.mu->hi());
  std::vector<double> br_mu = br;
  br_mu.insert(br_mu.end(), cr.begin(), cr.end());
  const Payoff& a = in.a();
  const double phi_part =
      in.mu->integrate([&](double x) { return std::max(0.0, a(x) - psi(x)); }, br_mu, 256);
  const double psi_part = in.nu->integrate([&](double x) { return psi(x); }, br, 256);
  return phi_part + psi_part;
}

inline CaseSolution solve_trivial(const Instance& in, CaseLabel label) {
  CaseSolution s;
  s.label = label;
  s.thresholds = {{"x0", in.x0}, {"e", in.e()}};
  if (label == CaseLabel::always_continue) {
    s.psi = PsiStar({{-INFINITY, INFINITY, PsiStar::Kind::b, {}}}, in.a(), in.b());
  } else {
    const Line flat{0.0, in.a()(0.0)};
    s.lines["a0"] = flat;
    s.psi = PsiStar({{-INFINITY, INFINITY, PsiStar::Kind::max_b_lines, {flat}}}, in.a(), in.b());
  }
  s.dual_value = dual_value_of(in, s.psi, {});
  return s;
}

inline CaseSolution solve_c1(const Instance& in) {
  CaseSolution s;
  s.label = CaseLabel::C1;
  const Line lr = chord_l(in);
  const Line ll{-lr.slope, lr.intercept};
  s.lines = {{"lR", lr}, {"lL", ll}};
  s.thresholds = {{"x0", in.x0}, {"g0", in.g0}, {"fL_minus_x0", in.left->solve(-in.x0).f},
                  {"e", in.e()}};
  s.psi = PsiStar({{-INFINITY, INFINITY, PsiStar::Kind::max_b_lines, {lr, ll}}}, in.a(), in.b());
  s.dual_value = dual_value_of(in, s.psi, {in.x0, in.g0, 0.0});
  return s;
}

// C2 helper maps: F-(x) = mu(x, x0), F+(y) = (nu - mu)(g0, y), h = F+^{-1} o F-.
struct C2Maps {
  const Instance* in;
  DensityPtr xi;  // (nu - mu) on (g0, beta)

  explicit C2Maps(const Instance& inst)
      : in(&inst), xi(difference_density(*inst.nu, *inst.mu, {{inst.g0, inst.beta()}})) {}

  double F_minus(double x) const { return in->mu->mass(x, in->x0); }
  double F_plus(double y) const { return xi->mass(in->g0, y); }
  double h(double x) const {
    const double m = F_minus(x);
    if (m >= xi->total_mass()) return in->beta();
    return xi->right_point_for_mass(in->g0, m);
  }
};

inline CaseSolution solve_c2(const Instance& in) {
  CaseSolution s;
  s.label = CaseLabel::C2;
  const Payoff& a = in.a();
  const Payoff& b = in.b();
  require(b(in.g0) < a(in.x0), ErrorKind::assumption_violated, "C2 needs b(g^R(x0)) < a(x0)");
  require(in.pay.b_limit_at_beta >= a(0.0), ErrorKind::assumption_violated, "C2 needs b(beta) >= a(0)");
  const C2Maps maps(in);
  auto phi = [&](double x) { return b(maps.h(x)) - a(x); };
  // b(beta) == a(0) puts the root at the boundary; solve_case records the flag
  if (phi(0.0) < -1e-12 * (1.0 + std::abs(a(0.0))))
    fail(ErrorKind::assumption_violated, "no sign change for x1 on (0, x0)");
  const auto r = numeric::bisect_decreasing(phi, 0.0, in.x0);
  const double x1 = r.x, h1 = maps.h(x1);
  const Line l1{0.0, a(x1)};
  s.lines = {{"l1", l1}};
  s.thresholds = {{"x0", in.x0}, {"g0", in.g0}, {"x1", x1}, {"h_x1", h1}, {"e", in.e()}};
  s.checks["h_x0_minus_g0"] = std::abs(maps.h(in.x0) - in.g0);
  s.checks["h_0_minus_beta"] = std::abs(maps.h(0.0) - in.beta());
  s.checks["x1_root"] = std::abs(b(h1) - a(x1));
  s.psi = PsiStar({{-INFINITY, INFINITY, PsiStar::Kind::max_b_lines, {l1}}}, a, b);
  s.dual_value = dual_value_of(in, s.psi, {in.x0, x1, h1, 0.0});
  return s;
}

// C3 helpers: Lambda(x) = b(g(x)) - a(x), m(x) = a(f(x)) - l~_x(f(x)).
inline double c3_lambda(const Instance& in, double x) {
  return in.b()(in.fg_right(x).second) - in.a()(x);
}
inline Line c3_chord(const Instance& in, double x) {
  const double g = in.fg_right(x).second;
  return Line::through(x, in.a()(x), g, in.b()(g));
}
inline double c3_m(const Instance& in, double x) {
  const double f = in.fg_right(x).first;
  return in.a()(f) - c3_chord(in, x)(f);
}

inline CaseSolution solve_c3(const Instance& in) {
  CaseSolution s;
  const Payoff& a = in.a();
  const Payoff& b = in.b();
  const double e = in.e();
  if (std::abs(a(e) - b(e)) <= 1e-10) {
    s.label = CaseLabel::C3_tilde;
    s.thresholds = {{"x0", in.x0}, {"e", e}, {"x3", e}, {"x4", e}};
    s.psi = PsiStar({{-INFINITY, -e, PsiStar::Kind::b, {}},
                     {-e, e, PsiStar::Kind::a, {}},
                     {e, INFINITY, PsiStar::Kind::b, {}}},
                    a, b);
    s.checks["continuity_at_e"] = std::abs(a(e) - b(e));
    s.dual_value = dual_value_of(in, s.psi, {e, 0.0});
    return s;
  }
  s.label = CaseLabel::C3;
  auto lam = [&](double x) { return c3_lambda(in, x); };
  const double lam0 = lam(in.x0), lame = b(e) - a(e);
  if (!(lam0 > 0.0) || !(lame < 0.0))
    fail(ErrorKind::numerical_failure, "Lambda has no sign change on (x0, e): Lambda(x0) = " +
                                           std::to_string(lam0) + ", Lambda(e) = " +
                                           std::to_string(lame));
  const double x2 = numeric::bisect_decreasing(lam, in.x0, e).x;
  auto m = [&](double x) { return c3_m(in, x); };
  if (!(m(in.x0) > 0.0)) fail(ErrorKind::numerical_failure, "m(x0) is not positive");
  // smallest root: scan, then bisect on the first sign change
  const int scan = 64;
  double lo = in.x0, hi = x2;
  for (int k = 1; k <= scan; ++k) {
    const double x = in.x0 + (x2 - in.x0) * k / scan;
    if (m(x) <= 0.0) {
      hi = x;
      break;
    }
    lo = x;
  }
  if (!(m(hi) <= 0.0)) fail(ErrorKind::numerical_failure, "m has no root in (x0, x2]");
  const double x3 = numeric::bisect_decreasing(m, lo, hi).x;
  const auto [f3, g3] = in.fg_right(x3);
  // x4 > g3 with (nu - mu)(x4, beta) = (mu - nu)(0, f3)
  const double target = in.mu->mass(0.0, f3) - in.nu->mass(0.0, f3);
  const auto tail = difference_density(*in.nu, *in.mu, {{g3, in.beta()}});
  if (!(target > 0.0) || target > tail->total_mass())
    fail(ErrorKind::numerical_failure, "x4 balance has no solution");
  const double x4 = tail->left_point_for_mass(in.beta(), target);
  const Line l3r = c3_chord(in, x3);
  const Line l3l{-l3r.slope, l3r.intercept};
  s.lines = {{"l3R", l3r}, {"l3L", l3l}};
  s.thresholds = {{"x0", in.x0}, {"x2", x2}, {"x3", x3}, {"f3", f3},
                  {"g3", g3},    {"x4", x4}, {"e", e},   {"g0", in.g0}};
  s.checks["tangency"] = std::abs(l3r(f3) - a(f3));
  s.checks["x4_balance"] =
      std::abs((in.mu->mass(0.0, f3) - in.nu->mass(0.0, f3)) -
               (in.nu->mass(x4, in.beta()) - in.mu->mass(x4, in.beta())));
  s.psi = PsiStar({{-INFINITY, -g3, PsiStar::Kind::b, {}},
                   {-g3, -f3, PsiStar::Kind::line, {l3l}},
                   {-f3, f3, PsiStar::Kind::a, {}},
                   {f3, g3, PsiStar::Kind::line, {l3r}},
                   {g3, INFINITY, PsiStar::Kind::b, {}}},
                  a, b);
  s.dual_value = dual_value_of(in, s.psi, {in.x0, x3, f3, g3, x4, 0.0});
  return s;
}

// psi* on a uniform grid over the support of nu with every breakpoint inserted
inline GridFunction psi_star_grid(const Instance& in, const CaseSolution& s, std::size_t n = 2001) {
  const double lo = in.nu->lo(), hi = in.nu->hi();
  std::vector<double> g = GridFunction::uniform_grid(lo, hi, n);
  std::vector<double> extra = s.psi.breaks();
  for (const auto& [k, t] : s.thresholds) {
    extra.push_back(t);
    extra.push_back(-t);
  }
  for (double k : in.b().kinks(lo, hi)) extra.push_back(k);
  for (const auto& [k, l] : s.lines) {
    (void)k;
    // crossings of each line with b
    auto d = [&](double x) { return l(x) - in.b()(x); };
    const int m = 2048;
    for (int i = 0; i < m; ++i) {
      const double x0 = lo + (hi - lo) * i / m, x1 = lo + (hi - lo) * (i + 1) / m;
      if ((d(x0) < 0) != (d(x1) < 0)) extra.push_back(numeric::bisect_sign(d, x0, x1).x);
    }
  }
  for (double x : extra)
    if (x > lo && x < hi) g.push_back(x);
  std::sort(g.begin(), g.end());
  std::vector<double> u;
  for (double x : g)
    if (u.empty() || x - u.back() > 1e-12 * (hi - lo)) u.push_back(x);
  return s.psi.sample(u);
}

inline CaseSolution solve(const Instance& in) {
  const Classification c = classify_case(in);
  CaseSolution s;
  switch (c.label) {
    case CaseLabel::C1: s = solve_c1(in); break;
    case CaseLabel::C2: s = solve_c2(in); break;
    case CaseLabel::C3:
    case CaseLabel::C3_tilde: s = solve_c3(in); break;
    default: s = solve_trivial(in, c.label); break;
  }
  s.l0 = c.l0;
  s.a0 = c.a0;
  s.ax0 = c.ax0;
  s.degenerate_root = c.degenerate_root;
  return s;
}

}  // namespace bermudan
