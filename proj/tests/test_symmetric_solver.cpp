#include <gtest/gtest.h>

#include <cmath>

#include "bermudan/superhedge.hpp"
#include "bermudan/symmetric_solver.hpp"
#include "bermudan/time0.hpp"
#include "oracles.hpp"

using namespace bermudan;

namespace {

Measure gauss(double s, double m = 0.0) { return make_measure(MeasureSpec::gaussian(s, m)); }

struct Setup {
  Measure mu, nu;
};

Setup gaussian_pair() { return {gauss(1.0), gauss(std::sqrt(2.0))}; }
Setup triangle_uniform_pair() {
  return {make_measure(MeasureSpec::triangle(1.0)), make_measure(MeasureSpec::uniform(2.0))};
}

Payoff square() { return Payoff::quadratic(0.0, 1.0); }
Payoff shifted_square(double c) { return Payoff::quadratic(c, 1.0); }

Instance instance(const Setup& s, const Payoff& a, const Payoff& b = square()) {
  return make_instance(s.mu, s.nu, a, b);
}

// (a - psi)^+ against mu plus psi against nu, by the oracle rule
double oracle_dual(const Instance& in, const CaseSolution& sol) {
  std::vector<double> br = sol.psi.breaks();
  for (const auto& [k, t] : sol.thresholds) {
    br.push_back(t);
    br.push_back(-t);
  }
  const auto& a = in.a();
  const auto& psi = sol.psi;
  const double p1 = oracle::gk([&](double x) { return std::max(0.0, a(x) - psi(x)) * in.mu->density(x); },
                               in.mu->lo(), in.mu->hi(), br);
  const double p2 =
      oracle::gk([&](double y) { return psi(y) * in.nu->density(y); }, in.nu->lo(), in.nu->hi(), br);
  return p1 + p2;
}

void expect_psi_invariants(const Instance& in, const CaseSolution& sol) {
  const GridFunction psi = psi_star_grid(in, sol);
  EXPECT_LE(convexity_defect(psi), 1e-10) << to_string(sol.label);
  const GridFunction bg = GridFunction::sample(psi.grid(), [&](double x) { return in.b()(x); });
  double below = 0.0;
  for (std::size_t i = 0; i < psi.size(); ++i) below = std::max(below, bg.v(i) - psi.v(i));
  EXPECT_LE(below, 1e-12);
  // (psi - b)^c vanishes
  EXPECT_LE(convex_envelope(psi - bg).max_abs(), 1e-10);
  EXPECT_TRUE(std::isfinite(sol.dual_value));
  // the generated hedge verifies and costs the dual value up to grid error
  HedgingSession hs([&](double x) { return in.a()(x); }, [&](double x) { return in.b()(x); }, *in.mu,
                    *in.nu);
  const Superhedge h = hs.generate(psi);
  EXPECT_TRUE(h.verified);
  EXPECT_NEAR(h.cost.total, sol.dual_value, 2e-3);
  // dominates the two pure strategies
  const double int_a = oracle::gk([&](double x) { return in.a()(x) * in.mu->density(x); }, in.mu->lo(),
                                  in.mu->hi(), {0.0});
  const double int_b = oracle::gk([&](double x) { return in.b()(x) * in.nu->density(x); }, in.nu->lo(),
                                  in.nu->hi(), {0.0});
  EXPECT_GE(sol.dual_value, std::max(int_a, int_b) - 1e-8);
  EXPECT_NEAR(sol.dual_value, oracle_dual(in, sol), 1e-9);
}

}  // namespace

TEST(Normalize, AlreadyAboveIsUnchanged) {
  const auto p = normalize_payoffs(shifted_square(1.0), square(), -3.0, 3.0);
  EXPECT_FALSE(p.substituted);
  EXPECT_FALSE(p.identical);
  for (double x : {-2.0, 0.0, 0.7}) EXPECT_DOUBLE_EQ(p.a(x) - p.b(x), 1.0);
}

TEST(Normalize, ZeroExerciseBecomesB) {
  const auto p = normalize_payoffs(Payoff::quadratic(0.0, 0.0), square(), -3.0, 3.0);
  EXPECT_TRUE(p.substituted);
  EXPECT_TRUE(p.identical);
  EXPECT_DOUBLE_EQ(p.a(1.5), 2.25);
}

TEST(Normalize, NonConvexRejected) {
  const Payoff bump = Payoff::pwl({-1.0, 0.0, 1.0}, {0.0, 1.0, 0.0});
  try {
    normalize_payoffs(bump, Payoff::quadratic(0.0, 0.0), -2.0, 2.0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::invalid_payoffs);
  }
  // a v b convex although a is not
  EXPECT_NO_THROW(normalize_payoffs(Payoff::pwl({-1.0, 0.0, 1.0}, {1.0, 1.1, 1.0}),
                                    Payoff::quadratic(2.0, 1.0), -2.0, 2.0));
}

TEST(Classify, AlwaysContinueWhenAEqualsB) {
  const auto in = instance(gaussian_pair(), Payoff::quadratic(0.0, 0.0));
  const auto sol = solve(in);
  EXPECT_EQ(sol.label, CaseLabel::always_continue);
  const double int_b = oracle::gk([&](double y) { return y * y * in.nu->density(y); }, in.nu->lo(),
                                  in.nu->hi(), {0.0});
  EXPECT_NEAR(sol.dual_value, int_b, 1e-9);
  // variance 2 less the truncated tails
  EXPECT_NEAR(sol.dual_value, 2.0, 1e-6);
}

TEST(Classify, AlwaysStopWhenBBetaBelowA0) {
  const auto s = triangle_uniform_pair();
  const auto in = instance(s, shifted_square(5.0));  // b(2) = 4 < a(0) = 5
  const auto sol = solve(in);
  EXPECT_EQ(sol.label, CaseLabel::always_stop);
  // int a dmu with a = x^2 + 5 on the triangle: variance 1/6
  EXPECT_NEAR(sol.dual_value, 5.0 + 1.0 / 6.0, 1e-9);
}

TEST(Classify, TiesGoToC1) {
  const auto s = triangle_uniform_pair();
  const auto base = instance(s, square());
  // flat a at level b(g0): chord slope 0, l(0) = a(x0) = a(0) exactly
  const double K = base.g0 * base.g0;
  const auto in = instance(s, Payoff::maximum(square(), Payoff::quadratic(K, 0.0)));
  const auto c = classify_case(in);
  EXPECT_EQ(c.l0, c.ax0);
  EXPECT_EQ(c.l0, c.a0);
  EXPECT_EQ(c.label, CaseLabel::C1);
}

TEST(Classify, BranchesForShiftedSquares) {
  for (const auto& s : {gaussian_pair(), triangle_uniform_pair()}) {
    const auto base = instance(s, square());
    const double lo = base.g0 * (base.g0 - base.x0), hi = base.g0 * base.g0 - base.x0 * base.x0;
    // a = b + c: C1 iff lo <= c <= hi
    EXPECT_EQ(classify_case(instance(s, shifted_square(0.5 * (lo + hi)))).label, CaseLabel::C1);
    EXPECT_EQ(classify_case(instance(s, shifted_square(hi + 0.2))).label, CaseLabel::C2);
    EXPECT_EQ(classify_case(instance(s, shifted_square(lo - 0.2))).label, CaseLabel::C3);
  }
}

TEST(C1, StructureAndValue) {
  for (const auto& s : {gaussian_pair(), triangle_uniform_pair()}) {
    const auto base = instance(s, square());
    const double c = 0.5 * (base.g0 * (base.g0 - base.x0) + base.g0 * base.g0 - base.x0 * base.x0);
    const auto in = instance(s, shifted_square(c));
    const auto sol = solve(in);
    ASSERT_EQ(sol.label, CaseLabel::C1);
    const Line lr = sol.lines.at("lR"), ll = sol.lines.at("lL");
    EXPECT_DOUBLE_EQ(lr(0.0), ll(0.0));
    EXPECT_DOUBLE_EQ(sol.psi(0.0), sol.l0);
    EXPECT_NEAR(sol.threshold("fL_minus_x0"), -in.g0, 1e-9);
    // psi = b outside (-g0, g0), lines inside
    for (double y : {in.g0 + 1e-3, in.g0 + 0.5, -in.g0 - 0.3}) EXPECT_DOUBLE_EQ(sol.psi(y), y * y);
    for (double y : {0.3 * in.g0, -0.8 * in.g0}) EXPECT_GT(sol.psi(y), y * y);
    EXPECT_NEAR(lr(in.g0), in.g0 * in.g0, 1e-12);
    EXPECT_NEAR(lr(in.x0), in.a()(in.x0), 1e-12);
    expect_psi_invariants(in, sol);
  }
}

TEST(C2, MapsRootAndTwoDecompositions) {
  for (const auto& s : {gaussian_pair(), triangle_uniform_pair()}) {
    const auto base = instance(s, square());
    const double c = base.g0 * base.g0 - base.x0 * base.x0 + 0.4;
    const auto in = instance(s, shifted_square(c));
    const auto sol = solve(in);
    ASSERT_EQ(sol.label, CaseLabel::C2);
    const C2Maps maps(in);
    EXPECT_NEAR(maps.h(in.x0), in.g0, 1e-10);
    EXPECT_NEAR(maps.h(1e-12), in.beta(), 1e-4 * in.beta());
    const double x1 = sol.threshold("x1"), h1 = sol.threshold("h_x1");
    EXPECT_GT(x1, 0.0);
    EXPECT_LT(x1, in.x0);
    EXPECT_NEAR(in.b()(h1) - in.a()(x1), 0.0, 1e-9);
    // F-(x1) = F+(h1) by the oracle rule
    const double fm = oracle::moment(*in.mu, 0, x1, in.x0);
    const double fp = oracle::moment(*in.nu, 0, in.g0, h1) - oracle::moment(*in.mu, 0, in.g0, h1);
    EXPECT_NEAR(fm, fp, 1e-9);
    // region decomposition of the dual value
    const auto& a = in.a();
    const double ax1 = a(x1);
    auto outer_b = [&](double y) { return y * y * in.nu->density(y); };
    double v = 2.0 * oracle::gk(outer_b, h1, in.nu->hi());
    v += ax1 * oracle::moment(*in.nu, 0, -h1, h1);
    const double top = std::min(h1, in.mu->hi());
    v += 2.0 * oracle::gk([&](double x) { return (a(x) - ax1) * in.mu->density(x); }, x1, top);
    if (in.mu->hi() > h1)
      v += 2.0 * oracle::gk([&](double x) { return (a(x) - x * x) * in.mu->density(x); }, h1,
                            in.mu->hi());
    EXPECT_NEAR(sol.dual_value, v, 1e-9);
    expect_psi_invariants(in, sol);
  }
}

TEST(C3, RootsTangencyBalance) {
  for (const auto& s : {gaussian_pair(), triangle_uniform_pair()}) {
    const auto base = instance(s, square());
    const double c = base.g0 * (base.g0 - base.x0) - 0.45;
    const auto in = instance(s, shifted_square(c));
    const auto sol = solve(in);
    ASSERT_EQ(sol.label, CaseLabel::C3);
    const double x2 = sol.threshold("x2"), x3 = sol.threshold("x3"), x4 = sol.threshold("x4");
    const double f3 = sol.threshold("f3"), g3 = sol.threshold("g3");
    EXPECT_GT(x2, in.x0);
    EXPECT_LT(x2, in.e());
    EXPECT_GT(x3, in.x0);
    EXPECT_LE(x3, x2);
    EXPECT_GT(x4, g3);
    EXPECT_LT(x4, in.beta());
    // l~_{x2} is horizontal
    EXPECT_NEAR(c3_chord(in, x2).slope, 0.0, 1e-8);
    const Line l3 = sol.lines.at("l3R");
    EXPECT_NEAR(l3(f3), in.a()(f3), 1e-8);
    EXPECT_NEAR(l3(x3), in.a()(x3), 1e-12);
    EXPECT_NEAR(l3(g3), g3 * g3, 1e-12);
    const double lhs = oracle::moment(*in.mu, 0, 0.0, f3) - oracle::moment(*in.nu, 0, 0.0, f3);
    const double rhs = oracle::moment(*in.nu, 0, x4, in.beta()) - oracle::moment(*in.mu, 0, x4, in.beta());
    EXPECT_NEAR(lhs, rhs, 1e-9);
    EXPECT_DOUBLE_EQ(sol.psi(0.5 * f3), in.a()(0.5 * f3));
    EXPECT_DOUBLE_EQ(sol.psi(-0.5 * (f3 + g3)), sol.lines.at("l3L")(-0.5 * (f3 + g3)));
    expect_psi_invariants(in, sol);
  }
}

TEST(C3, TildeVariant) {
  for (const auto& s : {gaussian_pair(), triangle_uniform_pair()}) {
    const auto base = instance(s, square());
    const double e = base.e();
    const auto in = instance(s, Payoff::maximum(square(), Payoff::quadratic(e * e, 0.0)));
    const auto sol = solve(in);
    ASSERT_EQ(sol.label, CaseLabel::C3_tilde);
    EXPECT_DOUBLE_EQ(sol.threshold("x3"), e);
    EXPECT_DOUBLE_EQ(sol.threshold("x4"), e);
    EXPECT_NEAR(sol.psi(e - 1e-12), sol.psi(e + 1e-12), 1e-10);
    EXPECT_NEAR(sol.psi(-e - 1e-12), sol.psi(-e + 1e-12), 1e-10);
    expect_psi_invariants(in, sol);
  }
}

TEST(Continuity, AcrossCaseBoundaries) {
  for (const auto& s : {gaussian_pair(), triangle_uniform_pair()}) {
    const auto base = instance(s, square());
    const double c12 = base.g0 * base.g0 - base.x0 * base.x0;  // C1 | C2
    const double c13 = base.g0 * (base.g0 - base.x0);          // C3 | C1
    for (double c : {c12, c13}) {
      double prev = NAN;
      for (double d : {-1e-6, 1e-6}) {
        const auto sol = solve(instance(s, shifted_square(c + d)));
        if (!std::isnan(prev)) {
          EXPECT_NEAR(sol.dual_value, prev, 1e-5);
        }
        prev = sol.dual_value;
      }
    }
    const auto below = classify_case(instance(s, shifted_square(c12 - 1e-4))).label;
    const auto above = classify_case(instance(s, shifted_square(c12 + 1e-4))).label;
    EXPECT_EQ(below, CaseLabel::C1);
    EXPECT_EQ(above, CaseLabel::C2);
  }
}

TEST(C2, DegenerateRootFlag) {
  // b(beta) = a(0) for the uniform law: a = y^2 + 4 with beta = 2
  const auto in = instance(triangle_uniform_pair(), shifted_square(4.0));
  const auto sol = solve(in);
  EXPECT_TRUE(sol.degenerate_root);
  EXPECT_EQ(sol.label, CaseLabel::C2);
  EXPECT_NEAR(sol.threshold("x1"), 0.0, 1e-6);
}

TEST(Time0, UniformClosedForm) {
  const Measure nu = make_measure(MeasureSpec::uniform(1.0));
  const auto r = solve_time0(nu, Payoff::quadratic(0.25, 0.0), square());
  ASSERT_EQ(r.branch, Time0Result::Branch::interior);
  EXPECT_NEAR(r.f, -0.5, 1e-6);
  EXPECT_NEAR(r.g, 0.5, 1e-6);
  EXPECT_NEAR(r.Lambda, 0.0, 1e-6);
  EXPECT_NEAR(r.value, 5.0 / 12.0, 1e-6);
  // symmetric stop interval (-t, t): V(t) = (1 - t^3)/3 + t/4, maximal at t = 1/2
  auto V = [](double t) { return (1.0 - t * t * t) / 3.0 + 0.25 * t; };
  double best = 0.0;
  for (int i = 0; i <= 100000; ++i) best = std::max(best, V(i / 100000.0));
  EXPECT_NEAR(r.value, best, 1e-9);
  EXPECT_GT(r.value, std::max(0.25, 1.0 / 3.0));
  EXPECT_NEAR(r.canonical_bound, 1.0 / 3.0, 1e-9);
}

TEST(Time0, ShiftedGaussianPrimalMatchesDual) {
  const Measure nu = gauss(1.0, 0.5);
  const Payoff a = Payoff::quadratic(0.8, 0.0);
  const Payoff b = Payoff::quadratic(0.25, 1.0, -1.0);  // (y - 1/2)^2
  const auto r = solve_time0(nu, a, b);
  ASSERT_EQ(r.branch, Time0Result::Branch::interior);
  EXPECT_LT(r.f, 0.5);
  EXPECT_GT(r.g, 0.5);
  EXPECT_LE(r.barycenter_residual, 1e-10);
  EXPECT_LE(r.chord_residual, 1e-8);
  // primal value of the stop-on-(f, g) model by the oracle rule
  const double outside =
      oracle::gk([&](double y) { return b(y) * nu.density(y); }, nu.lo(), r.f, {}) +
      oracle::gk([&](double y) { return b(y) * nu.density(y); }, r.g, nu.hi(), {});
  const double primal = outside + 0.8 * oracle::moment(nu, 0, r.f, r.g);
  EXPECT_NEAR(r.value, primal, 1e-9);
  EXPECT_GT(r.excess, 1e-3);
  // psi follows L on [f, g] and b outside
  EXPECT_NEAR(r.psi(0.5), 0.8, 1e-12);
  EXPECT_DOUBLE_EQ(r.psi(r.g + 0.1), b(r.g + 0.1));
}

TEST(Time0, ShortCircuits) {
  const Measure nu = make_measure(MeasureSpec::uniform(1.0));
  const auto never = solve_time0(nu, Payoff::quadratic(0.0, 0.0), square());
  EXPECT_EQ(never.branch, Time0Result::Branch::never_stop);
  EXPECT_NEAR(never.value, 1.0 / 3.0, 1e-12);
  const auto always = solve_time0(nu, Payoff::quadratic(2.0, 0.0), square());
  EXPECT_EQ(always.branch, Time0Result::Branch::always_stop);
  EXPECT_DOUBLE_EQ(always.value, 2.0);
}
