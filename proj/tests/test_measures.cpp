#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "bermudan/convex_order.hpp"
#include "bermudan/measure.hpp"

using namespace bermudan;

namespace {

double std_normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

// Independent inversion of the normal CDF by plain bisection.
double normal_quantile_oracle(double p) {
  double lo = -40.0, hi = 40.0;
  for (int i = 0; i < 200; ++i) {
    const double m = 0.5 * (lo + hi);
    (std_normal_cdf(m) < p ? lo : hi) = m;
  }
  return 0.5 * (lo + hi);
}

// E|X - k| for X ~ N(0, s^2)
double normal_potential(double s, double k) {
  return s * std::sqrt(2.0 / std::numbers::pi) * std::exp(-k * k / (2 * s * s)) +
         k * (2.0 * std_normal_cdf(k / s) - 1.0);
}

double std_normal_pdf(double x) { return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi); }

// Same potential restricted to |X| < c (closed form via the antiderivative of x phi).
double truncated_normal_potential(double s, double c, double k) {
  const double z = k / s, zc = c / s;
  const double Pk = std_normal_cdf(z), Pc = std_normal_cdf(zc), Pm = std_normal_cdf(-zc);
  const double dk = std_normal_pdf(z), dc = std_normal_pdf(zc);
  if (k <= -c) return s * (dc - dc) + (-k) * (Pc - Pm);
  if (k >= c) return k * (Pc - Pm);
  // integral of (x - k) over (k, c) plus (k - x) over (-c, k)
  return s * (dk - dc) - k * (Pc - Pk) + k * (Pk - Pm) + s * (dk - dc);
}

}  // namespace

TEST(MakeMeasure, GaussianTruncatedSupport) {
  const Measure m = make_measure(MeasureSpec::gaussian(1.0));
  const double q = normal_quantile_oracle(1e-9);
  EXPECT_NEAR(m.lo(), q, 1e-9);
  EXPECT_NEAR(m.hi(), -q, 1e-9);
  EXPECT_NEAR(m.hi(), 6.0, 0.01);
  EXPECT_NEAR(m.mean(), 0.0, 1e-14);
  EXPECT_TRUE(m.symmetric());
  EXPECT_TRUE(m.truncated());
  EXPECT_GE(m.total_mass(), 1.0 - 2e-9 - 1e-9);
  EXPECT_LE(m.total_mass(), 1.0 + 1e-9);
  EXPECT_NEAR(m.mass_deficit(), 2e-9, 1e-12);
}

TEST(MakeMeasure, UniformAndTriangle) {
  const Measure u = make_measure(MeasureSpec::uniform(1.0));
  EXPECT_DOUBLE_EQ(u.density(0.3), 0.5);
  EXPECT_DOUBLE_EQ(u.density(1.5), 0.0);
  EXPECT_NEAR(u.mean(), 0.0, 1e-15);
  EXPECT_NEAR(u.total_mass(), 1.0, 1e-14);
  const Measure t = make_measure(MeasureSpec::triangle(1.0));
  EXPECT_NEAR(t.density(0.25), 0.75, 1e-15);
  EXPECT_NEAR(t.cdf(0.0), 0.5, 1e-14);
  EXPECT_NEAR(t.cdf(0.5), 1.0 - 0.125, 1e-14);
  EXPECT_TRUE(t.symmetric());
}

TEST(MakeMeasure, TableAndAtoms) {
  const Measure t = make_measure(MeasureSpec::table({-1.0, 0.0, 1.0}, {0.0, 1.0, 0.0}));
  EXPECT_NEAR(t.cdf(0.0), 0.5, 1e-14);
  EXPECT_TRUE(t.symmetric());
  const Measure a = make_measure(MeasureSpec::atoms({1.0, -1.0}, {0.5, 0.5}));
  EXPECT_EQ(a.kind(), Measure::Kind::atoms);
  EXPECT_DOUBLE_EQ(a.mean(), 0.0);
  EXPECT_DOUBLE_EQ(a.potential(0.0), 1.0);
  EXPECT_TRUE(a.symmetric());
}

TEST(MakeMeasure, RejectsBadSpecs) {
  auto kind_of = [](const MeasureSpec& s) {
    try {
      make_measure(s);
    } catch (const Error& e) {
      return e.kind();
    }
    return ErrorKind::internal_error;
  };
  EXPECT_EQ(kind_of(MeasureSpec::table({-1.0, 0.0, 1.0}, {0.5, -0.1, 0.5})),
            ErrorKind::invalid_spec);
  EXPECT_EQ(kind_of(MeasureSpec::table({-1.0, 1.0, 0.0}, {0.5, 0.5, 0.5})),
            ErrorKind::invalid_spec);
  EXPECT_EQ(kind_of(MeasureSpec::gaussian(-1.0)), ErrorKind::invalid_spec);
  EXPECT_EQ(kind_of(MeasureSpec::uniform(0.0)), ErrorKind::invalid_spec);
  EXPECT_EQ(kind_of(MeasureSpec::atoms({0.0}, {0.7})), ErrorKind::invalid_spec);
}

TEST(MakeMeasure, CdfQuantileRoundTrip) {
  const Measure m = make_measure(MeasureSpec::gaussian(std::sqrt(2.0)));
  for (double p : {1e-8, 1e-4, 0.1, 0.37, 0.5, 0.8, 0.999}) {
    const double x = m.quantile(p);
    EXPECT_NEAR(m.cdf(x), p, 1e-14) << p;
  }
  // cached CDF against the closed form (shifted by the discarded left tail)
  for (double x : {-3.0, -1.0, 0.0, 0.4, 2.5}) {
    const double exact = std_normal_cdf(x / std::sqrt(2.0)) - 1e-9;
    EXPECT_NEAR(m.cdf(x), exact, 1e-13) << x;
  }
}

TEST(MakeMeasure, ShortRangeMassKeepsRelativePrecision) {
  const Measure m = make_measure(MeasureSpec::gaussian(1.0));
  const double x = 1.1, h = (x + 1e-9) - x;  // representable width
  const double exact = std_normal_cdf(x + h) - std_normal_cdf(x);  // fine at this size
  EXPECT_NEAR(m.mass(x, x + h) / (m.density(x + 0.5 * h) * h), 1.0, 1e-9);
  EXPECT_NEAR(m.mass(x, x + h), exact, 1e-15);
}

TEST(Potential, MatchesClosedFormNormal) {
  const Measure m = make_measure(MeasureSpec::gaussian(1.0));
  for (double k : {-7.0, -2.0, -0.5, 0.0, 0.3, 1.7, 5.0}) {
    EXPECT_NEAR(m.potential(k), truncated_normal_potential(1.0, m.hi(), k), 1e-13) << k;
    // the discarded tails are worth about 2 phi(6)
    EXPECT_NEAR(m.potential(k), normal_potential(1.0, k), 2e-8 * (1.0 + std::abs(k))) << k;
  }
}

TEST(Potential, ConvexAndAboveMeanDistance) {
  const Measure m = make_measure(MeasureSpec::triangle(1.0));
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  for (int trial = 0; trial < 500; ++trial) {
    double k[3] = {u(rng), u(rng), u(rng)};
    std::sort(k, k + 3);
    if (k[2] - k[0] < 1e-6) continue;
    const double t = (k[1] - k[0]) / (k[2] - k[0]);
    const double interp = (1 - t) * m.potential(k[0]) + t * m.potential(k[2]);
    EXPECT_LE(m.potential(k[1]), interp + 1e-10);
    EXPECT_GE(m.potential(k[1]), std::abs(m.mean() - k[1]) - 1e-14);
  }
  EXPECT_NEAR(m.potential(5.0), 5.0, 1e-13);
}

TEST(ConvexOrder, NormalPairs) {
  const Measure n1 = make_measure(MeasureSpec::gaussian(1.0));
  const Measure n2 = make_measure(MeasureSpec::gaussian(std::sqrt(2.0)));
  const auto r12 = check_convex_order(n1, n2, 1e-9);
  EXPECT_TRUE(r12.ordered);
  EXPECT_LT(r12.worst_gap, 1e-9);
  // the closed-form potential gap at the origin
  EXPECT_NEAR(n2.potential(0.0) - n1.potential(0.0),
              truncated_normal_potential(std::sqrt(2.0), n2.hi(), 0.0) -
                  truncated_normal_potential(1.0, n1.hi(), 0.0),
              1e-13);
  const auto r21 = check_convex_order(n2, n1, 1e-9);
  EXPECT_FALSE(r21.ordered);
  EXPECT_GT(r21.worst_gap, 0.1);
  EXPECT_NEAR(r21.worst_k, 0.0, 0.01);
}

TEST(ConvexOrder, IdenticalLaws) {
  const Measure m = make_measure(MeasureSpec::triangle(1.0));
  const auto r = check_convex_order(m, m, 1e-12);
  EXPECT_TRUE(r.ordered);
  EXPECT_EQ(r.worst_gap, 0.0);
}

TEST(ConvexOrder, BothDirectionsOnlyForNearEqualLaws) {
  const Measure a = make_measure(MeasureSpec::uniform(1.0));
  const Measure b = make_measure(MeasureSpec::uniform(1.0 + 1e-4));
  const auto ab = check_convex_order(a, b, 1e-9), ba = check_convex_order(b, a, 1e-9);
  EXPECT_TRUE(ab.ordered);
  EXPECT_FALSE(ba.ordered);
  const auto ba_loose = check_convex_order(b, a, 1e-3);
  EXPECT_TRUE(ba_loose.ordered);
  EXPECT_LE(ba_loose.worst_gap, 1e-3);
}

TEST(Dispersion, GaussianCrossing) {
  const Measure n1 = make_measure(MeasureSpec::gaussian(1.0));
  const Measure n2 = make_measure(MeasureSpec::gaussian(std::sqrt(2.0)));
  const auto d = check_dispersion(n1, n2);
  EXPECT_NEAR(d.e, std::sqrt(2.0 * std::log(2.0)), 1e-12);
  EXPECT_NEAR(d.e, 1.17741, 1e-5);
  EXPECT_GT(n1.density(d.e / 2), n2.density(d.e / 2));
  EXPECT_GT(n2.density((d.e + d.beta) / 2), n1.density((d.e + d.beta) / 2));
}

TEST(Dispersion, TriangleUniformCrossing) {
  const Measure mu = make_measure(MeasureSpec::triangle(1.0));
  const Measure nu = make_measure(MeasureSpec::uniform(2.0));
  const auto d = check_dispersion(mu, nu);
  EXPECT_NEAR(d.e, 0.75, 1e-12);
  EXPECT_DOUBLE_EQ(d.alpha, 1.0);
  EXPECT_DOUBLE_EQ(d.beta, 2.0);
  EXPECT_GT(mu.density(d.e / 2), nu.density(d.e / 2));
  EXPECT_GT(nu.density((d.e + d.beta) / 2), mu.density((d.e + d.beta) / 2));
}

TEST(Dispersion, IdenticalUniformsRejected) {
  const Measure u = make_measure(MeasureSpec::uniform(1.0));
  try {
    check_dispersion(u, u);
    FAIL() << "expected dispersion-violated";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::dispersion_violated);
  }
}
