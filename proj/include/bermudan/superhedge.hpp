#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "bermudan/error.hpp"
#include "bermudan/grid_function.hpp"
#include "bermudan/measure.hpp"

namespace bermudan {

using RealFn = std::function<double(double)>;

inline constexpr double kDivergenceGuard = 1e12;

struct HedgeCost {
  double phi_pos = 0.0, phi_neg = 0.0;  // integral of phi^+ and phi^- against mu
  double psi_pos = 0.0, psi_neg = 0.0;  // same for psi against nu
  double total = 0.0;                   // +inf when a positive part diverges
  bool infinite() const { return std::isinf(total); }
};

struct Superhedge {
  GridFunction phi, psi, theta1, theta2;
  HedgeCost cost;
  bool verified = false;
};

struct VerifyResult {
  bool ok = false;
  double worst = std::numeric_limits<double>::infinity();  // min of rhs - lhs
  double x = 0.0, y = 0.0;
  int branch = 0;  // 1: exercise at date 1, 2: exercise at date 2
  double scale = 0.0;
};

namespace detail {

// positive (sign > 0), negative (sign < 0) or full (sign = 0) part of a
// piecewise-linear function integrated against a measure
inline double integrate_part(const GridFunction& f, const Measure& m, int sign) {
  std::vector<double> br = f.grid();
  for (std::size_t k = 0; k + 1 < f.size(); ++k) {
    const double a = f.v(k), b = f.v(k + 1);
    if ((a < 0.0 && b > 0.0) || (a > 0.0 && b < 0.0)) br.push_back(f.x(k) + (f.x(k + 1) - f.x(k)) * a / (a - b));
  }
  // the two extrapolated rays may cross zero as well
  for (std::size_t k : {std::size_t{0}, f.size() - 2}) {
    const double s = f.slope(k);
    if (s != 0.0) br.push_back(f.x(k) - f.v(k) / s);
  }
  auto part = [&](double x) {
    const double v = f(x);
    return sign > 0 ? std::max(v, 0.0) : (sign < 0 ? std::max(-v, 0.0) : v);
  };
  return m.integrate(part, br);
}

inline std::vector<std::size_t> subsample(std::size_t n, std::size_t m) {
  std::vector<std::size_t> idx;
  if (n <= m) {
    for (std::size_t i = 0; i < n; ++i) idx.push_back(i);
    return idx;
  }
  for (std::size_t i = 0; i < m; ++i)
    idx.push_back(static_cast<std::size_t>(std::llround(static_cast<double>(i) * (n - 1) / (m - 1))));
  idx.erase(std::unique(idx.begin(), idx.end()), idx.end());
  return idx;
}

}  // namespace detail

inline HedgeCost hedging_cost(const GridFunction& phi, const GridFunction& psi, const Measure& mu,
                              const Measure& nu) {
  HedgeCost c;
  c.phi_pos = detail::integrate_part(phi, mu, 1);
  c.phi_neg = detail::integrate_part(phi, mu, -1);
  c.psi_pos = detail::integrate_part(psi, nu, 1);
  c.psi_neg = detail::integrate_part(psi, nu, -1);
  const bool diverge = !(c.phi_pos <= kDivergenceGuard) || !(c.psi_pos <= kDivergenceGuard);
  // (-inf) + (+inf) = +inf, so a divergent positive part always wins
  c.total = diverge ? std::numeric_limits<double>::infinity()
                    : (c.phi_pos - c.phi_neg) + (c.psi_pos - c.psi_neg);
  return c;
}

// Checks a(x) <= phi(x) + psi(y) + theta1(x)(y-x) and
// b(y) <= phi(x) + psi(y) + theta2(x)(y-x) on the product of psi's grid
// (subsampled to at most max_points per axis).
inline VerifyResult verify_superhedge(const Superhedge& s, const RealFn& a, const RealFn& b,
                                      double slack = 1e-8, std::size_t max_points = 401) {
  VerifyResult r;
  const auto idx = detail::subsample(s.psi.size(), max_points);
  std::vector<double> pts, av, bv, psiv, phiv, t1, t2;
  for (std::size_t i : idx) {
    const double x = s.psi.x(i);
    pts.push_back(x);
    av.push_back(a(x));
    bv.push_back(b(x));
    psiv.push_back(s.psi.v(i));
    phiv.push_back(s.phi(x));
    t1.push_back(s.theta1(x));
    t2.push_back(s.theta2(x));
  }
  for (std::size_t i = 0; i < pts.size(); ++i)
    r.scale = std::max({r.scale, std::abs(av[i]), std::abs(bv[i])});
  for (std::size_t i = 0; i < pts.size(); ++i) {
    for (std::size_t j = 0; j < pts.size(); ++j) {
      const double dy = pts[j] - pts[i];
      const double m1 = phiv[i] + psiv[j] + t1[i] * dy - av[i];
      const double m2 = phiv[i] + psiv[j] + t2[i] * dy - bv[j];
      if (m1 < r.worst) {
        r.worst = m1;
        r.x = pts[i];
        r.y = pts[j];
        r.branch = 1;
      }
      if (m2 < r.worst) {
        r.worst = m2;
        r.x = pts[i];
        r.y = pts[j];
        r.branch = 2;
      }
    }
  }
  r.ok = r.worst >= -slack * (1.0 + r.scale);
  return r;
}

struct ReductionStage {
  std::string name;
  Superhedge hedge;
};

// Payoffs and marginals that every hedging operation is bound to.
class HedgingSession {
 public:
  HedgingSession(RealFn a, RealFn b, const Measure& mu, const Measure& nu, double slack = 1e-8,
                 std::size_t verify_points = 401)
      : a_(std::move(a)), b_(std::move(b)), mu_(mu), nu_(nu), slack_(slack),
        verify_points_(verify_points) {}

  const RealFn& a() const { return a_; }
  const RealFn& b() const { return b_; }

  HedgeCost cost(const Superhedge& s) const { return hedging_cost(s.phi, s.psi, mu_, nu_); }

  VerifyResult verify(const Superhedge& s) const {
    return verify_superhedge(s, a_, b_, slack_, verify_points_);
  }

  // Stamps cost and verification state onto a hand-assembled hedge.
  Superhedge finalize(Superhedge s) const {
    s.verified = verify(s).ok;
    s.cost = cost(s);
    return s;
  }

  // ((a - psi)^+, psi, -psi', 0) for convex psi >= b.
  Superhedge generate(const GridFunction& psi) const {
    require(is_convex(psi, 1e-10), ErrorKind::invalid_generator, "generator psi is not convex");
    for (std::size_t i = 0; i < psi.size(); ++i) {
      const double bv = b_(psi.x(i));
      require(psi.v(i) >= bv - 1e-12 * (1.0 + std::abs(bv)), ErrorKind::invalid_generator,
              "generator psi lies below b");
    }
    Superhedge s;
    s.psi = psi;
    s.phi = GridFunction::sample(psi.grid(), [&](double x) { return a_(x); }) - psi;
    s.phi = s.phi.positive_part();
    s.theta1 = -psi.right_slopes();
    s.theta2 = GridFunction(psi.grid(), std::vector<double>(psi.size(), 0.0));
    s = finalize(std::move(s));
    require(s.verified, ErrorKind::numerical_failure, "generated superhedge failed verification");
    return s;
  }

  // Replace psi by its convex envelope, keep phi and theta.
  Superhedge convexify(const Superhedge& s) const {
    Superhedge out = s;
    out.psi = convex_envelope(s.psi);
    return checked(std::move(out), "convexify");
  }

  // phi = (a - psi) v (-(psi - b)^c), theta1 = -psi', theta2 = -((psi - b)^c)'.
  Superhedge tighten(const Superhedge& s) const {
    const GridFunction h = excess_envelope(s.psi);
    Superhedge out;
    out.psi = s.psi;
    const GridFunction av = GridFunction::sample(s.psi.grid(), [&](double x) { return a_(x); });
    out.phi = max(av - s.psi, -h);
    out.theta1 = -s.psi.right_slopes();
    out.theta2 = -h.right_slopes();
    return checked(std::move(out), "tighten");
  }

  // Generate from psi - (psi - b)^c.
  Superhedge collapse(const Superhedge& s) const {
    const GridFunction h = excess_envelope(s.psi);
    const GridFunction psi_hat = s.psi - h;
    Superhedge out = generate(psi_hat);
    require(excess_envelope_sup(out.psi) <= 1e-9, ErrorKind::numerical_failure,
            "collapsed psi keeps a nonzero excess envelope");
    return out;
  }

  // (psi - b)^c on psi's grid
  GridFunction excess_envelope(const GridFunction& psi) const {
    return convex_envelope(psi.map([&](double x, double v) { return v - b_(x); }));
  }
  double excess_envelope_sup(const GridFunction& psi) const {
    return excess_envelope(psi).max_abs();
  }

  // input (verified) -> convexified -> tightened -> collapsed
  std::vector<ReductionStage> reduce(const Superhedge& input) const {
    Superhedge in = finalize(input);
    require(in.verified, ErrorKind::invalid_generator, "input is not a superhedge");
    std::vector<ReductionStage> trail;
    trail.push_back({"input", in});
    trail.push_back({"convexified", convexify(trail.back().hedge)});
    trail.push_back({"tightened", tighten(trail.back().hedge)});
    trail.push_back({"collapsed", collapse(trail.back().hedge)});
    return trail;
  }

 private:
  Superhedge checked(Superhedge s, const char* stage) const {
    s = finalize(std::move(s));
    require(s.verified, ErrorKind::numerical_failure,
            std::string(stage) + " output failed superhedge verification");
    return s;
  }

  RealFn a_, b_;
  const Measure& mu_;
  const Measure& nu_;
  double slack_;
  std::size_t verify_points_;
};

}  // namespace bermudan
