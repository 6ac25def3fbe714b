#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <memory>
#include <numbers>
#include <utility>
#include <vector>

#include "bermudan/density.hpp"
#include "bermudan/error.hpp"
#include "bermudan/grid_function.hpp"
#include "bermudan/measure.hpp"
#include "bermudan/numeric/roots.hpp"

namespace bermudan {

struct KernelPoint {
  double loc = 0.0;
  double weight = 0.0;
};

// One- or two-point law with barycenter x.
struct TwoPointKernel {
  double x = 0.0;
  int n = 1;
  std::array<KernelPoint, 2> pts{};

  double mean() const { return n == 1 ? pts[0].loc : pts[0].weight * pts[0].loc + pts[1].weight * pts[1].loc; }

  template <class F>
  double expect(F&& f) const {
    return n == 1 ? f(pts[0].loc) : pts[0].weight * f(pts[0].loc) + pts[1].weight * f(pts[1].loc);
  }

  static TwoPointKernel delta(double x) {
    TwoPointKernel k;
    k.x = x;
    k.n = 1;
    k.pts[0] = {x, 1.0};
    return k;
  }

  // Weights (hi - x)/(hi - lo) at lo and (x - lo)/(hi - lo) at hi.
  static TwoPointKernel barycentric(double lo, double x, double hi) {
    if (!(hi > lo)) return delta(x);
    TwoPointKernel k;
    k.x = x;
    k.n = 2;
    const double w = hi - lo;
    k.pts[0] = {lo, (hi - x) / w};
    k.pts[1] = {hi, (x - lo) / w};
    return k;
  }
};

using DensityPtr = std::shared_ptr<const PiecewiseDensity>;

inline DensityPtr restrict_density(const Measure& m, std::vector<PiecewiseDensity::Interval> ivs,
                                   int panels = 1024) {
  auto pd = m.table_ptr();
  return std::make_shared<PiecewiseDensity>([pd](double x) { return (*pd)(x); }, std::move(ivs),
                                            pd->kinks(), panels);
}

// (plus - minus)^+ restricted to the given intervals.
inline DensityPtr difference_density(const Measure& plus, const Measure& minus,
                                     std::vector<PiecewiseDensity::Interval> ivs,
                                     int panels = 1024) {
  auto p = plus.table_ptr(), q = minus.table_ptr();
  std::vector<double> kinks = p->kinks();
  kinks.insert(kinks.end(), q->kinks().begin(), q->kinks().end());
  return std::make_shared<PiecewiseDensity>(
      [p, q](double x) { return std::max(0.0, (*p)(x) - (*q)(x)); }, std::move(ivs), kinks,
      panels);
}

// ---------------------------------------------------------------- curtains

enum class Orientation { right, left };

struct CurtainPoint {
  double x = 0.0, f = 0.0, g = 0.0;
  double mass_residual = 0.0, mean_residual = 0.0;
  int iterations = 0;
};

// Right curtain at x: f <= x <= g with the same mass and mean of mu on [x, g]
// and nu on [f, g]. Mass pins f for each trial g; the mean residual is
// increasing in g on [e, hi(nu)].
inline CurtainPoint right_curtain_point(const PiecewiseDensity& mu, const PiecewiseDensity& nu,
                                        double e, double x) {
  CurtainPoint c;
  c.x = x;
  if (x >= e) {
    c.f = c.g = x;
    return c;
  }
  auto f_of = [&](double g, double m) { return nu.left_point_for_mass(g, m); };
  auto resid = [&](double g) {
    const double m = mu.mass(x, g);
    if (m > nu.cdf(g) * (1.0 + 1e-15)) return -std::numeric_limits<double>::infinity();
    const double f = f_of(g, m);
    return nu.moment(f, g, x) - mu.moment(x, g, x);
  };
  const auto root = numeric::bisect_increasing(resid, e, nu.hi());
  c.iterations = root.iterations;
  c.g = root.x;
  const double m = mu.mass(x, c.g);
  c.f = f_of(c.g, m);
  c.mass_residual = std::abs(nu.mass(c.f, c.g) - m);
  c.mean_residual = std::abs(nu.moment(c.f, c.g, x) - mu.moment(x, c.g, x));
  return c;
}

inline std::vector<double> curtain_nodes(double lo, double e, int n) {
  std::vector<double> xs(n);
  for (int k = 0; k < n; ++k) {
    const double t = static_cast<double>(k) / (n - 1);
    xs[k] = k + 1 == n ? e : lo + (e - lo) * std::sin(0.5 * std::numbers::pi * t);
  }
  return xs;
}

class CurtainMap {
 public:
  Orientation orientation() const { return orient_; }
  bool reflected() const { return reflected_; }
  double e() const { return e_; }
  // domain of the two-point part: (lo, e) for right, (-e, hi) for left
  double domain_lo() const { return xs_.front(); }
  double domain_hi() const { return xs_.back(); }
  // whole source support where the kernel is defined (stay part included)
  double support_lo() const { return support_lo_; }
  double support_hi() const { return support_hi_; }

  GridFunction f() const { return GridFunction(xs_, fs_); }
  GridFunction g() const { return GridFunction(xs_, gs_); }
  const std::vector<double>& nodes() const { return xs_; }
  const std::vector<double>& f_nodes() const { return fs_; }
  const std::vector<double>& g_nodes() const { return gs_; }
  double max_mass_residual() const { return max_mass_res_; }
  double max_mean_residual() const { return max_mean_res_; }

  // fresh solve of the defining equations at x
  CurtainPoint solve(double x) const {
    if (orient_ == Orientation::right) {
      if (x >= e_) return CurtainPoint{x, x, x, 0, 0, 0};
      return right_curtain_point(*mu_, *nu_, e_, x);
    }
    if (x <= -e_) return CurtainPoint{x, x, x, 0, 0, 0};
    CurtainPoint r = right_curtain_point(*mu_, *nu_, e_, -x);
    return CurtainPoint{x, -r.g, -r.f, r.mass_residual, r.mean_residual, r.iterations};
  }

  // interpolated boundary values
  std::pair<double, double> fg(double x) const {
    check_domain(x);
    if (stays(x)) return {x, x};
    const std::size_t k = segment(x);
    const double t = (x - xs_[k]) / (xs_[k + 1] - xs_[k]);
    return {fs_[k] + t * (fs_[k + 1] - fs_[k]), gs_[k] + t * (gs_[k + 1] - gs_[k])};
  }

  TwoPointKernel kernel_at(double x) const {
    check_domain(x);
    if (stays(x)) return TwoPointKernel::delta(x);
    const auto [f, g] = fg(x);
    return TwoPointKernel::barycentric(std::min(f, x), x, std::max(g, x));
  }

  TwoPointKernel kernel_exact(double x) const {
    check_domain(x);
    if (stays(x)) return TwoPointKernel::delta(x);
    const CurtainPoint c = solve(x);
    return TwoPointKernel::barycentric(c.f, x, c.g);
  }

  bool stays(double x) const { return orient_ == Orientation::right ? x >= e_ : x <= -e_; }

  friend CurtainMap solve_right_curtain(const Measure& mu, const Measure& nu, double e, int n);
  friend CurtainMap solve_left_curtain(const CurtainMap& right);

 private:
  void check_domain(double x) const {
    if (!(x >= support_lo_ && x <= support_hi_))
      fail(ErrorKind::domain_error, "curtain kernel evaluated outside the mu support");
  }
  std::size_t segment(double x) const {
    if (x <= xs_.front()) return 0;
    if (x >= xs_.back()) return xs_.size() - 2;
    return static_cast<std::size_t>(std::upper_bound(xs_.begin(), xs_.end(), x) - xs_.begin()) - 1;
  }

  Orientation orient_ = Orientation::right;
  bool reflected_ = false;
  double e_ = 0.0, support_lo_ = 0.0, support_hi_ = 0.0;
  DensityPtr mu_, nu_;
  std::vector<double> xs_, fs_, gs_;
  double max_mass_res_ = 0.0, max_mean_res_ = 0.0;
};

inline CurtainMap solve_right_curtain(const Measure& mu, const Measure& nu, double e, int n) {
  require(mu.is_density() && nu.is_density(), ErrorKind::assumption_violated,
          "curtain couplings need densities");
  require(n >= 64, ErrorKind::invalid_spec, "curtain map needs >= 64 nodes");
  require(e > mu.lo() && e < mu.hi(), ErrorKind::assumption_violated, "crossing e outside support");
  CurtainMap m;
  m.orient_ = Orientation::right;
  m.e_ = e;
  m.mu_ = mu.table_ptr();
  m.nu_ = nu.table_ptr();
  m.support_lo_ = mu.lo();
  m.support_hi_ = mu.hi();
  m.xs_ = curtain_nodes(mu.lo(), e, n);
  for (double x : m.xs_) {
    const CurtainPoint c = right_curtain_point(*m.mu_, *m.nu_, e, x);
    m.fs_.push_back(c.f);
    m.gs_.push_back(c.g);
    m.max_mass_res_ = std::max(m.max_mass_res_, c.mass_residual);
    m.max_mean_res_ = std::max(m.max_mean_res_, c.mean_residual);
  }
  if (m.max_mass_res_ > 1e-8 || m.max_mean_res_ > 1e-8)
    fail(ErrorKind::numerical_failure, "right curtain residual above 1e-8");
  for (std::size_t k = 1; k < m.xs_.size(); ++k) {
    if (m.fs_[k] < m.fs_[k - 1] - 1e-9 || m.gs_[k] > m.gs_[k - 1] + 1e-9)
      fail(ErrorKind::numerical_failure, "right curtain boundaries are not monotone");
  }
  return m;
}

// Left curtain by reflection: f^L(x) = -g^R(-x), g^L(x) = -f^R(-x).
inline CurtainMap solve_left_curtain(const CurtainMap& right) {
  require(right.orientation() == Orientation::right, ErrorKind::invalid_spec,
          "reflection needs a right curtain");
  CurtainMap m = right;
  m.orient_ = Orientation::left;
  m.reflected_ = true;
  m.support_lo_ = -right.support_hi_;
  m.support_hi_ = -right.support_lo_;
  const std::size_t n = right.xs_.size();
  for (std::size_t k = 0; k < n; ++k) {
    m.xs_[k] = -right.xs_[n - 1 - k];
    m.fs_[k] = -right.gs_[n - 1 - k];
    m.gs_[k] = -right.fs_[n - 1 - k];
  }
  return m;
}

inline CurtainMap solve_left_curtain(const Measure& mu, const Measure& nu, double e, int n) {
  require(mu.symmetric() && nu.symmetric(), ErrorKind::assumption_violated,
          "left curtain by reflection needs symmetric measures");
  return solve_left_curtain(solve_right_curtain(mu, nu, e, n));
}

// x0 in (0, e) with f^R(x0) = 0.
inline double find_x0(const CurtainMap& right) {
  require(right.orientation() == Orientation::right, ErrorKind::invalid_spec,
          "x0 is defined on the right curtain");
  auto f = [&](double x) { return right.solve(x).f; };
  const double e = right.e();
  if (!(f(0.0) < 0.0) || !(f(e * (1.0 - 1e-12)) > 0.0))
    fail(ErrorKind::assumption_violated, "f^R has no sign change on (0, e)");
  const auto r = numeric::bisect_increasing(f, 0.0, e);
  // g^L(-x0) = -f^R(x0) by reflection
  if (std::abs(f(r.x)) > 1e-7) fail(ErrorKind::numerical_failure, "g^L(-x0) differs from zero");
  return r.x;
}

// ---------------------------------------------------------------- Hobson-Klimmek

struct HKPoint {
  double x = 0.0, p = 0.0, q = 0.0;
  double mass_residual = 0.0, mean_residual = 0.0;
  int iterations = 0;
};

// chi inside (-c, c), xi outside [-d, d] (d >= c). The chi-mass left of x
// is sent to xi on (p, -d] and [q, hi) with matching mass and mean.
inline HKPoint hk_point(const PiecewiseDensity& chi, const PiecewiseDensity& xi, double d,
                        double x) {
  HKPoint h;
  h.x = x;
  const double m0 = chi.mass(chi.lo(), x);
  const double m1 = chi.moment(chi.lo(), x, x);
  const double left_max = xi.mass(xi.lo(), -d);
  if (!(m0 > 0.0)) {
    h.p = -d;
    h.q = xi.hi();
    return h;
  }
  auto resid = [&](double q) {
    const double right = xi.mass(q, xi.hi());
    const double left = m0 - right;
    if (left < 0.0) return std::numeric_limits<double>::infinity();
    if (left > left_max) return -std::numeric_limits<double>::infinity();
    const double p = xi.left_point_for_mass(-d, left);
    return xi.moment(q, xi.hi(), x) + xi.moment(p, -d, x) - m1;
  };
  const auto root = numeric::bisect_decreasing(resid, d, xi.hi());
  h.iterations = root.iterations;
  h.q = root.x;
  const double right = xi.mass(h.q, xi.hi());
  h.p = xi.left_point_for_mass(-d, std::max(0.0, m0 - right));
  h.mass_residual = std::abs(right + xi.mass(h.p, -d) - m0);
  h.mean_residual = std::abs(xi.moment(h.q, xi.hi(), x) + xi.moment(h.p, -d, x) - m1);
  return h;
}

class HKMap {
 public:
  double c() const { return c_; }
  double d() const { return d_; }
  const PiecewiseDensity& chi() const { return *chi_; }
  const PiecewiseDensity& xi() const { return *xi_; }
  DensityPtr chi_ptr() const { return chi_; }
  DensityPtr xi_ptr() const { return xi_; }
  const std::vector<double>& nodes() const { return xs_; }
  const std::vector<double>& p_nodes() const { return ps_; }
  const std::vector<double>& q_nodes() const { return qs_; }
  double max_mass_residual() const { return max_mass_res_; }
  double max_mean_residual() const { return max_mean_res_; }
  // recorded, not enforced
  bool q_monotone() const { return q_monotone_; }
  bool p_monotone() const { return p_monotone_; }

  bool in_source(double x) const { return chi_->inside(x); }

  HKPoint solve(double x) const {
    check_domain(x);
    return hk_point(*chi_, *xi_, d_, x);
  }

  std::pair<double, double> pq(double x) const {
    check_domain(x);
    if (x <= xs_.front()) return {ps_.front(), qs_.front()};
    if (x >= xs_.back()) return {ps_.back(), qs_.back()};
    const std::size_t k =
        static_cast<std::size_t>(std::upper_bound(xs_.begin(), xs_.end(), x) - xs_.begin()) - 1;
    const double t = (x - xs_[k]) / (xs_[k + 1] - xs_[k]);
    return {ps_[k] + t * (ps_[k + 1] - ps_[k]), qs_[k] + t * (qs_[k + 1] - qs_[k])};
  }

  TwoPointKernel kernel_at(double x) const {
    const auto [p, q] = pq(x);
    return TwoPointKernel::barycentric(p, x, q);
  }

  TwoPointKernel kernel_exact(double x) const {
    const HKPoint h = solve(x);
    return TwoPointKernel::barycentric(h.p, x, h.q);
  }

  friend HKMap solve_hk(DensityPtr chi, DensityPtr xi, int n);

 private:
  void check_domain(double x) const {
    if (!chi_->inside(x)) fail(ErrorKind::domain_error, "HK kernel evaluated outside its source");
  }

  DensityPtr chi_, xi_;
  double c_ = 0.0, d_ = 0.0;
  std::vector<double> xs_, ps_, qs_;
  double max_mass_res_ = 0.0, max_mean_res_ = 0.0;
  bool q_monotone_ = true, p_monotone_ = true;
};

inline HKMap solve_hk(DensityPtr chi, DensityPtr xi, int n) {
  require(n >= 8, ErrorKind::invalid_spec, "HK map needs >= 8 nodes");
  HKMap m;
  m.chi_ = std::move(chi);
  m.xi_ = std::move(xi);
  const auto& chi_iv = m.chi_->intervals();
  const auto& xi_iv = m.xi_->intervals();
  m.c_ = std::max(std::abs(m.chi_->lo()), std::abs(m.chi_->hi()));
  m.d_ = std::numeric_limits<double>::infinity();
  for (const auto& [a, b] : xi_iv) {
    if (a >= 0.0) m.d_ = std::min(m.d_, a);
    if (b <= 0.0) m.d_ = std::min(m.d_, -b);
    if (a < 0.0 && b > 0.0) m.d_ = 0.0;
  }
  require(m.d_ >= m.c_ && m.d_ > 0.0, ErrorKind::invalid_pair, "HK source and target overlap");
  require(m.xi_->lo() < -m.d_ && m.xi_->hi() > m.d_, ErrorKind::invalid_pair,
          "HK target needs mass on both sides");
  const double mass_gap = m.chi_->total_mass() - m.xi_->total_mass();
  const double mean_gap = m.chi_->total_moment() - m.xi_->total_moment();
  if (std::abs(mass_gap) > 1e-9 || std::abs(mean_gap) > 1e-9)
    fail(ErrorKind::invalid_pair, "HK source and target differ in mass or mean");

  const int per = std::max(8, n / static_cast<int>(chi_iv.size()));
  for (const auto& [a, b] : chi_iv) {
    for (int k = 0; k < per; ++k) {
      const double t = static_cast<double>(k) / (per - 1);
      double x = a + (b - a) * 0.5 * (1.0 - std::cos(std::numbers::pi * t));
      if (k == 0) x = a;
      if (k + 1 == per) x = b;
      const HKPoint h = hk_point(*m.chi_, *m.xi_, m.d_, x);
      m.xs_.push_back(x);
      m.ps_.push_back(h.p);
      m.qs_.push_back(h.q);
      m.max_mass_res_ = std::max(m.max_mass_res_, h.mass_residual);
      m.max_mean_res_ = std::max(m.max_mean_res_, h.mean_residual);
    }
  }
  for (std::size_t k = 1; k < m.xs_.size(); ++k) {
    if (m.qs_[k] > m.qs_[k - 1] + 1e-9) m.q_monotone_ = false;
    if (m.ps_[k] > m.ps_[k - 1] + 1e-9) m.p_monotone_ = false;
  }
  if (m.max_mass_res_ > 1e-8 || m.max_mean_res_ > 1e-8)
    fail(ErrorKind::numerical_failure, "HK residual above 1e-8");
  return m;
}

}  // namespace bermudan
