#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <memory>
#include <utility>
#include <vector>

#include "bermudan/error.hpp"
#include "bermudan/numeric/quadrature.hpp"

namespace bermudan {

// A nonnegative density supported on a finite union of disjoint closed
// intervals, with cached panel integrals of the mass and first moment.
// Short-range masses are summed locally so that tiny masses keep full
// relative precision.
class PiecewiseDensity {
 public:
  using Fn = std::function<double(double)>;
  using Interval = std::pair<double, double>;

  PiecewiseDensity(Fn rho, std::vector<Interval> intervals, std::vector<double> kinks,
                   int panels = 2048)
      : rho_(std::move(rho)), intervals_(std::move(intervals)) {
    std::sort(intervals_.begin(), intervals_.end());
    intervals_.erase(std::remove_if(intervals_.begin(), intervals_.end(),
                                    [](const Interval& iv) { return !(iv.second > iv.first); }),
                     intervals_.end());
    require(!intervals_.empty(), ErrorKind::invalid_spec, "density has empty support");
    for (std::size_t i = 1; i < intervals_.size(); ++i)
      require(intervals_[i].first >= intervals_[i - 1].second, ErrorKind::invalid_spec,
              "support intervals overlap");
    double total_len = 0.0;
    for (const auto& iv : intervals_) total_len += iv.second - iv.first;

    for (const auto& [a, b] : intervals_) {
      std::vector<double> cuts{a};
      for (double k : kinks)
        if (k > a && k < b) cuts.push_back(k);
      cuts.push_back(b);
      std::sort(cuts.begin(), cuts.end());
      cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());
      for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
        kinks_.push_back(cuts[i]);
        const double len = cuts[i + 1] - cuts[i];
        const int np = std::max(2, static_cast<int>(std::ceil(panels * len / total_len)));
        for (int k = 0; k < np; ++k) {
          const double pa = cuts[i] + len * k / np;
          const double pb = k + 1 == np ? cuts[i + 1] : cuts[i] + len * (k + 1) / np;
          pa_.push_back(pa);
          pb_.push_back(pb);
        }
      }
      kinks_.push_back(b);
    }
    std::sort(kinks_.begin(), kinks_.end());
    kinks_.erase(std::unique(kinks_.begin(), kinks_.end()), kinks_.end());

    const std::size_t n = pa_.size();
    m0_.resize(n);
    m1_.resize(n);
    c0_.resize(n + 1);
    c1_.resize(n + 1);
    c0_[0] = c1_[0] = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      const auto [s0, s1] = partial(pa_[k], pb_[k], 0.0);
      require(s0 >= 0.0 && std::isfinite(s0) && std::isfinite(s1), ErrorKind::invalid_spec,
              "density is negative or not finite");
      m0_[k] = s0;
      m1_[k] = s1;
      c0_[k + 1] = c0_[k] + s0;
      c1_[k + 1] = c1_[k] + s1;
    }
  }

  double operator()(double x) const { return inside(x) ? rho_(x) : 0.0; }

  bool inside(double x) const {
    for (const auto& [a, b] : intervals_)
      if (x >= a && x <= b) return true;
    return false;
  }

  double lo() const { return intervals_.front().first; }
  double hi() const { return intervals_.back().second; }
  const std::vector<Interval>& intervals() const { return intervals_; }
  const std::vector<double>& kinks() const { return kinks_; }
  double total_mass() const { return c0_.back(); }
  double total_moment() const { return c1_.back(); }

  double cdf(double x) const { return mass(lo(), x); }

  // mass of [a, b]
  double mass(double a, double b) const { return range(a, b, 0.0).first; }

  // integral of (z - c) rho(z) over [a, b]
  double moment(double a, double b, double c = 0.0) const { return range(a, b, c).second; }

  // Smallest x with cdf(x) = m.
  double quantile(double m) const {
    if (m <= 0.0) return lo();
    if (m >= total_mass()) return hi();
    std::size_t k = std::upper_bound(c0_.begin(), c0_.end(), m) - c0_.begin();
    k = std::min(k == 0 ? 0 : k - 1, pa_.size() - 1);
    const double t = m - c0_[k];
    return solve_in_panel(k, t);
  }

  // f <= b with mass(f, b) = m; lo() if not enough mass below b.
  double left_point_for_mass(double b, double m) const {
    if (m <= 0.0) return std::clamp(b, lo(), hi());
    const double cb = cdf(b);
    if (m >= cb) return lo();
    double f = quantile(cb - m);
    for (int it = 0; it < 4; ++it) {
      const double r = mass(f, b) - m;
      const double d = (*this)(f);
      if (r == 0.0 || !(d > 0.0)) break;
      const double fn = std::clamp(f + r / d, lo(), b);
      if (std::abs(mass(fn, b) - m) >= std::abs(r)) break;
      f = fn;
    }
    return f;
  }

  // g >= a with mass(a, g) = m; hi() if not enough mass above a.
  double right_point_for_mass(double a, double m) const {
    if (m <= 0.0) return std::clamp(a, lo(), hi());
    const double ca = cdf(a);
    if (m >= total_mass() - ca) return hi();
    double g = quantile(ca + m);
    for (int it = 0; it < 4; ++it) {
      const double r = mass(a, g) - m;
      const double d = (*this)(g);
      if (r == 0.0 || !(d > 0.0)) break;
      const double gn = std::clamp(g - r / d, a, hi());
      if (std::abs(mass(a, gn) - m) >= std::abs(r)) break;
      g = gn;
    }
    return g;
  }

  // U(k) = integral of |z - k| rho(z) dz
  double potential(double k) const {
    if (k <= lo()) return (total_moment() - k * total_mass());
    if (k >= hi()) return (k * total_mass() - total_moment());
    return moment(k, hi(), k) - moment(lo(), k, k);
  }

 private:
  std::pair<double, double> partial(double a, double b, double c) const {
    if (!(b > a)) return {0.0, 0.0};
    const auto& gl = numeric::GaussLegendre8::get();
    const double h = 0.5 * (b - a), m = 0.5 * (a + b);
    double s0 = 0.0, s1 = 0.0;
    for (int i = 0; i < 8; ++i) {
      const double z = m + h * gl.x[i];
      const double r = rho_(z) * gl.w[i];
      s0 += r;
      s1 += r * (z - c);
    }
    return {s0 * h, s1 * h};
  }

  // index of the panel containing x, or the last panel left of x; -1 if none
  std::ptrdiff_t panel_of(double x) const {
    return static_cast<std::ptrdiff_t>(std::upper_bound(pa_.begin(), pa_.end(), x) - pa_.begin()) -
           1;
  }

  std::pair<double, double> range(double a, double b, double c) const {
    a = std::max(a, lo());
    b = std::min(b, hi());
    if (!(b > a)) return {0.0, 0.0};
    const std::ptrdiff_t ia = panel_of(a), ib = panel_of(b);
    if (ib - ia <= 16) {
      double s0 = 0.0, s1 = 0.0;
      for (std::ptrdiff_t k = std::max<std::ptrdiff_t>(ia, 0); k <= ib; ++k) {
        const double pa = std::max(pa_[k], a), pb = std::min(pb_[k], b);
        if (!(pb > pa)) continue;
        if (pa == pa_[k] && pb == pb_[k]) {
          s0 += m0_[k];
          s1 += m1_[k] - c * m0_[k];
        } else {
          const auto [p0, p1] = partial(pa, pb, c);
          s0 += p0;
          s1 += p1;
        }
      }
      return {s0, s1};
    }
    const auto [a0, a1] = cumulative(a);
    const auto [b0, b1] = cumulative(b);
    return {b0 - a0, (b1 - a1) - c * (b0 - a0)};
  }

  std::pair<double, double> cumulative(double x) const {
    const std::ptrdiff_t k = panel_of(x);
    if (k < 0) return {0.0, 0.0};
    if (x >= pb_[k]) return {c0_[k + 1], c1_[k + 1]};
    const auto [p0, p1] = partial(pa_[k], x, 0.0);
    return {c0_[k] + p0, c1_[k] + p1};
  }

  double solve_in_panel(std::size_t k, double t) const {
    double lo = pa_[k], hi = pb_[k];
    if (!(m0_[k] > 0.0)) return lo;
    double x = lo + (hi - lo) * std::clamp(t / m0_[k], 0.0, 1.0);
    for (int it = 0; it < 100; ++it) {
      const double r = partial(pa_[k], x, 0.0).first - t;
      if (r == 0.0) return x;
      (r < 0.0 ? lo : hi) = x;
      const double d = rho_(x);
      double xn = d > 0.0 ? x - r / d : 0.5 * (lo + hi);
      if (!(xn > lo && xn < hi)) xn = 0.5 * (lo + hi);
      if (std::abs(xn - x) <= 1e-16 * std::max(1.0, std::abs(x)) || hi - lo <= 0.0) return xn;
      x = xn;
    }
    return x;
  }

  Fn rho_;
  std::vector<Interval> intervals_;
  std::vector<double> kinks_;
  std::vector<double> pa_, pb_, m0_, m1_, c0_, c1_;
};

}  // namespace bermudan
