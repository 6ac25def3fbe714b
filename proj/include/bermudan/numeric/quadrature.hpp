#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <vector>

#include <boost/math/quadrature/gauss.hpp>

namespace bermudan::numeric {

// Full 8-point Gauss-Legendre rule on [-1, 1].
struct GaussLegendre8 {
  std::array<double, 8> x{};
  std::array<double, 8> w{};

  GaussLegendre8() {
    using Rule = boost::math::quadrature::gauss<double, 8>;
    const auto& ax = Rule::abscissa();
    const auto& aw = Rule::weights();
    for (std::size_t i = 0; i < 4; ++i) {
      x[i] = -ax[3 - i];
      w[i] = aw[3 - i];
      x[7 - i] = ax[3 - i];
      w[7 - i] = aw[3 - i];
    }
  }

  static const GaussLegendre8& get() {
    static const GaussLegendre8 rule;
    return rule;
  }
};

// Composite 30-point Gauss-Legendre on [a, b]: pieces split at the given
// breakpoints, each piece cut into panels no wider than (b - a) / min_panels.
// Integrands are expected to be smooth between breakpoints.
template <class F>
double integrate(F&& f, double a, double b, const std::vector<double>& breaks = {},
                 int min_panels = 64) {
  if (!(b > a)) return 0.0;
  std::vector<double> pts{a};
  for (double t : breaks)
    if (t > a && t < b) pts.push_back(t);
  pts.push_back(b);
  std::sort(pts.begin(), pts.end());
  pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
  const double max_w = (b - a) / std::max(min_panels, 1);
  double sum = 0.0;
  for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
    const double len = pts[i + 1] - pts[i];
    const int np = std::max(1, static_cast<int>(std::ceil(len / max_w - 1e-9)));
    for (int k = 0; k < np; ++k) {
      const double lo = pts[i] + len * k / np;
      const double hi = k + 1 == np ? pts[i + 1] : pts[i] + len * (k + 1) / np;
      sum += boost::math::quadrature::gauss<double, 30>::integrate(f, lo, hi);
    }
  }
  return sum;
}

// Fixed double-exponential (tanh-sinh) rule with n nodes on (0, 1). Nodes never
// touch the endpoints, so integrable endpoint singularities are fine.
class TanhSinhRule {
 public:
  explicit TanhSinhRule(int n) {
    n = std::max(n, 3);
    // t range chosen so that the smallest offset from an endpoint is about 1e-14.
    const double tmax = std::asinh(std::log(1e14) / std::numbers::pi);
    const double h = 2.0 * tmax / (n - 1);
    for (int k = 0; k < n; ++k) {
      const double t = -tmax + h * k;
      const double s = std::numbers::pi * std::sinh(t);
      // u = 1/(1+exp(-s)); offsets from both ends computed without cancellation.
      const double lo_off = 1.0 / (1.0 + std::exp(-s));
      const double hi_off = 1.0 / (1.0 + std::exp(s));
      const double dudt = std::numbers::pi * std::cosh(t) * lo_off * hi_off;
      lo_off_.push_back(lo_off);
      hi_off_.push_back(hi_off);
      w_.push_back(h * dudt);
    }
  }

  std::size_t size() const { return w_.size(); }

  // Node k mapped into (a, b).
  double node(std::size_t k, double a, double b) const {
    const double width = b - a;
    return lo_off_[k] <= 0.5 ? a + width * lo_off_[k] : b - width * hi_off_[k];
  }
  double weight(std::size_t k, double a, double b) const { return w_[k] * (b - a); }

  template <class F>
  double integrate(F&& f, double a, double b) const {
    if (!(b > a)) return 0.0;
    double sum = 0.0;
    for (std::size_t k = 0; k < w_.size(); ++k) sum += weight(k, a, b) * f(node(k, a, b));
    return sum;
  }

 private:
  std::vector<double> lo_off_, hi_off_, w_;
};

}  // namespace bermudan::numeric
