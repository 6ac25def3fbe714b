#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "bermudan/error.hpp"

namespace bermudan {

enum class Extrapolation { linear, forbid };

// Piecewise-linear function through (grid[i], values[i]).
class GridFunction {
 public:
  GridFunction() = default;
  GridFunction(std::vector<double> grid, std::vector<double> values,
               Extrapolation ext = Extrapolation::linear)
      : x_(std::move(grid)), v_(std::move(values)), ext_(ext) {
    require(x_.size() >= 2 && x_.size() == v_.size(), ErrorKind::invalid_spec,
            "grid function needs >= 2 matching nodes");
    for (std::size_t i = 0; i < x_.size(); ++i) {
      require(std::isfinite(x_[i]) && std::isfinite(v_[i]), ErrorKind::invalid_spec,
              "grid function entries must be finite");
      if (i > 0) require(x_[i] > x_[i - 1], ErrorKind::invalid_spec, "grid must be strictly increasing");
    }
  }

  template <class F>
  static GridFunction sample(const std::vector<double>& grid, F&& f,
                             Extrapolation ext = Extrapolation::linear) {
    std::vector<double> v(grid.size());
    for (std::size_t i = 0; i < grid.size(); ++i) v[i] = f(grid[i]);
    return GridFunction(grid, std::move(v), ext);
  }

  static std::vector<double> uniform_grid(double lo, double hi, std::size_t n) {
    std::vector<double> g(n);
    for (std::size_t i = 0; i < n; ++i)
      g[i] = i + 1 == n ? hi : lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n - 1);
    return g;
  }

  std::size_t size() const { return x_.size(); }
  const std::vector<double>& grid() const { return x_; }
  const std::vector<double>& values() const { return v_; }
  double x(std::size_t i) const { return x_[i]; }
  double v(std::size_t i) const { return v_[i]; }
  double lo() const { return x_.front(); }
  double hi() const { return x_.back(); }
  Extrapolation extrapolation() const { return ext_; }

  std::size_t segment(double t) const {
    if (t <= x_.front()) return 0;
    if (t >= x_.back()) return x_.size() - 2;
    return static_cast<std::size_t>(std::upper_bound(x_.begin(), x_.end(), t) - x_.begin()) - 1;
  }

  double operator()(double t) const {
    if ((t < x_.front() || t > x_.back()) && ext_ == Extrapolation::forbid)
      fail(ErrorKind::domain_error, "grid function evaluated outside its grid");
    const std::size_t k = segment(t);
    if (t == x_[k]) return v_[k];
    if (t == x_[k + 1]) return v_[k + 1];
    const double s = (v_[k + 1] - v_[k]) / (x_[k + 1] - x_[k]);
    return v_[k] + s * (t - x_[k]);
  }

  double slope(std::size_t k) const { return (v_[k + 1] - v_[k]) / (x_[k + 1] - x_[k]); }

  // Slope of the segment to the right of each node; the last node reuses the last segment.
  GridFunction right_slopes() const {
    std::vector<double> s(x_.size());
    for (std::size_t k = 0; k + 1 < x_.size(); ++k) s[k] = slope(k);
    s.back() = s[s.size() - 2];
    return GridFunction(x_, std::move(s), ext_);
  }

  template <class F>
  GridFunction map(F&& f) const {
    std::vector<double> out(v_.size());
    for (std::size_t i = 0; i < v_.size(); ++i) out[i] = f(x_[i], v_[i]);
    return GridFunction(x_, std::move(out), ext_);
  }

  GridFunction operator-() const {
    return map([](double, double v) { return -v; });
  }

  friend GridFunction operator+(const GridFunction& l, const GridFunction& r) {
    l.require_same_grid(r);
    return l.map_with(r, [](double a, double b) { return a + b; });
  }
  friend GridFunction operator-(const GridFunction& l, const GridFunction& r) {
    l.require_same_grid(r);
    return l.map_with(r, [](double a, double b) { return a - b; });
  }
  friend GridFunction max(const GridFunction& l, const GridFunction& r) {
    l.require_same_grid(r);
    return l.map_with(r, [](double a, double b) { return std::max(a, b); });
  }
  GridFunction positive_part() const {
    return map([](double, double v) { return std::max(v, 0.0); });
  }

  double max_abs() const {
    double m = 0.0;
    for (double v : v_) m = std::max(m, std::abs(v));
    return m;
  }

  void require_same_grid(const GridFunction& r) const {
    require(x_ == r.x_, ErrorKind::invalid_spec, "grid functions live on different grids");
  }

 private:
  template <class Op>
  GridFunction map_with(const GridFunction& r, Op op) const {
    std::vector<double> out(v_.size());
    for (std::size_t i = 0; i < v_.size(); ++i) out[i] = op(v_[i], r.v_[i]);
    return GridFunction(x_, std::move(out), ext_);
  }

  std::vector<double> x_, v_;
  Extrapolation ext_ = Extrapolation::linear;
};

// Largest convex minorant of the sampled points, evaluated back on the grid
// (lower hull by a single monotone-chain pass).
inline GridFunction convex_envelope(const GridFunction& f) {
  const auto& x = f.grid();
  const auto& v = f.values();
  std::vector<std::size_t> hull;
  hull.reserve(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    while (hull.size() >= 2) {
      const std::size_t a = hull[hull.size() - 2], b = hull.back();
      // drop b if it lies on or above the chord from a to i
      const double cross = (x[b] - x[a]) * (v[i] - v[a]) - (v[b] - v[a]) * (x[i] - x[a]);
      if (cross <= 0.0)
        hull.pop_back();
      else
        break;
    }
    hull.push_back(i);
  }
  std::vector<double> out(x.size());
  std::size_t h = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    while (h + 1 < hull.size() && hull[h + 1] <= i) ++h;
    const std::size_t a = hull[h];
    if (a == i) {
      out[i] = v[i];
      continue;
    }
    const std::size_t b = hull[h + 1];
    const double t = (x[i] - x[a]) / (x[b] - x[a]);
    out[i] = std::min(v[i], v[a] + t * (v[b] - v[a]));
  }
  return GridFunction(x, std::move(out), f.extrapolation());
}

// Largest deviation of f from its envelope, relative to 1 + max|f|.
inline double convexity_defect(const GridFunction& f) {
  const GridFunction env = convex_envelope(f);
  double d = 0.0;
  for (std::size_t i = 0; i < f.size(); ++i) d = std::max(d, f.v(i) - env.v(i));
  return d / (1.0 + f.max_abs());
}

inline bool is_convex(const GridFunction& f, double tol = 1e-10) { return convexity_defect(f) <= tol; }

}  // namespace bermudan
