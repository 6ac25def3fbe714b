#pragma once

#include <algorithm>
#include <cmath>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "bermudan/error.hpp"
#include "bermudan/grid_function.hpp"

namespace bermudan {

struct Line {
  double slope = 0.0;
  double intercept = 0.0;
  double operator()(double x) const { return intercept + slope * x; }
  static Line through(double x0, double y0, double x1, double y1) {
    const double s = (y1 - y0) / (x1 - x0);
    return {s, y0 - s * x0};
  }
};

enum class PayoffFamily { quadratic, pwl, max_of_lines, maximum };

inline std::string to_string(PayoffFamily f) {
  switch (f) {
    case PayoffFamily::quadratic: return "quadratic";
    case PayoffFamily::pwl: return "pwl";
    case PayoffFamily::max_of_lines: return "max_of_lines";
    case PayoffFamily::maximum: return "maximum";
  }
  return "unknown";
}

// Payoff evaluator restricted to families whose convexity is checkable.
class Payoff {
 public:
  static Payoff quadratic(double c0, double c2, double c1 = 0.0) {
    require(std::isfinite(c0) && std::isfinite(c1) && std::isfinite(c2), ErrorKind::invalid_spec,
            "quadratic coefficients must be finite");
    Payoff p(PayoffFamily::quadratic);
    p.c0_ = c0;
    p.c1_ = c1;
    p.c2_ = c2;
    return p;
  }

  // Linear interpolation through the breakpoints, linear extrapolation outside.
  static Payoff pwl(std::vector<double> breakpoints, std::vector<double> values) {
    Payoff p(PayoffFamily::pwl);
    p.grid_ = std::make_shared<GridFunction>(std::move(breakpoints), std::move(values));
    return p;
  }

  static Payoff max_of_lines(std::vector<Line> lines) {
    require(!lines.empty(), ErrorKind::invalid_spec, "max_of_lines needs at least one line");
    for (const auto& l : lines)
      require(std::isfinite(l.slope) && std::isfinite(l.intercept), ErrorKind::invalid_spec,
              "line coefficients must be finite");
    Payoff p(PayoffFamily::max_of_lines);
    p.lines_ = std::move(lines);
    return p;
  }

  static Payoff maximum(const Payoff& l, const Payoff& r) {
    Payoff p(PayoffFamily::maximum);
    p.left_ = std::make_shared<Payoff>(l);
    p.right_ = std::make_shared<Payoff>(r);
    return p;
  }

  PayoffFamily family() const { return family_; }

  double operator()(double x) const {
    switch (family_) {
      case PayoffFamily::quadratic: return c0_ + x * (c1_ + c2_ * x);
      case PayoffFamily::pwl: return (*grid_)(x);
      case PayoffFamily::max_of_lines: {
        double m = lines_.front()(x);
        for (const auto& l : lines_) m = std::max(m, l(x));
        return m;
      }
      case PayoffFamily::maximum: return std::max((*left_)(x), (*right_)(x));
    }
    return 0.0;
  }

  // Points where the payoff may fail to be smooth (inside [lo, hi]).
  std::vector<double> kinks(double lo, double hi) const {
    std::vector<double> k;
    switch (family_) {
      case PayoffFamily::quadratic: break;
      case PayoffFamily::pwl:
        for (double t : grid_->grid()) k.push_back(t);
        break;
      case PayoffFamily::max_of_lines:
        for (std::size_t i = 0; i < lines_.size(); ++i)
          for (std::size_t j = i + 1; j < lines_.size(); ++j)
            if (lines_[i].slope != lines_[j].slope) {
              const double t =
                  (lines_[j].intercept - lines_[i].intercept) / (lines_[i].slope - lines_[j].slope);
              k.push_back(t);
            }
        break;
      case PayoffFamily::maximum: {
        auto l = left_->kinks(lo, hi), r = right_->kinks(lo, hi);
        k.insert(k.end(), l.begin(), l.end());
        k.insert(k.end(), r.begin(), r.end());
        // crossings of the two branches, located on a probe grid
        const int n = 4096;
        double prev = (*left_)(lo) - (*right_)(lo);
        for (int i = 1; i <= n; ++i) {
          const double t0 = lo + (hi - lo) * (i - 1) / n, t1 = lo + (hi - lo) * i / n;
          const double d = (*left_)(t1) - (*right_)(t1);
          if ((prev < 0.0 && d > 0.0) || (prev > 0.0 && d < 0.0)) {
            double a = t0, b = t1, fa = prev;
            for (int it = 0; it < 200 && b - a > 0.0; ++it) {
              const double m = 0.5 * (a + b);
              if (m <= a || m >= b) break;
              const double fm = (*left_)(m) - (*right_)(m);
              if ((fm < 0.0) == (fa < 0.0)) {
                a = m;
                fa = fm;
              } else {
                b = m;
              }
            }
            k.push_back(0.5 * (a + b));
          }
          prev = d;
        }
        break;
      }
    }
    std::vector<double> out;
    for (double t : k)
      if (t > lo && t < hi) out.push_back(t);
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
  }

  bool convex_by_family() const {
    switch (family_) {
      case PayoffFamily::quadratic: return c2_ >= 0.0;
      case PayoffFamily::pwl: {
        for (std::size_t k = 1; k + 1 < grid_->size(); ++k)
          if (grid_->slope(k) < grid_->slope(k - 1)) return false;
        return true;
      }
      case PayoffFamily::max_of_lines: return true;
      case PayoffFamily::maximum: return false;  // decide by probing
    }
    return false;
  }

  double c0() const { return c0_; }
  double c1() const { return c1_; }
  double c2() const { return c2_; }
  const GridFunction* pwl_points() const { return grid_.get(); }
  const std::vector<Line>& lines() const { return lines_; }
  const Payoff* left() const { return left_.get(); }
  const Payoff* right() const { return right_.get(); }

 private:
  explicit Payoff(PayoffFamily f) : family_(f) {}

  PayoffFamily family_;
  double c0_ = 0.0, c1_ = 0.0, c2_ = 0.0;
  std::shared_ptr<const GridFunction> grid_;
  std::vector<Line> lines_;
  std::shared_ptr<const Payoff> left_, right_;
};

// Convexity probe on [lo, hi]: envelope idempotence of the sampled payoff.
inline bool probe_convex(const Payoff& p, double lo, double hi, int n = 4001, double tol = 1e-10) {
  if (p.convex_by_family()) return true;
  std::vector<double> grid = GridFunction::uniform_grid(lo, hi, n);
  const auto k = p.kinks(lo, hi);
  grid.insert(grid.end(), k.begin(), k.end());
  std::sort(grid.begin(), grid.end());
  grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
  return is_convex(GridFunction::sample(grid, p), tol);
}

inline bool probe_symmetric(const Payoff& p, double hi, int n = 2001, double tol = 1e-12) {
  double scale = 1.0;
  for (int i = 0; i <= n; ++i) scale = std::max(scale, std::abs(p(hi * i / n)));
  for (int i = 0; i <= n; ++i) {
    const double x = hi * i / n;
    if (std::abs(p(x) - p(-x)) > tol * scale) return false;
  }
  return true;
}

}  // namespace bermudan
