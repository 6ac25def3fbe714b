#pragma once

#include <cmath>
#include <limits>

namespace bermudan::numeric {

struct Root {
  double x = std::numeric_limits<double>::quiet_NaN();
  double lo = 0.0, hi = 0.0;
  int iterations = 0;
  bool bracketed = false;
};

// Bisection for an increasing function: returns x with f(x) ~ 0 in [lo, hi].
// f may return +-inf to signal "too large"/"too small". Stops when the bracket
// no longer shrinks or after max_iter steps.
template <class F>
Root bisect_increasing(F&& f, double lo, double hi, int max_iter = 200) {
  Root r;
  r.lo = lo;
  r.hi = hi;
  const double flo = f(lo), fhi = f(hi);
  if (flo > 0.0 || fhi < 0.0) {
    r.x = flo > 0.0 ? lo : hi;
    return r;
  }
  r.bracketed = true;
  if (flo == 0.0) {
    r.x = r.lo = r.hi = lo;
    return r;
  }
  if (fhi == 0.0) {
    r.x = r.lo = r.hi = hi;
    return r;
  }
  for (; r.iterations < max_iter; ++r.iterations) {
    const double mid = 0.5 * (r.lo + r.hi);
    if (mid <= r.lo || mid >= r.hi) break;
    const double fm = f(mid);
    if (fm == 0.0) {
      r.lo = r.hi = mid;
      break;
    }
    (fm < 0.0 ? r.lo : r.hi) = mid;
  }
  r.x = 0.5 * (r.lo + r.hi);
  return r;
}

template <class F>
Root bisect_decreasing(F&& f, double lo, double hi, int max_iter = 200) {
  return bisect_increasing([&](double x) { return -f(x); }, lo, hi, max_iter);
}

// Generic sign-change bisection; f(lo) and f(hi) must differ in sign.
template <class F>
Root bisect_sign(F&& f, double lo, double hi, int max_iter = 200) {
  const double flo = f(lo);
  if (flo <= 0.0) return bisect_increasing(f, lo, hi, max_iter);
  return bisect_decreasing(f, lo, hi, max_iter);
}

}  // namespace bermudan::numeric
