#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "bermudan/error.hpp"
#include "bermudan/measure.hpp"
#include "bermudan/numeric/roots.hpp"

namespace bermudan {

struct ConvexOrderResult {
  bool ordered = false;
  double mean_gap = 0.0;   // mean(mu) - mean(nu)
  double worst_k = 0.0;    // argmax of U_mu - U_nu
  double worst_gap = 0.0;  // max of U_mu(k) - U_nu(k)
};

inline std::vector<double> potential_probe_grid(const Measure& mu, const Measure& nu, int n) {
  const double lo = std::min(mu.lo(), nu.lo()), hi = std::max(mu.hi(), nu.hi());
  std::vector<double> ks;
  ks.reserve(n + mu.atoms().size() + nu.atoms().size());
  for (int i = 0; i < n; ++i) ks.push_back(lo + (hi - lo) * i / (n - 1));
  for (const auto& a : mu.atoms()) ks.push_back(a.loc);
  for (const auto& a : nu.atoms()) ks.push_back(a.loc);
  std::sort(ks.begin(), ks.end());
  ks.erase(std::unique(ks.begin(), ks.end()), ks.end());
  return ks;
}

inline ConvexOrderResult check_convex_order(const Measure& mu, const Measure& nu, double tol,
                                            int probe_n = 2001) {
  ConvexOrderResult r;
  r.mean_gap = mu.mean() - nu.mean();
  const auto ks = potential_probe_grid(mu, nu, std::max(probe_n, 1001));
  r.worst_gap = -std::numeric_limits<double>::infinity();
  for (double k : ks) {
    const double gap = mu.potential(k) - nu.potential(k);
    if (gap > r.worst_gap) {
      r.worst_gap = gap;
      r.worst_k = k;
    }
  }
  r.ordered = std::abs(r.mean_gap) <= tol && r.worst_gap <= tol;
  return r;
}

struct DispersionResult {
  double e = 0.0;
  double alpha = 0.0;  // right edge of the mu support
  double beta = 0.0;   // right edge of the nu support
};

// Locates the single crossing e of rho - eta on (0, alpha) for symmetric densities.
inline DispersionResult check_dispersion(const Measure& mu, const Measure& nu, int probe_n = 2001) {
  require(mu.is_density() && nu.is_density(), ErrorKind::assumption_violated,
          "dispersion needs density measures");
  require(mu.symmetric() && nu.symmetric(), ErrorKind::assumption_violated,
          "dispersion needs symmetric measures");
  DispersionResult r;
  r.alpha = mu.hi();
  r.beta = nu.hi();
  require(r.beta >= r.alpha, ErrorKind::dispersion_violated, "nu support narrower than mu support");
  const double zero_tol = 1e-14;
  auto diff = [&](double x) { return mu.density(x) - nu.density(x); };
  int changes = 0;
  double last_pos = 0.0, first_neg = r.alpha;
  int state = 1;  // 1 while rho > eta, -1 after the crossing
  for (int i = 1; i < probe_n; ++i) {
    const double x = r.alpha * i / probe_n;
    const double d = diff(x);
    const int s = d > zero_tol ? 1 : (d < -zero_tol ? -1 : 0);
    if (i == 1 && s != 1) fail(ErrorKind::dispersion_violated, "rho <= eta near the origin");
    if (s == 0) {
      // only tolerated at the crossing itself
      if (state == -1) fail(ErrorKind::dispersion_violated, "rho = eta outside the crossing");
      continue;
    }
    if (s != state) {
      ++changes;
      state = s;
      if (s == -1) first_neg = x;
    }
    if (s == 1) {
      last_pos = x;
      if (!(nu.density(x) > 0.0))
        fail(ErrorKind::dispersion_violated, "eta vanishes inside (0, e)");
    }
  }
  if (changes == 0) fail(ErrorKind::dispersion_violated, "rho - eta has no sign change");
  if (changes > 1) fail(ErrorKind::dispersion_violated, "rho - eta changes sign more than once");
  for (int i = 0; i < probe_n; ++i) {
    const double x = r.alpha + (r.beta - r.alpha) * (i + 0.5) / probe_n;
    if (r.beta > r.alpha && !(nu.density(x) > mu.density(x)))
      fail(ErrorKind::dispersion_violated, "eta <= rho beyond the mu support");
  }
  const auto root = numeric::bisect_decreasing(diff, last_pos, first_neg);
  r.e = root.x;
  return r;
}

}  // namespace bermudan
