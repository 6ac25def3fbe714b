#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include <boost/math/distributions/normal.hpp>

#include "bermudan/couplings.hpp"
#include "bermudan/error.hpp"
#include "bermudan/numeric/quadrature.hpp"
#include "bermudan/numeric/roots.hpp"
#include "bermudan/symmetric_solver.hpp"

namespace bermudan {

using Interval = PiecewiseDensity::Interval;

enum class KernelSource { left_curtain, right_curtain, hk, stay, randomized_stay };

inline std::string to_string(KernelSource k) {
  switch (k) {
    case KernelSource::left_curtain: return "left_curtain";
    case KernelSource::right_curtain: return "right_curtain";
    case KernelSource::hk: return "hk";
    case KernelSource::stay: return "stay";
    case KernelSource::randomized_stay: return "randomized_stay";
  }
  return "unknown";
}

// expected pushforward mass of a region inside [lo, hi]
struct MassTarget {
  double lo, hi, mass;
  std::string what;
};

struct Region {
  std::string name;
  std::vector<Interval> xs;
  KernelSource source = KernelSource::stay;
  int stop_time = 1;  // randomized_stay: the stay part stops at 1, the HK part at 2
  std::shared_ptr<const HKMap> hk;
  std::vector<MassTarget> targets;

  bool contains_inside(double x) const {
    for (const auto& [a, b] : xs)
      if (x > a && x < b) return true;
    return false;
  }
  bool touches(double x) const {
    for (const auto& [a, b] : xs)
      if (x == a || x == b) return true;
    return false;
  }
};

struct StopModel {
  CaseLabel label = CaseLabel::C1;
  std::vector<Region> regions;
  bool randomization_required = false;
  std::shared_ptr<const Measure> mu, nu;
  std::shared_ptr<const CurtainMap> right, left;
  std::shared_ptr<const Payoff> a, b;
  int resolution = 256;

  // shared endpoints belong to the exercise regions, as in (-alpha, -x0] and [x0, alpha)
  const Region* region_of(double x) const {
    for (const auto& r : regions)
      if (r.contains_inside(x)) return &r;
    const Region* hit = nullptr;
    for (const auto& r : regions)
      if (r.touches(x) && (!hit || (r.stop_time == 1 && r.source != KernelSource::randomized_stay)))
        hit = &r;
    return hit;
  }

  double stay_probability(double x) const {
    const double rho = mu->density(x);
    if (!(rho > 0.0)) return 0.0;
    return std::clamp(nu->density(x) / rho, 0.0, 1.0);
  }

  // kernel used by a region at x; for randomized regions this is the HK part
  TwoPointKernel kernel(const Region& r, double x, bool exact = false) const {
    switch (r.source) {
      case KernelSource::left_curtain: return exact ? left->kernel_exact(x) : left->kernel_at(x);
      case KernelSource::right_curtain: return exact ? right->kernel_exact(x) : right->kernel_at(x);
      case KernelSource::hk:
      case KernelSource::randomized_stay: return exact ? r.hk->kernel_exact(x) : r.hk->kernel_at(x);
      case KernelSource::stay: return TwoPointKernel::delta(x);
    }
    return TwoPointKernel::delta(x);
  }
};

namespace detail {

inline std::shared_ptr<const HKMap> make_hk(DensityPtr chi, DensityPtr xi, int n) {
  return std::make_shared<const HKMap>(solve_hk(std::move(chi), std::move(xi), n));
}

inline std::vector<Interval> sym(double lo, double hi) { return {{-hi, -lo}, {lo, hi}}; }

inline StopModel model_shell(const Instance& in, CaseLabel label) {
  StopModel m;
  m.label = label;
  m.mu = in.mu;
  m.nu = in.nu;
  m.right = in.right;
  m.left = in.left;
  m.a = std::make_shared<const Payoff>(in.a());
  m.b = std::make_shared<const Payoff>(in.b());
  m.resolution = in.config.resolution;
  return m;
}

inline void add_curtain_pair(StopModel& m, const Instance& in, double x, double f, double g) {
  // mass below -g (above g) stays, the rest fills nu on (-g, -f) ((f, g))
  const Measure& mu = *in.mu;
  const Measure& nu = *in.nu;
  const double alpha = mu.hi();
  Region l{"left_curtain", {{-alpha, -x}}, KernelSource::left_curtain, 1, nullptr, {}};
  l.targets = {{-INFINITY, -g, mu.mass(-alpha, -g), "mu below -g"},
               {-g, -f, nu.mass(-g, -f), "nu on (-g, -f)"}};
  Region r{"right_curtain", {{x, alpha}}, KernelSource::right_curtain, 1, nullptr, {}};
  r.targets = {{g, INFINITY, mu.mass(g, alpha), "mu above g"},
               {f, g, nu.mass(f, g), "nu on (f, g)"}};
  m.regions.push_back(std::move(l));
  m.regions.push_back(std::move(r));
}

inline double diff_mass(const Measure& p, const Measure& q, double lo, double hi) {
  return p.mass(lo, hi) - q.mass(lo, hi);
}

}  // namespace detail

inline StopModel build_model(const CaseSolution& sol, const Instance& in) {
  const Measure& mu = *in.mu;
  const Measure& nu = *in.nu;
  const double beta = in.beta(), alpha = mu.hi();
  const int n = in.config.grid_n;
  StopModel m = detail::model_shell(in, sol.label);
  using detail::sym;
  switch (sol.label) {
    case CaseLabel::C1: {
      const double x0 = in.x0, g0 = in.g0;
      detail::add_curtain_pair(m, in, x0, 0.0, g0);
      Region h{"hk", {{-x0, x0}}, KernelSource::hk, 2, nullptr, {}};
      h.hk = detail::make_hk(restrict_density(mu, {{-x0, x0}}),
                             difference_density(nu, mu, sym(g0, beta)), n);
      h.targets = {{-INFINITY, -g0, detail::diff_mass(nu, mu, -beta, -g0), "(nu - mu) below -g0"},
                   {g0, INFINITY, detail::diff_mass(nu, mu, g0, beta), "(nu - mu) above g0"}};
      m.regions.push_back(std::move(h));
      break;
    }
    case CaseLabel::C2: {
      const double x0 = in.x0, g0 = in.g0, x1 = sol.threshold("x1"), h1 = sol.threshold("h_x1");
      detail::add_curtain_pair(m, in, x0, 0.0, g0);
      Region h0{"hk_inner", sym(x1, x0), KernelSource::hk, 1, nullptr, {}};
      h0.hk = detail::make_hk(restrict_density(mu, sym(x1, x0)), difference_density(nu, mu, sym(g0, h1)), n);
      h0.targets = {{-h1, -g0, detail::diff_mass(nu, mu, -h1, -g0), "(nu - mu) on (-h1, -g0)"},
                    {g0, h1, detail::diff_mass(nu, mu, g0, h1), "(nu - mu) on (g0, h1)"}};
      Region h1r{"hk_core", {{-x1, x1}}, KernelSource::hk, 2, nullptr, {}};
      h1r.hk = detail::make_hk(restrict_density(mu, {{-x1, x1}}), difference_density(nu, mu, sym(h1, beta)), n);
      h1r.targets = {{-INFINITY, -h1, detail::diff_mass(nu, mu, -beta, -h1), "(nu - mu) below -h1"},
                     {h1, INFINITY, detail::diff_mass(nu, mu, h1, beta), "(nu - mu) above h1"}};
      m.regions.push_back(std::move(h0));
      m.regions.push_back(std::move(h1r));
      break;
    }
    case CaseLabel::C3: {
      const double x3 = sol.threshold("x3"), f3 = sol.threshold("f3"), g3 = sol.threshold("g3"),
                   x4 = sol.threshold("x4");
      detail::add_curtain_pair(m, in, x3, f3, g3);
      Region h3{"hk_shoulder", sym(f3, x3), KernelSource::hk, 2, nullptr, {}};
      h3.hk = detail::make_hk(restrict_density(mu, sym(f3, x3)), difference_density(nu, mu, sym(g3, x4)), n);
      h3.targets = {{-x4, -g3, detail::diff_mass(nu, mu, -x4, -g3), "(nu - mu) on (-x4, -g3)"},
                    {g3, x4, detail::diff_mass(nu, mu, g3, x4), "(nu - mu) on (g3, x4)"}};
      Region core{"randomized_core", {{-f3, f3}}, KernelSource::randomized_stay, 1, nullptr, {}};
      core.hk = detail::make_hk(difference_density(mu, nu, {{-f3, f3}}), difference_density(nu, mu, sym(x4, beta)), n);
      core.targets = {{-f3, f3, nu.mass(-f3, f3), "nu on (-f3, f3)"},
                      {-INFINITY, -x4, detail::diff_mass(nu, mu, -beta, -x4), "(nu - mu) below -x4"},
                      {x4, INFINITY, detail::diff_mass(nu, mu, x4, beta), "(nu - mu) above x4"}};
      m.regions.push_back(std::move(h3));
      m.regions.push_back(std::move(core));
      m.randomization_required = true;
      break;
    }
    case CaseLabel::C3_tilde: {
      const double e = in.e();
      Region l{"stay_left", {{-alpha, -e}}, KernelSource::stay, 1, nullptr, {}};
      l.targets = {{-INFINITY, -e, mu.mass(-alpha, -e), "mu below -e"}};
      Region r{"stay_right", {{e, alpha}}, KernelSource::stay, 1, nullptr, {}};
      r.targets = {{e, INFINITY, mu.mass(e, alpha), "mu above e"}};
      Region core{"randomized_core", {{-e, e}}, KernelSource::randomized_stay, 1, nullptr, {}};
      core.hk = detail::make_hk(difference_density(mu, nu, {{-e, e}}), difference_density(nu, mu, sym(e, beta)), n);
      core.targets = {{-e, e, nu.mass(-e, e), "nu on (-e, e)"},
                      {-INFINITY, -e, detail::diff_mass(nu, mu, -beta, -e), "(nu - mu) below -e"},
                      {e, INFINITY, detail::diff_mass(nu, mu, e, beta), "(nu - mu) above e"}};
      m.regions.push_back(std::move(l));
      m.regions.push_back(std::move(r));
      m.regions.push_back(std::move(core));
      m.randomization_required = true;
      break;
    }
    case CaseLabel::always_stop:
    case CaseLabel::always_continue: {
      // C1 curtain structure with a single stop time everywhere
      const int t = sol.label == CaseLabel::always_stop ? 1 : 2;
      const double x0 = in.x0, g0 = in.g0;
      detail::add_curtain_pair(m, in, x0, 0.0, g0);
      for (auto& r : m.regions) r.stop_time = t;
      Region h{"hk", {{-x0, x0}}, KernelSource::hk, t, nullptr, {}};
      h.hk = detail::make_hk(restrict_density(mu, {{-x0, x0}}),
                             difference_density(nu, mu, sym(g0, beta)), n);
      m.regions.push_back(std::move(h));
      break;
    }
  }
  // every region interval clipped to the mu support
  for (auto& r : m.regions)
    for (auto& [lo, hi] : r.xs) {
      lo = std::max(lo, mu.lo());
      hi = std::min(hi, mu.hi());
    }
  return m;
}

// Identity coupling of mu with itself, stopping at 1 (a >= b after normalization).
inline StopModel identity_model(const Measure& mu, const Payoff& a, const Payoff& b) {
  StopModel m;
  m.label = CaseLabel::always_stop;
  m.mu = std::make_shared<const Measure>(mu);
  m.nu = m.mu;
  m.a = std::make_shared<const Payoff>(Payoff::maximum(a, b));
  m.b = std::make_shared<const Payoff>(b);
  Region r{"stay", {{mu.lo(), mu.hi()}}, KernelSource::stay, 1, nullptr, {}};
  r.targets = {{-INFINITY, INFINITY, 1.0, "mu"}};
  m.regions.push_back(std::move(r));
  return m;
}

namespace detail {

// Sub-intervals of [lo, hi] split where an HK boundary crosses a kink of the
// target density or of b.
inline std::vector<double> hk_splits(const HKMap& hk, const Payoff& b, double lo, double hi) {
  std::vector<double> ys = hk.xi().kinks();
  for (const auto& [a, c] : hk.xi().intervals()) {
    ys.push_back(a);
    ys.push_back(c);
  }
  for (double k : b.kinks(hk.xi().lo(), hk.xi().hi())) ys.push_back(k);
  std::vector<double> out{lo, hi};
  for (double k : hk.chi().kinks())
    if (k > lo && k < hi) out.push_back(k);
  const auto& xs = hk.nodes();
  const auto& ps = hk.p_nodes();
  const auto& qs = hk.q_nodes();
  for (double y : ys) {
    for (std::size_t k = 0; k + 1 < xs.size(); ++k) {
      const double a = std::max(xs[k], lo), c = std::min(xs[k + 1], hi);
      if (!(c > a) || xs[k] < lo || xs[k + 1] > hi) continue;
      for (int which = 0; which < 2; ++which) {
        const auto& v = which == 0 ? ps : qs;
        const double d0 = v[k] - y, d1 = v[k + 1] - y;
        if (!((d0 < 0) != (d1 < 0)) || d0 == 0 || d1 == 0) continue;
        auto fn = [&](double x) {
          const HKPoint h = hk.solve(x);
          return (which == 0 ? h.p : h.q) - y;
        };
        out.push_back(numeric::bisect_sign(fn, a, c).x);
      }
    }
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

// integral of chi(x) * g(x, kernel_exact(x)) over the HK source
template <class G>
double hk_integral(const HKMap& hk, const Payoff& b, int resolution, G&& g) {
  const numeric::TanhSinhRule rule(resolution);
  double s = 0.0;
  for (const auto& [lo, hi] : hk.chi().intervals()) {
    const auto cuts = hk_splits(hk, b, lo, hi);
    for (std::size_t i = 0; i + 1 < cuts.size(); ++i)
      s += rule.integrate(
          [&](double x) {
            const TwoPointKernel k = hk.kernel_exact(x);
            return hk.chi()(x) * g(x, k);
          },
          cuts[i], cuts[i + 1]);
  }
  return s;
}

}  // namespace detail

struct PrimalBreakdown {
  double value = 0.0;
  std::vector<std::pair<std::string, double>> parts;
};

// E[a(Z1) 1{tau = 1} + b(Z2) 1{tau = 2}] with U integrated out.
inline PrimalBreakdown primal_breakdown(const StopModel& m) {
  PrimalBreakdown out;
  const Measure& mu = *m.mu;
  const Measure& nu = *m.nu;
  const Payoff& a = *m.a;
  const Payoff& b = *m.b;
  auto kinks = [&](double lo, double hi) {
    auto k = a.kinks(lo, hi);
    const auto kb = b.kinks(lo, hi);
    k.insert(k.end(), kb.begin(), kb.end());
    k.push_back(0.0);
    return k;
  };
  for (const auto& r : m.regions) {
    double v = 0.0;
    const bool randomized = r.source == KernelSource::randomized_stay;
    for (const auto& [lo, hi] : r.xs) {
      if (r.stop_time == 1 && !randomized) {
        v += mu.integrate([&](double x) { return a(x); }, lo, hi, kinks(lo, hi), 256);
      } else if (randomized) {
        v += nu.integrate([&](double x) { return a(x); }, lo, hi, kinks(lo, hi), 256);
      } else if (r.source == KernelSource::stay) {
        v += mu.integrate([&](double x) { return b(x); }, lo, hi, kinks(lo, hi), 256);
      } else if (r.source != KernelSource::hk) {
        // curtain kernel continued to time 2
        v += mu.integrate([&](double x) { return m.kernel(r, x, true).expect(b); }, lo, hi,
                          kinks(lo, hi), 256);
      }
    }
    if ((r.source == KernelSource::hk && r.stop_time == 2) || randomized)
      v += detail::hk_integral(*r.hk, b, m.resolution,
                               [&](double, const TwoPointKernel& k) { return k.expect(b); });
    out.parts.emplace_back(r.name, v);
    out.value += v;
  }
  return out;
}

inline double primal_value(const StopModel& m) { return primal_breakdown(m).value; }

// Best X-measurable stopping under the same kernels: integral of
// max(a(x) rho(x), E_{K_x}[b] rho(x)). With the randomized core merged into
// one kernel this is what a canonical filtration can achieve.
inline double canonical_value(const StopModel& m) {
  const Measure& mu = *m.mu;
  const Measure& nu = *m.nu;
  const Payoff& a = *m.a;
  const Payoff& b = *m.b;
  double v = 0.0;
  for (const auto& r : m.regions) {
    for (const auto& [lo, hi] : r.xs) {
      std::vector<double> br = a.kinks(lo, hi);
      const auto kb = b.kinks(lo, hi);
      br.insert(br.end(), kb.begin(), kb.end());
      if (m.right) {
        br.push_back(m.right->e());
        br.push_back(-m.right->e());
      }
      if (r.source == KernelSource::hk || r.source == KernelSource::randomized_stay) {
        const auto cuts = detail::hk_splits(*r.hk, b, lo, hi);
        br.insert(br.end(), cuts.begin(), cuts.end());
      }
      const numeric::TanhSinhRule rule(m.resolution);
      std::vector<double> pts{lo, hi};
      for (double x : br)
        if (x > lo && x < hi) pts.push_back(x);
      std::sort(pts.begin(), pts.end());
      for (std::size_t i = 0; i + 1 < pts.size(); ++i)
        v += rule.integrate(
            [&](double x) {
              const double rho = mu.density(x);
              double cont;
              if (r.source == KernelSource::randomized_stay) {
                const double eta = std::min(nu.density(x), rho);
                cont = eta * b(x) + (rho - eta) * m.kernel(r, x, true).expect(b);
              } else {
                cont = rho * m.kernel(r, x, true).expect(b);
              }
              return std::max(a(x) * rho, cont);
            },
            pts[i], pts[i + 1]);
    }
  }
  return v;
}

// ---------------------------------------------------------------- coupling check

struct RegionCheck {
  std::string name;
  double mu_mass = 0.0, pushed_mass = 0.0;
  double mean_residual = 0.0;
  struct Target {
    MassTarget target;
    double pushed = 0.0;
  };
  std::vector<Target> targets;
  double bookkeeping_error() const {
    double e = std::abs(mu_mass - pushed_mass);
    for (const auto& t : targets) e = std::max(e, std::abs(t.pushed - t.target.mass));
    return e;
  }
};

struct CouplingReport {
  int bins = 0;
  double marginal_sup_error = 0.0;
  double worst_y = 0.0;
  double mean_residual = 0.0;
  double bookkeeping_error = 0.0;
  std::vector<RegionCheck> regions;
};

namespace detail {

// image mass on [lo, hi], uniform unless shaped like a measure (identity parts)
struct Segment {
  double lo, hi, mass;
  const Measure* shape = nullptr;
};

inline double fraction_below(const Segment& s, double t) {
  if (t <= s.lo) return 0.0;
  if (t >= s.hi) return 1.0;
  if (s.shape) {
    const double w = s.shape->mass(s.lo, s.hi);
    if (w > 0.0) return s.shape->mass(s.lo, t) / w;
  }
  return (t - s.lo) / (s.hi - s.lo);
}

inline double mass_below(const Segment& s, double t) { return s.mass * fraction_below(s, t); }

inline double mass_in(const std::vector<Segment>& segs, double lo, double hi) {
  double m = 0.0;
  for (const auto& s : segs) {
    if (s.hi <= s.lo) {
      if (s.lo >= lo && s.lo < hi) m += s.mass;
      continue;
    }
    m += s.mass * std::max(0.0, fraction_below(s, hi) - fraction_below(s, lo));
  }
  return m;
}

}  // namespace detail

// Pushes mu through the kernels cell by cell, spreading each cell's image
// mass uniformly over the image interval, and compares with nu on `bins` bins.
// Kernels come from fresh solves unless exact_kernels is false (stored maps).
inline CouplingReport check_coupling(const StopModel& m, int bins = 512, bool exact_kernels = true) {
  const Measure& mu = *m.mu;
  const Measure& nu = *m.nu;
  CouplingReport rep;
  rep.bins = bins;
  std::vector<detail::Segment> all;
  for (const auto& r : m.regions) {
    RegionCheck rc;
    rc.name = r.name;
    std::vector<detail::Segment> segs;
    const bool randomized = r.source == KernelSource::randomized_stay;
    for (const auto& [lo, hi] : r.xs) {
      if (!(hi > lo)) continue;
      rc.mu_mass += mu.mass(lo, hi);
      // Chebyshev-clustered cell edges
      std::vector<double> xs(bins + 1);
      for (int i = 0; i <= bins; ++i)
        xs[i] = lo + (hi - lo) * 0.5 * (1.0 - std::cos(std::numbers::pi * i / bins));
      xs.front() = lo;
      xs.back() = hi;
      // cells never straddle the point where a curtain starts to stay
      if (m.right && (r.source == KernelSource::left_curtain || r.source == KernelSource::right_curtain)) {
        for (double t : {-m.right->e(), m.right->e()})
          if (t > lo && t < hi) xs.push_back(t);
        std::sort(xs.begin(), xs.end());
      }
      const int cells = static_cast<int>(xs.size()) - 1;
      std::vector<TwoPointKernel> ks(xs.size());
      for (std::size_t i = 0; i < xs.size(); ++i) {
        ks[i] = m.kernel(r, xs[i], exact_kernels);
        rc.mean_residual = std::max(rc.mean_residual, std::abs(ks[i].mean() - xs[i]));
      }
      for (int i = 0; i < cells; ++i) {
        const double a = xs[i], b = xs[i + 1];
        double w = mu.mass(a, b);
        if (randomized) {
          const double stay = std::min(nu.mass(a, b), w);
          segs.push_back({a, b, stay, &nu});
          w -= stay;
        }
        if (r.source == KernelSource::stay) {
          segs.push_back({a, b, w, &mu});
          continue;
        }
        const TwoPointKernel& k0 = ks[i];
        const TwoPointKernel& k1 = ks[i + 1];
        if (k0.n == 1 && k1.n == 1) {
          segs.push_back({a, b, w, &mu});
          continue;
        }
        // a delta next to a two-point kernel is its limit with both points at x
        auto pt = [&](const TwoPointKernel& k, int j) {
          if (k.n == 2) return k.pts[j];
          const TwoPointKernel& o = k.x == k0.x ? k1 : k0;
          return KernelPoint{k.pts[0].loc, o.pts[j].weight};
        };
        for (int j = 0; j < 2; ++j) {
          const KernelPoint p0 = pt(k0, j), p1 = pt(k1, j);
          const double wj = w * 0.5 * (p0.weight + p1.weight);
          segs.push_back({std::min(p0.loc, p1.loc), std::max(p0.loc, p1.loc), wj});
        }
      }
    }
    for (const auto& s : segs) rc.pushed_mass += s.mass;
    for (const auto& t : r.targets)
      rc.targets.push_back({t, detail::mass_in(segs, t.lo, t.hi)});
    rep.mean_residual = std::max(rep.mean_residual, rc.mean_residual);
    rep.bookkeeping_error = std::max(rep.bookkeeping_error, rc.bookkeeping_error());
    rep.regions.push_back(std::move(rc));
    all.insert(all.end(), segs.begin(), segs.end());
  }
  // CDF of the pushforward on the bin edges: sweep with sorted segment ends
  const double ylo = nu.lo(), yhi = nu.hi();
  std::vector<double> edges(bins + 1);
  for (int i = 0; i <= bins; ++i) edges[i] = ylo + (yhi - ylo) * i / bins;
  std::vector<double> cdf(bins + 1, 0.0);
  for (const auto& s : all) {
    if (!(s.mass > 0.0)) continue;
    // first edge at or above s.lo
    auto it = std::lower_bound(edges.begin(), edges.end(), s.lo);
    for (auto jt = it; jt != edges.end(); ++jt) {
      const std::size_t i = static_cast<std::size_t>(jt - edges.begin());
      if (*jt >= s.hi) {
        // the rest of the edges see the whole segment
        for (std::size_t k = i; k < edges.size(); ++k) cdf[k] += s.mass;
        break;
      }
      cdf[i] += detail::mass_below(s, *jt);
    }
  }
  for (int i = 0; i <= bins; ++i) {
    const double err = std::abs(cdf[i] - nu.cdf(edges[i]));
    if (err > rep.marginal_sup_error) {
      rep.marginal_sup_error = err;
      rep.worst_y = edges[i];
    }
  }
  return rep;
}

// ---------------------------------------------------------------- Monte Carlo

struct PathSample {
  double x, u, y;
  int tau;
};

struct MonteCarloResult {
  std::size_t n = 0;
  double mean = 0.0, stddev = 0.0;
  double ci_lo = 0.0, ci_hi = 0.0;  // 99% normal interval
  std::vector<PathSample> paths;    // first `keep` draws
};

// Streams are seeded per chunk from (seed, chunk); U has its own engine so
// models that never randomize give the same estimate for any U stream.
inline MonteCarloResult sample_paths(const StopModel& m, std::size_t n, std::uint64_t seed,
                                     std::uint64_t u_stream = 0, std::size_t keep = 0) {
  require(n >= 1, ErrorKind::invalid_spec, "sample count must be >= 1");
  constexpr std::size_t chunk = 1 << 16;
  const Measure& mu = *m.mu;
  MonteCarloResult res;
  res.n = n;
  double sum = 0.0, sum2 = 0.0;
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  for (std::size_t c = 0; c * chunk < n; ++c) {
    std::seed_seq sx{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                     static_cast<std::uint32_t>(c), 0u};
    std::seed_seq su{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                     static_cast<std::uint32_t>(c), 1u + static_cast<std::uint32_t>(u_stream)};
    std::mt19937_64 gx(sx), gu(su);
    const std::size_t end = std::min(n, (c + 1) * chunk);
    for (std::size_t i = c * chunk; i < end; ++i) {
      const double px = unif(gx), pv = unif(gx), u = unif(gu);
      const double x = mu.quantile(px);
      const Region* r = m.region_of(x);
      require(r != nullptr, ErrorKind::internal_error, "sample outside every region");
      PathSample s{x, u, x, r->stop_time};
      bool stayed = false;
      if (r->source == KernelSource::randomized_stay && u <= m.stay_probability(x)) {
        stayed = true;
        s.tau = 1;
      } else if (r->source == KernelSource::randomized_stay) {
        s.tau = 2;
      }
      if (!stayed) {
        const TwoPointKernel k = m.kernel(*r, x);
        s.y = k.n == 1 || pv < k.pts[0].weight ? k.pts[0].loc : k.pts[1].loc;
      }
      const double v = s.tau == 1 ? (*m.a)(x) : (*m.b)(s.y);
      sum += v;
      sum2 += v * v;
      if (res.paths.size() < keep) res.paths.push_back(s);
    }
  }
  const double nn = static_cast<double>(n);
  res.mean = sum / nn;
  res.stddev = n > 1 ? std::sqrt(std::max(0.0, (sum2 - nn * res.mean * res.mean) / (nn - 1.0))) : 0.0;
  const double z = boost::math::quantile(boost::math::complement(boost::math::normal(), 0.005));
  const double half = z * res.stddev / std::sqrt(nn);
  res.ci_lo = res.mean - half;
  res.ci_hi = res.mean + half;
  return res;
}

}  // namespace bermudan
