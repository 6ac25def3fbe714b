#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <algorithm>
#include <cmath>
#include <functional>
#include <ostream>
#include <string>
#include <vector>

#include "bermudan/csv.hpp"
#include "bermudan/error.hpp"
#include "bermudan/measure.hpp"
#include "bermudan/numeric/ipm.hpp"
#include "bermudan/numeric/simplex.hpp"
#include "bermudan/superhedge.hpp"

namespace bermudan {

// (mu, nu) on finite grids with payoff values at the nodes
struct LatticeInstance {
  std::vector<double> x, mu, a;
  std::vector<double> y, nu, b;
  double y_shift = 0.0;        // applied to the y-nodes to match the means
  double potential_gap = 0.0;  // max over nodes of U_mu - U_nu (<= 0 when ordered)
  double gap_at = 0.0;

  int n_mu() const { return static_cast<int>(x.size()); }
  int n_nu() const { return static_cast<int>(y.size()); }
  double mean_x() const {
    double s = 0.0;
    for (int i = 0; i < n_mu(); ++i) s += mu[i] * x[i];
    return s;
  }
  double mean_y() const {
    double s = 0.0;
    for (int j = 0; j < n_nu(); ++j) s += nu[j] * y[j];
    return s;
  }
};

namespace detail {

struct Nodes {
  std::vector<double> loc, w;
};

// cell edges at equal increments of the integral of density^(1/3), which
// minimizes the variance lost to binning; node = cell barycenter
inline std::vector<double> cell_edges(const Measure& m, int n) {
  constexpr int fine = 20000;
  const double lo = m.lo(), hi = m.hi(), h = (hi - lo) / fine;
  std::vector<double> cum(fine + 1, 0.0);
  double prev = std::cbrt(m.density(lo));
  for (int k = 1; k <= fine; ++k) {
    const double cur = std::cbrt(m.density(lo + h * k));
    cum[k] = cum[k - 1] + 0.5 * h * (prev + cur);
    prev = cur;
  }
  std::vector<double> edges(n + 1);
  edges[0] = lo;
  edges[n] = hi;
  int k = 0;
  for (int c = 1; c < n; ++c) {
    const double target = cum[fine] * c / n;
    while (k < fine && cum[k + 1] < target) ++k;
    const double span = cum[k + 1] - cum[k];
    const double t = span > 0.0 ? (target - cum[k]) / span : 0.0;
    edges[c] = lo + h * (k + t);
  }
  return edges;
}

// atoms pass through
inline Nodes bin_measure(const Measure& m, int n) {
  Nodes out;
  if (!m.is_density()) {
    double tot = 0.0;
    for (const auto& a : m.atoms()) tot += a.weight;
    for (const auto& a : m.atoms()) {
      if (!(a.weight > 0.0)) continue;
      out.loc.push_back(a.loc);
      out.w.push_back(a.weight / tot);
    }
    return out;
  }
  const std::vector<double> edges = cell_edges(m, n);
  for (int k = 0; k < n; ++k) {
    const double lo = edges[k], hi = edges[k + 1];
    if (!(hi > lo)) continue;
    const double w = m.mass(lo, hi);
    if (!(w > 0.0)) continue;
    const double first = m.integrate([](double t) { return t; }, lo, hi);
    out.loc.push_back(std::clamp(first / w, lo, hi));
    out.w.push_back(w);
  }
  // merge far tail cells up to a mass floor; merging keeps barycenters and
  // avoids near-empty rows in the LP
  const double floor = 0.02 / n;
  auto merge_tail = [&](bool left) {
    while (out.w.size() > 2) {
      const std::size_t k = left ? 0 : out.w.size() - 1, nb = left ? 1 : out.w.size() - 2;
      if (out.w[k] >= floor) break;
      const double w = out.w[k] + out.w[nb];
      out.loc[nb] = (out.w[k] * out.loc[k] + out.w[nb] * out.loc[nb]) / w;
      out.w[nb] = w;
      out.w.erase(out.w.begin() + k);
      out.loc.erase(out.loc.begin() + k);
    }
  };
  merge_tail(true);
  merge_tail(false);
  double s = 0.0;
  for (double w : out.w) s += w;
  for (double& w : out.w) w /= s;
  return out;
}

inline double lattice_potential(const std::vector<double>& loc, const std::vector<double>& w, double k) {
  double s = 0.0;
  for (std::size_t i = 0; i < loc.size(); ++i) s += w[i] * std::abs(loc[i] - k);
  return s;
}

}  // namespace detail

inline LatticeInstance discretize(const Measure& mu, const Measure& nu, int n_mu, int n_nu, const RealFn& a,
                                  const RealFn& b) {
  require(n_mu >= 2 && n_nu >= 2, ErrorKind::domain_error, "discretize needs at least two cells per law");
  LatticeInstance L;
  auto xm = detail::bin_measure(mu, n_mu);
  auto ym = detail::bin_measure(nu, n_nu);
  L.x = std::move(xm.loc);
  L.mu = std::move(xm.w);
  L.y = std::move(ym.loc);
  L.nu = std::move(ym.w);
  L.y_shift = L.mean_x() - L.mean_y();
  require(std::abs(L.y_shift) <= 1e-6, ErrorKind::assumption_violated,
          "discretized means differ by " + std::to_string(L.y_shift));
  for (double& y : L.y) y += L.y_shift;

  // both potentials are piecewise linear with the same far-field rays
  std::vector<double> ks = L.x;
  ks.insert(ks.end(), L.y.begin(), L.y.end());
  L.potential_gap = -std::numeric_limits<double>::infinity();
  for (double k : ks) {
    const double g = detail::lattice_potential(L.x, L.mu, k) - detail::lattice_potential(L.y, L.nu, k);
    if (g > L.potential_gap) {
      L.potential_gap = g;
      L.gap_at = k;
    }
  }
  require(L.potential_gap <= 1e-12, ErrorKind::assumption_violated,
          "discrete convex order fails at k = " + std::to_string(L.gap_at) + " (gap " +
              std::to_string(L.potential_gap) + "); refine the lattice");

  L.a.resize(L.x.size());
  L.b.resize(L.y.size());
  for (std::size_t i = 0; i < L.x.size(); ++i) L.a[i] = a(L.x[i]);
  for (std::size_t j = 0; j < L.y.size(); ++j) L.b[j] = b(L.y[j]);
  return L;
}

// fix per x-node: free split, all-stop or all-continue
enum class NodeRule : char { free, stop, go };

struct LPSolution {
  double value = 0.0;
  Eigen::MatrixXd pi_stop, pi_go;  // n_mu x n_nu
  double residual = 0.0;           // worst constraint violation
  int iterations = 0;
  numeric::LPStatus status = numeric::LPStatus::iteration_limit;

  double stop_mass(int i) const { return pi_stop.row(i).sum(); }
  double go_mass(int i) const { return pi_go.row(i).sum(); }
};

namespace detail {

// Variables are the kernel weights p = pi / mu_i, which keeps tail cells
// with tiny mass well scaled. columns: stop (i, j) at i*n + j, go (i, j) at
// N + i*n + j. rows: sum_j p = 1 per x-node, martingale per branch (stop
// then go), mass of y_j for all but the last y-node (implied by total mass)
struct LatticeLP {
  numeric::RevisedSimplex::SpMat A;
  Eigen::VectorXd b, c;
};

inline LatticeLP build_lattice_lp(const LatticeInstance& L) {
  const int nm = L.n_mu(), nn = L.n_nu(), N = nm * nn;
  const int rows = 3 * nm + nn - 1;
  LatticeLP lp;
  lp.A.resize(rows, 2 * N);
  lp.A.reserve(Eigen::VectorXi::Constant(2 * N, 3));
  lp.b = Eigen::VectorXd::Zero(rows);
  lp.c.resize(2 * N);
  for (int i = 0; i < nm; ++i) lp.b[i] = 1.0;
  for (int j = 0; j + 1 < nn; ++j) lp.b[3 * nm + j] = L.nu[j];
  for (int s = 0; s < 2; ++s)
    for (int i = 0; i < nm; ++i)
      for (int j = 0; j < nn; ++j) {
        const int col = s * N + i * nn + j;
        lp.A.insert(i, col) = 1.0;
        const double d = L.y[j] - L.x[i];
        if (d != 0.0) lp.A.insert(nm + s * nm + i, col) = d;
        if (j + 1 < nn) lp.A.insert(3 * nm + j, col) = L.mu[i];
        lp.c[col] = -L.mu[i] * (s == 0 ? L.a[i] : L.b[j]);  // maximize
      }
  lp.A.makeCompressed();
  return lp;
}

inline double lattice_residual(const LatticeInstance& L, const Eigen::MatrixXd& ps, const Eigen::MatrixXd& pg) {
  double r = 0.0;
  const int nm = L.n_mu(), nn = L.n_nu();
  for (int i = 0; i < nm; ++i) {
    double m = 0.0, ms = 0.0, mg = 0.0;
    for (int j = 0; j < nn; ++j) {
      m += ps(i, j) + pg(i, j);
      ms += (L.y[j] - L.x[i]) * ps(i, j);
      mg += (L.y[j] - L.x[i]) * pg(i, j);
    }
    r = std::max({r, std::abs(m - L.mu[i]), std::abs(ms), std::abs(mg)});
  }
  for (int j = 0; j < nn; ++j) r = std::max(r, std::abs(ps.col(j).sum() + pg.col(j).sum() - L.nu[j]));
  return r;
}

}  // namespace detail

enum class LPMethod { automatic, simplex, interior_point };

// automatic: simplex on small lattices, interior point beyond 2000 cells
inline LPSolution solve_primal_lp(const LatticeInstance& L, const std::vector<NodeRule>& rules = {},
                                  LPMethod method = LPMethod::automatic) {
  const int nm = L.n_mu(), nn = L.n_nu(), N = nm * nn;
  const auto lp = detail::build_lattice_lp(L);
  std::vector<char> enabled(2 * N, 1);
  if (!rules.empty()) {
    require(static_cast<int>(rules.size()) == nm, ErrorKind::domain_error, "one rule per x-node");
    for (int i = 0; i < nm; ++i) {
      if (rules[i] == NodeRule::free) continue;
      const int off = rules[i] == NodeRule::stop ? N : 0;  // disable the other branch
      for (int j = 0; j < nn; ++j) enabled[off + i * nn + j] = 0;
    }
  }
  if (method == LPMethod::automatic) method = N <= 2000 ? LPMethod::simplex : LPMethod::interior_point;
  numeric::LPResult res;
  if (method == LPMethod::simplex) {
    res = numeric::solve_lp(lp.A, lp.b, lp.c, std::move(enabled));
  } else {
    require(rules.empty(), ErrorKind::domain_error, "node rules need the simplex");
    res = numeric::solve_lp_ipm(lp.A, lp.b, lp.c);
  }
  if (res.status != numeric::LPStatus::optimal)
    fail(ErrorKind::internal_error, "lattice LP " + numeric::to_string(res.status) + " after " +
                                        std::to_string(res.iterations) + " pivots (phase-1 residual " +
                                        std::to_string(res.phase1_infeasibility) + ")");
  LPSolution s;
  s.status = res.status;
  s.iterations = res.iterations;
  s.pi_stop.resize(nm, nn);
  s.pi_go.resize(nm, nn);
  for (int i = 0; i < nm; ++i)
    for (int j = 0; j < nn; ++j) {
      s.pi_stop(i, j) = L.mu[i] * res.x[i * nn + j];
      s.pi_go(i, j) = L.mu[i] * res.x[N + i * nn + j];
    }
  s.value = -res.objective;
  s.residual = detail::lattice_residual(L, s.pi_stop, s.pi_go);
  return s;
}

struct DeterministicResult {
  double value = -std::numeric_limits<double>::infinity();
  std::vector<NodeRule> rules;  // all stop or go
  int nodes = 0;
  bool proven = false;  // search finished within the node budget
};

// Best all-or-nothing stopping rule per x-node by branch and bound; every
// rule is feasible (split any martingale coupling by x-node), so the LP with
// partial fixings bounds its subtree.
inline DeterministicResult solve_deterministic_lp(const LatticeInstance& L, int max_nodes = 20000) {
  const int nm = L.n_mu();
  require(nm <= 30, ErrorKind::domain_error, "deterministic enumeration is limited to 30 x-nodes");
  DeterministicResult best;
  constexpr double frac_tol = 1e-9;

  struct Node {
    std::vector<NodeRule> rules;
  };
  std::vector<Node> stack{{std::vector<NodeRule>(nm, NodeRule::free)}};
  while (!stack.empty()) {
    if (best.nodes >= max_nodes) return best;
    Node nd = std::move(stack.back());
    stack.pop_back();
    ++best.nodes;
    const auto sol = solve_primal_lp(L, nd.rules, LPMethod::simplex);
    if (sol.value <= best.value + 1e-12) continue;
    int split = -1;
    double worst = frac_tol;
    for (int i = 0; i < nm; ++i) {
      if (nd.rules[i] != NodeRule::free) continue;
      const double f = std::min(sol.stop_mass(i), sol.go_mass(i)) / L.mu[i];
      if (f > worst) {
        worst = f;
        split = i;
      }
    }
    if (split < 0) {
      best.value = sol.value;
      best.rules = nd.rules;
      for (int i = 0; i < nm; ++i)
        if (best.rules[i] == NodeRule::free)
          best.rules[i] = sol.stop_mass(i) >= sol.go_mass(i) ? NodeRule::stop : NodeRule::go;
      continue;
    }
    // explore the branch the relaxation leans to first
    const bool lean_stop = sol.stop_mass(split) >= sol.go_mass(split);
    Node s = nd, g = nd;
    s.rules[split] = NodeRule::stop;
    g.rules[split] = NodeRule::go;
    if (lean_stop) {
      stack.push_back(std::move(g));
      stack.push_back(std::move(s));
    } else {
      stack.push_back(std::move(s));
      stack.push_back(std::move(g));
    }
  }
  best.proven = true;
  return best;
}

// lattice integrals of phi and psi; any pointwise superhedge bounds every
// lattice model, so this is an upper bound for the LP value
inline double lattice_hedge_cost(const LatticeInstance& L, const GridFunction& phi, const GridFunction& psi) {
  double s = 0.0;
  for (int i = 0; i < L.n_mu(); ++i) s += L.mu[i] * phi(L.x[i]);
  for (int j = 0; j < L.n_nu(); ++j) s += L.nu[j] * psi(L.y[j]);
  return s;
}

// long format: i, j, x, y, stop, go (zero cells skipped)
inline void write_optimizer_csv(std::ostream& os, const LatticeInstance& L, const LPSolution& s) {
  os << "i,j,x,y,pi_stop,pi_go\n";
  for (int i = 0; i < L.n_mu(); ++i)
    for (int j = 0; j < L.n_nu(); ++j) {
      if (s.pi_stop(i, j) == 0.0 && s.pi_go(i, j) == 0.0) continue;
      os << i << ',' << j << ',' << fmt_double(L.x[i]) << ',' << fmt_double(L.y[j]) << ','
         << fmt_double(s.pi_stop(i, j)) << ',' << fmt_double(s.pi_go(i, j)) << '\n';
    }
}

}  // namespace bermudan
