#pragma once

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "bermudan/payoff.hpp"
#include "bermudan/superhedge.hpp"

namespace fixtures {

struct RandomHedgeCase {
  bermudan::Payoff a, b;
  bermudan::Superhedge hedge;
};

// A random valid superhedge on a uniform grid over [lo, hi]: a convex
// psi0 >= b, a nonnegative bump making psi non-convex, perturbed forwards,
// and the smallest phi that keeps both inequalities on the grid plus slack.
inline RandomHedgeCase random_superhedge(std::mt19937_64& rng, double lo, double hi,
                                         std::size_t n = 161) {
  using namespace bermudan;
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double width = hi - lo;
  Payoff b = Payoff::quadratic(0.0, 0.5 + u(rng), 0.3 * (u(rng) - 0.5));
  if (u(rng) < 0.5) {
    const double k = lo + width * u(rng);
    b = Payoff::maximum(b, Payoff::max_of_lines({{1.0 + u(rng), -k}, {-(1.0 + u(rng)), k}}));
  }
  const double c = 0.5 * u(rng), s = 0.3 * u(rng);
  Payoff a = Payoff::maximum(Payoff::quadratic(c, s), Payoff::quadratic(0.0, 0.0, 0.4 * u(rng)));

  const auto grid = GridFunction::uniform_grid(lo, hi, n);
  std::vector<Line> lines;
  for (int i = 0; i < 3; ++i) lines.push_back({4.0 * (u(rng) - 0.5), 2.0 * u(rng)});
  const Payoff hull = Payoff::max_of_lines(lines);
  const double shift = 0.5 * u(rng);
  GridFunction psi0 =
      GridFunction::sample(grid, [&](double x) { return std::max(b(x), hull(x)) + shift; });
  std::vector<double> pv = psi0.values();
  const int bumps = 1 + static_cast<int>(3 * u(rng));
  for (int j = 0; j < bumps; ++j) {
    const double m = lo + width * u(rng), w = 0.05 * width + 0.2 * width * u(rng),
                 h = 0.5 * u(rng);
    for (std::size_t i = 0; i < n; ++i) pv[i] += h * std::exp(-0.5 * std::pow((grid[i] - m) / w, 2));
  }
  GridFunction psi(grid, pv);
  std::vector<double> t1 = (-psi0.right_slopes()).values(), t2(n);
  for (std::size_t i = 0; i < n; ++i) {
    t1[i] += 0.3 * (u(rng) - 0.5);
    t2[i] = 0.5 * (u(rng) - 0.5);
  }
  std::vector<double> phi(n);
  for (std::size_t i = 0; i < n; ++i) {
    double need = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < n; ++j) {
      const double dy = grid[j] - grid[i];
      need = std::max(need, a(grid[i]) - pv[j] - t1[i] * dy);
      need = std::max(need, b(grid[j]) - pv[j] - t2[i] * dy);
    }
    phi[i] = need + 0.05 * u(rng);
  }
  Superhedge out;
  out.psi = psi;
  out.phi = GridFunction(grid, phi);
  out.theta1 = GridFunction(grid, t1);
  out.theta2 = GridFunction(grid, t2);
  return {a, b, out};
}

}  // namespace fixtures
