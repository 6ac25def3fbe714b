#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <algorithm>
#include <cmath>
#include <limits>

#include "bermudan/numeric/simplex.hpp"

namespace bermudan::numeric {

// Mehrotra predictor-corrector for min c'x, Ax = b, x >= 0 with A of full
// row rank. Normal equations are formed densely (few rows, many columns).

struct IPMOptions {
  double primal_tol = 1e-11;  // relative to 1 + |b|; the normal equations floor near 1e-13
  double dual_tol = 1e-10;    // relative to 1 + |c|
  double gap_tol = 1e-11;     // complementarity x'z relative to 1 + |c'x|
  int max_iter = 200;
  int stall_iter = 25;  // iterations without halving the merit before giving up
  // fallback acceptance for a stalled best iterate
  double loose_primal = 1e-10, loose_dual = 1e-8, loose_gap = 1e-9;
  double step_fraction = 0.995;
};

namespace detail {

inline double max_step(const Eigen::VectorXd& v, const Eigen::VectorXd& dv) {
  double a = 1.0;
  for (Eigen::Index k = 0; k < v.size(); ++k)
    if (dv[k] < 0.0) a = std::min(a, -v[k] / dv[k]);
  return a;
}

}  // namespace detail

inline LPResult solve_lp_ipm(const RevisedSimplex::SpMat& A, const Eigen::VectorXd& b, const Eigen::VectorXd& c,
                             IPMOptions opt = {}) {
  using Eigen::VectorXd;
  const Eigen::Index m = A.rows(), n = A.cols();
  LPResult res;

  auto normal = [&](const VectorXd& d) {
    Eigen::MatrixXd M = Eigen::MatrixXd::Zero(m, m);
    for (Eigen::Index j = 0; j < n; ++j) {
      const double dj = d[j];
      for (RevisedSimplex::SpMat::InnerIterator p(A, j); p; ++p)
        for (RevisedSimplex::SpMat::InnerIterator q(A, j); q; ++q)
          if (q.row() <= p.row()) M(p.row(), q.row()) += dj * p.value() * q.value();
    }
    M.triangularView<Eigen::StrictlyUpper>() = M.transpose();
    return M;
  };
  // pivoted LDLT; rows of very different scale (tail cells) rule out a
  // diagonal lift
  auto factor = [&](const Eigen::MatrixXd& M) { return Eigen::LDLT<Eigen::MatrixXd>(M); };

  // starting point
  VectorXd x, y, z;
  {
    const auto llt = factor(normal(VectorXd::Ones(n)));
    x = A.transpose() * llt.solve(b);
    y = llt.solve(A * c);
    z = c - A.transpose() * y;
    const double dx = std::max(-1.5 * x.minCoeff(), 0.0), dz = std::max(-1.5 * z.minCoeff(), 0.0);
    x.array() += dx;
    z.array() += dz;
    const double xz = x.dot(z);
    x.array() += 0.5 * xz / std::max(z.sum(), 1e-300);
    z.array() += 0.5 * xz / std::max(x.sum(), 1e-300);
    x = x.cwiseMax(1e-8);
    z = z.cwiseMax(1e-8);
  }

  const double bn = 1.0 + b.lpNorm<Eigen::Infinity>(), cn = 1.0 + c.lpNorm<Eigen::Infinity>();
  struct Iterate {
    VectorXd x, y;
    double p = INFINITY, d = INFINITY, g = INFINITY;
    double merit() const { return std::max({p, d, g}); }
  } best;
  double last_good = INFINITY;
  int last_good_it = 0;
  for (int it = 0; it < opt.max_iter; ++it) {
    const VectorXd rp = b - A * x;
    const VectorXd rd = c - A.transpose() * y - z;
    const double pobj = c.dot(x);
    const double mu = x.dot(z) / static_cast<double>(n);
    res.iterations = it;
    const Iterate cur{{}, {}, rp.lpNorm<Eigen::Infinity>() / bn, rd.lpNorm<Eigen::Infinity>() / cn,
                      x.dot(z) / (1.0 + std::abs(pobj))};
    if (cur.merit() < best.merit()) best = Iterate{x, y, cur.p, cur.d, cur.g};
    if (cur.merit() < 0.5 * last_good) {
      last_good = cur.merit();
      last_good_it = it;
    } else if (it - last_good_it > opt.stall_iter) {
      break;
    }
    if (rp.lpNorm<Eigen::Infinity>() <= opt.primal_tol * bn && rd.lpNorm<Eigen::Infinity>() <= opt.dual_tol * cn &&
        x.dot(z) <= opt.gap_tol * (1.0 + std::abs(pobj))) {
      res.status = LPStatus::optimal;
      break;
    }
    const VectorXd d = x.cwiseQuotient(z);
    const Eigen::MatrixXd M = normal(d);
    const auto llt = factor(M);
    if (rd.lpNorm<Eigen::Infinity>() <= opt.dual_tol * cn && x.dot(z) <= opt.gap_tol * (1.0 + std::abs(pobj))) {
      // only the primal residual is left: D-weighted least-norm correction
      VectorXd xt = x, r = rp;
      for (int k = 0; k < 3; ++k) {
        VectorXd w = llt.solve(r);
        w += llt.solve(r - M * w);
        xt += d.cwiseProduct(A.transpose() * w);
        r = b - A * xt;
      }
      if (xt.minCoeff() >= 0.0 && r.lpNorm<Eigen::Infinity>() <= opt.primal_tol * bn) {
        x = xt;
        res.status = LPStatus::optimal;
        break;
      }
    }
    if (llt.info() != Eigen::Success) {
      res.status = LPStatus::iteration_limit;
      return res;
    }
    auto direction = [&](const VectorXd& rc, VectorXd& dx, VectorXd& dy, VectorXd& dz) {
      const VectorXd t = rc.cwiseQuotient(x) - rd;  // X^{-1} rc - rd
      const VectorXd rhs = rp - A * d.cwiseProduct(t);
      dy = llt.solve(rhs);
      dy += llt.solve(rhs - M * dy);  // one refinement step
      dx = d.cwiseProduct(A.transpose() * dy + t);
      dz = (rc - z.cwiseProduct(dx)).cwiseQuotient(x);
    };
    VectorXd dxa, dya, dza;
    const VectorXd xz = x.cwiseProduct(z);
    direction(-xz, dxa, dya, dza);
    const double ap = detail::max_step(x, dxa), ad = detail::max_step(z, dza);
    const double mu_aff = (x + ap * dxa).dot(z + ad * dza) / static_cast<double>(n);
    const double sigma = std::pow(mu_aff / mu, 3.0);
    VectorXd dx, dy, dz;
    direction((sigma * mu - xz.array() - dxa.cwiseProduct(dza).array()).matrix(), dx, dy, dz);
    const double sp = std::min(1.0, opt.step_fraction * detail::max_step(x, dx));
    const double sd = std::min(1.0, opt.step_fraction * detail::max_step(z, dz));
    x += sp * dx;
    y += sd * dy;
    z += sd * dz;
  }
  if (res.status != LPStatus::optimal) {
    if (!(best.p <= opt.loose_primal && best.d <= opt.loose_dual && best.g <= opt.loose_gap)) return res;
    x = best.x;
    y = best.y;
    res.status = LPStatus::optimal;
  }
  res.x = x;
  res.duals = y;
  res.objective = c.dot(x);
  res.residual = (A * x - b).lpNorm<Eigen::Infinity>();
  res.min_reduced_cost = (c - A.transpose() * y).minCoeff();
  return res;
}

}  // namespace bermudan::numeric
