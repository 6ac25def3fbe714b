#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

namespace bermudan::numeric {

// min c'x  s.t.  Ax = b, x >= 0.  Revised simplex on sparse columns with a
// dense basis inverse; artificial columns sign(b_i) e_i start the basis.

enum class LPStatus { optimal, infeasible, unbounded, iteration_limit };

inline std::string to_string(LPStatus s) {
  switch (s) {
    case LPStatus::optimal: return "optimal";
    case LPStatus::infeasible: return "infeasible";
    case LPStatus::unbounded: return "unbounded";
    case LPStatus::iteration_limit: return "iteration-limit";
  }
  return "unknown";
}

struct SimplexOptions {
  double feas_tol = 1e-11;
  double opt_tol = 1e-11;
  double pivot_tol = 1e-9;
  int max_iter = 1000000;
  int check_every = 50;       // drift check on B x_B = b
  int refactor_every = 2000;  // unconditional refresh
  int stall_limit = 400;      // degenerate pivots before Bland's rule
};

struct LPResult {
  LPStatus status = LPStatus::iteration_limit;
  double objective = std::numeric_limits<double>::quiet_NaN();
  Eigen::VectorXd x;     // structural solution
  Eigen::VectorXd duals;  // row multipliers of the final basis
  double residual = 0.0;  // max |Ax - b|
  double min_reduced_cost = 0.0;
  double phase1_infeasibility = 0.0;
  int iterations = 0;
  int refactors = 0;
};

class RevisedSimplex {
 public:
  using SpMat = Eigen::SparseMatrix<double, Eigen::ColMajor>;

  // enabled: optional column mask (disabled columns are fixed at zero)
  RevisedSimplex(const SpMat& A, const Eigen::VectorXd& b, const Eigen::VectorXd& c,
                 std::vector<char> enabled = {}, SimplexOptions opt = {})
      : A_(A), b_(b), c_(c), enabled_(std::move(enabled)), opt_(opt) {
    m_ = static_cast<int>(A_.rows());
    n_ = static_cast<int>(A_.cols());
    if (enabled_.empty()) enabled_.assign(n_, 1);
    A_.makeCompressed();
  }

  LPResult run() {
    LPResult res;
    init_basis();
    phase_ = 1;
    if (!iterate(res)) return res;
    res.phase1_infeasibility = 0.0;
    for (int i = 0; i < m_; ++i)
      if (head_[i] >= n_) res.phase1_infeasibility += std::max(xB_[i], 0.0);
    const double scale = 1.0 + b_.lpNorm<Eigen::Infinity>();
    if (res.phase1_infeasibility > 1e-9 * scale) {
      res.status = LPStatus::infeasible;
      return res;
    }
    phase_ = 2;
    // a final refactor can expose small negative reduced costs; iterate again
    for (int round = 0; round < 5; ++round) {
      if (!iterate(res)) return res;
      refactor(res);
      compute_duals();
      if (price(false) < 0) break;
    }
    res.status = LPStatus::optimal;
    res.x = Eigen::VectorXd::Zero(n_);
    for (int i = 0; i < m_; ++i)
      if (head_[i] < n_) res.x[head_[i]] = std::max(xB_[i], 0.0);
    res.objective = c_.dot(res.x);
    res.residual = (A_ * res.x - b_).lpNorm<Eigen::Infinity>();
    res.duals = y_;
    double mr = 0.0;
    for (int j = 0; j < n_; ++j)
      if (enabled_[j] && pos_[j] < 0) mr = std::min(mr, reduced_cost(j));
    res.min_reduced_cost = mr;
    return res;
  }

 private:
  double cost(int j) const {
    if (j >= n_) return phase_ == 1 ? 1.0 : 0.0;
    return phase_ == 1 ? 0.0 : c_[j];
  }

  double col_dot(int j, const Eigen::VectorXd& v) const {
    if (j >= n_) return art_sign_[j - n_] * v[j - n_];
    double s = 0.0;
    for (SpMat::InnerIterator it(A_, j); it; ++it) s += it.value() * v[it.row()];
    return s;
  }

  double reduced_cost(int j) const { return cost(j) - col_dot(j, y_); }

  void init_basis() {
    head_.resize(m_);
    pos_.assign(n_ + m_, -1);
    art_sign_.resize(m_);
    Binv_ = Eigen::MatrixXd::Zero(m_, m_);
    xB_.resize(m_);
    for (int i = 0; i < m_; ++i) {
      art_sign_[i] = b_[i] < 0.0 ? -1.0 : 1.0;
      head_[i] = n_ + i;
      pos_[n_ + i] = i;
      Binv_(i, i) = art_sign_[i];
      xB_[i] = std::abs(b_[i]);
    }
  }

  void refactor(LPResult& res) {
    Eigen::MatrixXd B = Eigen::MatrixXd::Zero(m_, m_);
    for (int i = 0; i < m_; ++i) {
      const int j = head_[i];
      if (j >= n_) {
        B(j - n_, i) = art_sign_[j - n_];
      } else {
        for (SpMat::InnerIterator it(A_, j); it; ++it) B(it.row(), i) = it.value();
      }
    }
    Eigen::PartialPivLU<Eigen::MatrixXd> lu(B);
    Binv_ = lu.inverse();
    xB_ = Binv_ * b_;
    ++res.refactors;
  }

  double basis_residual() const {
    Eigen::VectorXd r = -b_;
    for (int i = 0; i < m_; ++i) {
      const int j = head_[i];
      if (j >= n_) {
        r[j - n_] += art_sign_[j - n_] * xB_[i];
      } else {
        for (SpMat::InnerIterator it(A_, j); it; ++it) r[it.row()] += it.value() * xB_[i];
      }
    }
    return r.lpNorm<Eigen::Infinity>();
  }

  void compute_duals() {
    Eigen::VectorXd cB(m_);
    for (int i = 0; i < m_; ++i) cB[i] = cost(head_[i]);
    y_ = Binv_.transpose() * cB;
  }

  // entering column or -1; Bland picks the lowest eligible index
  int price(bool bland) const {
    int q = -1;
    double best = -opt_.opt_tol;
    for (int j = 0; j < n_; ++j) {
      if (!enabled_[j] || pos_[j] >= 0) continue;
      const double d = reduced_cost(j);
      if (d < best) {
        q = j;
        if (bland) return q;
        best = d;
      }
    }
    return q;
  }

  bool iterate(LPResult& res) {
    int degenerate = 0;
    int since_refactor = 0;
    Eigen::VectorXd alpha(m_);
    for (;;) {
      if (res.iterations >= opt_.max_iter) {
        res.status = LPStatus::iteration_limit;
        return false;
      }
      if (since_refactor >= opt_.refactor_every ||
          (res.iterations % opt_.check_every == 0 && basis_residual() > 1e-10 * (1.0 + b_.lpNorm<Eigen::Infinity>()))) {
        refactor(res);
        since_refactor = 0;
      }
      compute_duals();
      const bool bland = degenerate > opt_.stall_limit;
      const int q = price(bland);
      if (q < 0) return true;

      alpha.setZero();
      for (SpMat::InnerIterator it(A_, q); it; ++it) alpha.noalias() += it.value() * Binv_.col(it.row());

      // Harris two-pass ratio test
      const double tol = opt_.feas_tol;
      double theta_max = std::numeric_limits<double>::infinity();
      int r = -1;
      for (int i = 0; i < m_; ++i) {
        if (phase_ == 2 && head_[i] >= n_ && std::abs(alpha[i]) > opt_.pivot_tol) {
          // basic artificial at zero must leave before anything moves
          theta_max = 0.0;
          break;
        }
        if (alpha[i] > opt_.pivot_tol) theta_max = std::min(theta_max, (std::max(xB_[i], 0.0) + tol) / alpha[i]);
      }
      if (std::isinf(theta_max)) {
        res.status = LPStatus::unbounded;
        return false;
      }
      double best_alpha = 0.0;
      for (int i = 0; i < m_; ++i) {
        if (phase_ == 2 && head_[i] >= n_ && std::abs(alpha[i]) > opt_.pivot_tol) {
          if (r < 0 || head_[r] < n_ || std::abs(alpha[i]) > best_alpha) {
            r = i;
            best_alpha = std::abs(alpha[i]);
          }
          continue;
        }
        if (r >= 0 && phase_ == 2 && head_[r] >= n_) continue;
        if (alpha[i] > opt_.pivot_tol && std::max(xB_[i], 0.0) / alpha[i] <= theta_max) {
          const bool better = bland ? (r < 0 || head_[i] < head_[r]) : alpha[i] > best_alpha;
          if (r < 0 || better) {
            r = i;
            best_alpha = alpha[i];
          }
        }
      }
      const double theta = (phase_ == 2 && head_[r] >= n_) ? 0.0 : std::max(xB_[r], 0.0) / alpha[r];
      degenerate = theta <= 1e-14 ? degenerate + 1 : 0;

      xB_.noalias() -= theta * alpha;
      xB_[r] = theta;
      const double ar = alpha[r];
      for (int c = 0; c < m_; ++c) {
        const double t = Binv_(r, c) / ar;
        if (t == 0.0) continue;
        Binv_.col(c).noalias() -= t * alpha;
        Binv_(r, c) = t;
      }
      pos_[head_[r]] = -1;
      head_[r] = q;
      pos_[q] = r;
      ++res.iterations;
      ++since_refactor;
    }
  }

  SpMat A_;
  Eigen::VectorXd b_, c_;
  std::vector<char> enabled_;
  SimplexOptions opt_;
  int m_ = 0, n_ = 0, phase_ = 1;
  std::vector<int> head_, pos_;
  std::vector<double> art_sign_;
  Eigen::MatrixXd Binv_;
  Eigen::VectorXd xB_, y_;
};

inline LPResult solve_lp(const RevisedSimplex::SpMat& A, const Eigen::VectorXd& b, const Eigen::VectorXd& c,
                         std::vector<char> enabled = {}, SimplexOptions opt = {}) {
  return RevisedSimplex(A, b, c, std::move(enabled), opt).run();
}

}  // namespace bermudan::numeric
