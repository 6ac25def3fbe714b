#pragma once

#include <algorithm>
#include <cmath>
#include <memory>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include <boost/math/distributions/normal.hpp>

#include "bermudan/density.hpp"
#include "bermudan/error.hpp"

namespace bermudan {

enum class MeasureFamily { gaussian, uniform, triangle, table, atoms };

inline std::string to_string(MeasureFamily f) {
  switch (f) {
    case MeasureFamily::gaussian: return "gaussian";
    case MeasureFamily::uniform: return "uniform";
    case MeasureFamily::triangle: return "triangle";
    case MeasureFamily::table: return "table";
    case MeasureFamily::atoms: return "atoms";
  }
  return "unknown";
}

struct MeasureSpec {
  MeasureFamily family = MeasureFamily::gaussian;
  double sigma = 1.0;       // gaussian
  double half_width = 1.0;  // uniform, triangle
  double center = 0.0;      // gaussian mean, uniform/triangle center
  std::vector<double> xs, densities;  // table (piecewise linear)
  std::vector<double> locs, weights;  // atoms
  double trunc_quantile = 1e-9;
  int panels = 2048;

  static MeasureSpec gaussian(double sigma, double mean = 0.0) {
    MeasureSpec s;
    s.family = MeasureFamily::gaussian;
    s.sigma = sigma;
    s.center = mean;
    return s;
  }
  static MeasureSpec uniform(double half_width, double center = 0.0) {
    MeasureSpec s;
    s.family = MeasureFamily::uniform;
    s.half_width = half_width;
    s.center = center;
    return s;
  }
  static MeasureSpec triangle(double half_width, double center = 0.0) {
    MeasureSpec s;
    s.family = MeasureFamily::triangle;
    s.half_width = half_width;
    s.center = center;
    return s;
  }
  static MeasureSpec table(std::vector<double> xs, std::vector<double> ds) {
    MeasureSpec s;
    s.family = MeasureFamily::table;
    s.xs = std::move(xs);
    s.densities = std::move(ds);
    return s;
  }
  static MeasureSpec atoms(std::vector<double> locs, std::vector<double> ws) {
    MeasureSpec s;
    s.family = MeasureFamily::atoms;
    s.locs = std::move(locs);
    s.weights = std::move(ws);
    return s;
  }
};

struct Atom {
  double loc;
  double weight;
};

// A one-dimensional law: either a density on an interval (cached CDF and
// moments) or a finite atom list. Immutable after construction.
class Measure {
 public:
  enum class Kind { density, atoms };

  Kind kind() const { return kind_; }
  bool is_density() const { return kind_ == Kind::density; }
  const MeasureSpec& spec() const { return spec_; }
  bool symmetric() const { return symmetric_; }
  double trunc_quantile() const { return truncated_ ? spec_.trunc_quantile : 0.0; }
  bool truncated() const { return truncated_; }
  double mass_deficit() const { return 1.0 - total_mass(); }

  double lo() const { return lo_; }
  double hi() const { return hi_; }

  const PiecewiseDensity& table() const {
    require(is_density(), ErrorKind::domain_error, "atom measure has no density");
    return *pd_;
  }
  std::shared_ptr<const PiecewiseDensity> table_ptr() const { return pd_; }
  const std::vector<Atom>& atoms() const { return atoms_; }

  double density(double x) const { return is_density() ? (*pd_)(x) : 0.0; }

  double total_mass() const {
    if (is_density()) return pd_->total_mass();
    double s = 0.0;
    for (const auto& a : atoms_) s += a.weight;
    return s;
  }

  double mean() const {
    if (is_density()) return pd_->total_moment() / pd_->total_mass();
    double s = 0.0, m = 0.0;
    for (const auto& a : atoms_) {
      s += a.weight;
      m += a.weight * a.loc;
    }
    return m / s;
  }

  double cdf(double x) const {
    if (is_density()) return pd_->cdf(x);
    double s = 0.0;
    for (const auto& a : atoms_)
      if (a.loc <= x) s += a.weight;
    return s;
  }

  double mass(double a, double b) const {
    if (is_density()) return pd_->mass(a, b);
    double s = 0.0;
    for (const auto& at : atoms_)
      if (at.loc > a && at.loc <= b) s += at.weight;
    return s;
  }

  double quantile(double m) const {
    if (is_density()) return pd_->quantile(m);
    double s = 0.0;
    for (const auto& a : atoms_) {
      s += a.weight;
      if (s >= m) return a.loc;
    }
    return atoms_.back().loc;
  }

  double potential(double k) const {
    if (is_density()) return pd_->potential(k);
    double s = 0.0;
    for (const auto& a : atoms_) s += a.weight * std::abs(a.loc - k);
    return s;
  }

  // Integral of f against the measure (adaptive, split at density kinks).
  template <class F>
  double integrate(F&& f, double a, double b, const std::vector<double>& extra_breaks = {},
                   int min_panels = 64) const {
    if (!is_density()) {
      double s = 0.0;
      for (const auto& at : atoms_)
        if (at.loc >= a && at.loc <= b) s += at.weight * f(at.loc);
      return s;
    }
    a = std::max(a, lo_);
    b = std::min(b, hi_);
    if (!(b > a)) return 0.0;
    std::vector<double> br = pd_->kinks();
    br.insert(br.end(), extra_breaks.begin(), extra_breaks.end());
    return numeric::integrate([&](double x) { return f(x) * (*pd_)(x); }, a, b, br, min_panels);
  }
  template <class F>
  double integrate(F&& f, const std::vector<double>& extra_breaks = {}, int min_panels = 64) const {
    return integrate(f, lo_, hi_, extra_breaks, min_panels);
  }

  // Builders.
  friend Measure make_measure(const MeasureSpec& spec);

 private:
  Kind kind_ = Kind::density;
  MeasureSpec spec_;
  std::shared_ptr<const PiecewiseDensity> pd_;
  std::vector<Atom> atoms_;
  double lo_ = 0.0, hi_ = 0.0;
  bool symmetric_ = false;
  bool truncated_ = false;
};

inline bool probe_symmetric(const PiecewiseDensity& pd, int n = 2001) {
  if (std::abs(pd.lo() + pd.hi()) > 1e-12 * std::max(1.0, pd.hi())) return false;
  for (int i = 0; i < n; ++i) {
    const double x = pd.hi() * (i + 0.5) / n;
    if (std::abs(pd(x) - pd(-x)) > 1e-12) return false;
  }
  return true;
}

inline Measure make_measure(const MeasureSpec& spec) {
  Measure m;
  m.spec_ = spec;
  auto finite_pos = [](double v) { return std::isfinite(v) && v > 0.0; };
  require(spec.panels >= 16, ErrorKind::invalid_spec, "panels must be >= 16");
  switch (spec.family) {
    case MeasureFamily::gaussian: {
      require(finite_pos(spec.sigma), ErrorKind::invalid_spec, "gaussian sigma must be positive");
      require(std::isfinite(spec.center), ErrorKind::invalid_spec, "gaussian mean must be finite");
      require(spec.trunc_quantile > 0.0 && spec.trunc_quantile < 0.5, ErrorKind::invalid_spec,
              "trunc_quantile must lie in (0, 0.5)");
      boost::math::normal_distribution<double> nd(0.0, spec.sigma);
      const double half = boost::math::quantile(boost::math::complement(nd, spec.trunc_quantile));
      m.lo_ = spec.center - half;
      m.hi_ = spec.center + half;
      const double mu = spec.center, s = spec.sigma;
      auto rho = [mu, s](double x) {
        const double z = (x - mu) / s;
        return std::exp(-0.5 * z * z) / (s * std::sqrt(2.0 * std::numbers::pi));
      };
      m.pd_ = std::make_shared<PiecewiseDensity>(
          rho, std::vector<PiecewiseDensity::Interval>{{m.lo_, m.hi_}}, std::vector<double>{mu},
          spec.panels);
      m.truncated_ = true;
      break;
    }
    case MeasureFamily::uniform: {
      require(finite_pos(spec.half_width), ErrorKind::invalid_spec,
              "uniform half_width must be positive");
      const double w = spec.half_width;
      m.lo_ = spec.center - w;
      m.hi_ = spec.center + w;
      m.pd_ = std::make_shared<PiecewiseDensity>(
          [w](double) { return 0.5 / w; },
          std::vector<PiecewiseDensity::Interval>{{m.lo_, m.hi_}}, std::vector<double>{},
          spec.panels);
      break;
    }
    case MeasureFamily::triangle: {
      require(finite_pos(spec.half_width), ErrorKind::invalid_spec,
              "triangle half_width must be positive");
      const double w = spec.half_width, c = spec.center;
      m.lo_ = c - w;
      m.hi_ = c + w;
      m.pd_ = std::make_shared<PiecewiseDensity>(
          [w, c](double x) { return std::max(0.0, 1.0 - std::abs(x - c) / w) / w; },
          std::vector<PiecewiseDensity::Interval>{{m.lo_, m.hi_}}, std::vector<double>{c},
          spec.panels);
      break;
    }
    case MeasureFamily::table: {
      const auto& xs = spec.xs;
      const auto& ds = spec.densities;
      require(xs.size() >= 2 && xs.size() == ds.size(), ErrorKind::invalid_spec,
              "table needs >= 2 matching xs/densities");
      for (std::size_t i = 0; i < xs.size(); ++i) {
        require(std::isfinite(xs[i]) && std::isfinite(ds[i]), ErrorKind::invalid_spec,
                "table entries must be finite");
        require(ds[i] >= 0.0, ErrorKind::invalid_spec, "negative density sample");
        if (i > 0) require(xs[i] > xs[i - 1], ErrorKind::invalid_spec, "non-increasing xs");
      }
      m.lo_ = xs.front();
      m.hi_ = xs.back();
      auto rho = [xs, ds](double x) {
        if (x <= xs.front()) return ds.front();
        if (x >= xs.back()) return ds.back();
        const std::size_t k = std::upper_bound(xs.begin(), xs.end(), x) - xs.begin() - 1;
        const double t = (x - xs[k]) / (xs[k + 1] - xs[k]);
        return ds[k] + t * (ds[k + 1] - ds[k]);
      };
      m.pd_ = std::make_shared<PiecewiseDensity>(
          rho, std::vector<PiecewiseDensity::Interval>{{m.lo_, m.hi_}}, xs, spec.panels);
      require(std::abs(m.pd_->total_mass() - 1.0) <= 1e-9, ErrorKind::invalid_spec,
              "table density must integrate to 1");
      break;
    }
    case MeasureFamily::atoms: {
      require(!spec.locs.empty() && spec.locs.size() == spec.weights.size(),
              ErrorKind::invalid_spec, "atoms need matching locs/weights");
      std::vector<Atom> at;
      for (std::size_t i = 0; i < spec.locs.size(); ++i) {
        require(std::isfinite(spec.locs[i]) && std::isfinite(spec.weights[i]) &&
                    spec.weights[i] >= 0.0,
                ErrorKind::invalid_spec, "atom weights must be finite and nonnegative");
        if (spec.weights[i] > 0.0) at.push_back({spec.locs[i], spec.weights[i]});
      }
      require(!at.empty(), ErrorKind::invalid_spec, "atoms have zero mass");
      std::sort(at.begin(), at.end(), [](const Atom& l, const Atom& r) { return l.loc < r.loc; });
      std::vector<Atom> merged;
      for (const auto& a : at) {
        if (!merged.empty() && merged.back().loc == a.loc)
          merged.back().weight += a.weight;
        else
          merged.push_back(a);
      }
      double total = 0.0;
      for (const auto& a : merged) total += a.weight;
      require(std::abs(total - 1.0) <= 1e-9, ErrorKind::invalid_spec, "atom weights must sum to 1");
      m.kind_ = Measure::Kind::atoms;
      m.atoms_ = std::move(merged);
      m.lo_ = m.atoms_.front().loc;
      m.hi_ = m.atoms_.back().loc;
      bool sym = true;
      for (std::size_t i = 0, j = m.atoms_.size() - 1; i < m.atoms_.size(); ++i, --j)
        sym = sym && std::abs(m.atoms_[i].loc + m.atoms_[j].loc) <= 1e-12 &&
              std::abs(m.atoms_[i].weight - m.atoms_[j].weight) <= 1e-12;
      m.symmetric_ = sym;
      return m;
    }
  }
  m.symmetric_ = probe_symmetric(*m.pd_);
  return m;
}

}  // namespace bermudan
