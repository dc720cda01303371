#pragma once

// Measure representations on [0, M] and the distances between them.
//
// Three concrete representations are used throughout the library:
//   GridDensity      - nonnegative nodal values on a uniform grid, linearly
//                      interpolated between nodes and zero beyond the last node;
//   BinMeasure       - masses of contiguous half-open bins [l*w, (l+1)*w),
//                      spread uniformly inside each bin;
//   EmpiricalMeasure - equal-weight atoms.
//
// Cumulative functions are right-continuous: F(x) = measure of [0, x]. The
// point {0} carries no mass for densities and bin measures.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "coarsen/errors.hpp"

namespace coarsen {

namespace detail {

inline bool is_integer_multiple(double value, double unit, double rel_tol = 1e-9) {
  const double ratio = value / unit;
  const double rounded = std::round(ratio);
  return rounded >= 1.0 && std::abs(ratio - rounded) <= rel_tol * std::max(1.0, ratio);
}

inline std::size_t checked_ratio(double value, double unit, const char* what) {
  if (!(unit > 0.0) || !is_integer_multiple(value, unit)) {
    throw ConfigError(std::string(what) + " must be a positive integer multiple of the grid step");
  }
  return static_cast<std::size_t>(std::llround(value / unit));
}

inline void require_nonnegative(std::span<const double> values, const char* what) {
  for (double v : values) {
    if (!std::isfinite(v) || v < 0.0) {
      throw DomainError(std::string(what) + " must hold finite nonnegative values");
    }
  }
}

}  // namespace detail

class GridDensity {
 public:
  GridDensity() = default;

  // Node i sits at i * step; the support bound is step * (values.size() - 1).
  GridDensity(double step, std::vector<double> values) : step_(step), values_(std::move(values)) {
    if (!(step_ > 0.0) || !std::isfinite(step_)) throw DomainError("grid step must be positive");
    if (values_.empty()) throw DomainError("grid density needs at least one node");
    detail::require_nonnegative(values_, "grid density");
    prefix_.resize(values_.size());
    prefix_[0] = 0.0;
    for (std::size_t i = 1; i < values_.size(); ++i) {
      prefix_[i] = prefix_[i - 1] + 0.5 * step_ * (values_[i - 1] + values_[i]);
    }
  }

  // Samples f at the nodes of [0, support_bound]; support_bound must be a
  // multiple of step.
  template <class F>
  static GridDensity sample(double step, double support_bound, F&& f) {
    const std::size_t cells = detail::checked_ratio(support_bound, step, "support bound");
    std::vector<double> v(cells + 1);
    for (std::size_t i = 0; i <= cells; ++i) v[i] = f(static_cast<double>(i) * step);
    return GridDensity(step, std::move(v));
  }

  double step() const noexcept { return step_; }
  std::size_t size() const noexcept { return values_.size(); }
  std::span<const double> values() const noexcept { return values_; }
  double operator[](std::size_t i) const noexcept { return values_[i]; }
  double node(std::size_t i) const noexcept { return static_cast<double>(i) * step_; }
  double support_bound() const noexcept { return node(values_.size() - 1); }
  double mass() const noexcept { return prefix_.back(); }
  double max_value() const noexcept { return *std::max_element(values_.begin(), values_.end()); }

  // Node value, zero past the last node.
  double at_node(std::size_t i) const noexcept { return i < values_.size() ? values_[i] : 0.0; }

  // Linear interpolation on [0, M], zero outside.
  double operator()(double x) const noexcept {
    if (x < 0.0 || x > support_bound()) return 0.0;
    const std::size_t last = values_.size() - 1;
    if (last == 0) return values_[0];
    auto k = static_cast<std::size_t>(x / step_);
    if (k >= last) return values_[last];
    const double frac = (x - node(k)) / step_;
    return values_[k] + (values_[k + 1] - values_[k]) * frac;
  }

  // Right limit; differs from operator() only at the support bound.
  double right_limit(double x) const noexcept { return x >= support_bound() ? 0.0 : (*this)(x); }

  // Integral of the interpolant over [0, x].
  double cumulative(double x) const {
    if (!(x >= 0.0)) throw DomainError("cumulative evaluated at negative x");
    const std::size_t last = values_.size() - 1;
    if (last == 0 || x >= support_bound()) return mass();
    auto k = std::min(static_cast<std::size_t>(x / step_), last - 1);
    return cell_cumulative(k, x - node(k));
  }

  // Nodal prefix integrals (trapezoid), prefix[i] = F(node(i)).
  std::span<const double> prefix() const noexcept { return prefix_; }

  GridDensity scaled(double factor) const {
    std::vector<double> v(values_);
    for (double& x : v) x *= factor;
    return GridDensity(step_, std::move(v));
  }

  // F(node(k) + dx) for 0 <= dx <= step.
  double cell_cumulative(std::size_t k, double dx) const noexcept {
    const double v0 = values_[k];
    const double slope = (values_[k + 1] - v0) / step_;
    return prefix_[k] + dx * (v0 + 0.5 * slope * dx);
  }

 private:
  double step_ = 1.0;
  std::vector<double> values_{0.0};
  std::vector<double> prefix_{0.0};
};

class BinMeasure {
 public:
  BinMeasure() = default;

  BinMeasure(double bin_width, std::vector<double> masses)
      : width_(bin_width), masses_(std::move(masses)) {
    if (!(width_ > 0.0) || !std::isfinite(width_)) throw DomainError("bin width must be positive");
    detail::require_nonnegative(masses_, "bin measure");
    rebuild_prefix();
  }

  double bin_width() const noexcept { return width_; }
  std::size_t size() const noexcept { return masses_.size(); }
  std::span<const double> masses() const noexcept { return masses_; }
  double operator[](std::size_t l) const noexcept { return masses_[l]; }
  double edge(std::size_t l) const noexcept { return static_cast<double>(l) * width_; }
  double support_bound() const noexcept { return edge(masses_.size()); }
  double mass() const noexcept { return prefix_.back(); }
  double max_mass() const noexcept {
    return masses_.empty() ? 0.0 : *std::max_element(masses_.begin(), masses_.end());
  }

  double cumulative(double x) const {
    if (!(x >= 0.0)) throw DomainError("cumulative evaluated at negative x");
    auto l = static_cast<std::size_t>(x / width_);
    if (l >= masses_.size()) return mass();
    return prefix_[l] + masses_[l] * (x - edge(l)) / width_;
  }

 private:
  void rebuild_prefix() {
    prefix_.assign(masses_.size() + 1, 0.0);
    for (std::size_t l = 0; l < masses_.size(); ++l) prefix_[l + 1] = prefix_[l] + masses_[l];
  }

  double width_ = 1.0;
  std::vector<double> masses_;
  std::vector<double> prefix_{0.0};
};

class EmpiricalMeasure {
 public:
  EmpiricalMeasure() = default;

  EmpiricalMeasure(std::vector<double> points, double weight)
      : points_(std::move(points)), weight_(weight) {
    if (!(weight_ > 0.0) || !std::isfinite(weight_)) throw DomainError("atom weight must be positive");
    detail::require_nonnegative(points_, "empirical measure");
    if (!std::is_sorted(points_.begin(), points_.end())) std::sort(points_.begin(), points_.end());
  }

  std::span<const double> points() const noexcept { return points_; }
  std::size_t size() const noexcept { return points_.size(); }
  double weight() const noexcept { return weight_; }
  double mass() const noexcept { return static_cast<double>(points_.size()) * weight_; }

  double cumulative(double x) const {
    if (!(x >= 0.0)) throw DomainError("cumulative evaluated at negative x");
    const auto count = std::upper_bound(points_.begin(), points_.end(), x) - points_.begin();
    return static_cast<double>(count) * weight_;
  }

 private:
  std::vector<double> points_;
  double weight_ = 1.0;
};

template <class M>
concept Measure = requires(const M& m, double x) {
  { m.cumulative(x) } -> std::convertible_to<double>;
  { m.mass() } -> std::convertible_to<double>;
};

template <Measure M>
double cumulative_eval(const M& m, double x) {
  return m.cumulative(x);
}

// Piecewise description of a cumulative function: sorted knots, an atom at
// each knot, and a density that is linear between consecutive knots (from
// `right` at one knot to `left` at the next) and zero outside the knot range.
class CumulativeProfile {
 public:
  struct Knot {
    double x;
    double atom;
    double left;   // density limit from the left
    double right;  // density limit from the right
  };

  CumulativeProfile() = default;
  explicit CumulativeProfile(std::vector<Knot> knots) : knots_(std::move(knots)) {}

  std::span<const Knot> knots() const noexcept { return knots_; }

 private:
  std::vector<Knot> knots_;
};

inline CumulativeProfile to_profile(const GridDensity& f) {
  std::vector<CumulativeProfile::Knot> knots(f.size());
  for (std::size_t i = 0; i < f.size(); ++i) {
    knots[i] = {f.node(i), 0.0, i == 0 ? 0.0 : f[i], i + 1 == f.size() ? 0.0 : f[i]};
  }
  return CumulativeProfile(std::move(knots));
}

inline CumulativeProfile to_profile(const BinMeasure& m) {
  std::vector<CumulativeProfile::Knot> knots(m.size() + 1);
  const double w = m.bin_width();
  for (std::size_t l = 0; l <= m.size(); ++l) {
    knots[l] = {m.edge(l), 0.0, l == 0 ? 0.0 : m[l - 1] / w, l == m.size() ? 0.0 : m[l] / w};
  }
  return CumulativeProfile(std::move(knots));
}

inline CumulativeProfile to_profile(const EmpiricalMeasure& m) {
  std::vector<CumulativeProfile::Knot> knots;
  knots.reserve(m.size());
  for (double p : m.points()) {
    if (!knots.empty() && knots.back().x == p) {
      knots.back().atom += m.weight();
    } else {
      knots.push_back({p, m.weight(), 0.0, 0.0});
    }
  }
  return CumulativeProfile(std::move(knots));
}

inline const CumulativeProfile& to_profile(const CumulativeProfile& p) { return p; }

namespace detail {

// Density of piece `piece` (the interval starting at knot `piece`) at x.
inline double piece_density(std::span<const CumulativeProfile::Knot> k, std::ptrdiff_t piece, double x) {
  if (piece < 0 || static_cast<std::size_t>(piece) + 1 >= k.size()) return 0.0;
  const auto& a = k[static_cast<std::size_t>(piece)];
  const auto& b = k[static_cast<std::size_t>(piece) + 1];
  if (a.right == b.left) return a.right;
  return a.right + (b.left - a.right) * (x - a.x) / (b.x - a.x);
}

}  // namespace detail

// Exact sup_x |F_a(x) - F_b(x)|. The sweep visits the union of knots, checks
// both one-sided limits at each knot, and between knots checks the interior
// extremum where the density difference changes sign.
inline double ks_distance(const CumulativeProfile& a, const CumulativeProfile& b) {
  const auto ka = a.knots();
  const auto kb = b.knots();
  constexpr double inf = std::numeric_limits<double>::infinity();
  std::size_t ia = 0;
  std::size_t ib = 0;
  std::ptrdiff_t pa = -1;
  std::ptrdiff_t pb = -1;
  double fa = 0.0;
  double fb = 0.0;
  double sup = 0.0;
  while (ia < ka.size() || ib < kb.size()) {
    const double p = std::min(ia < ka.size() ? ka[ia].x : inf, ib < kb.size() ? kb[ib].x : inf);
    sup = std::max(sup, std::abs(fa - fb));
    if (ia < ka.size() && ka[ia].x == p) {
      fa += ka[ia].atom;
      pa = static_cast<std::ptrdiff_t>(ia++);
    }
    if (ib < kb.size() && kb[ib].x == p) {
      fb += kb[ib].atom;
      pb = static_cast<std::ptrdiff_t>(ib++);
    }
    sup = std::max(sup, std::abs(fa - fb));
    const double q = std::min(ia < ka.size() ? ka[ia].x : inf, ib < kb.size() ? kb[ib].x : inf);
    if (q == inf) break;
    const double len = q - p;
    const double a0 = detail::piece_density(ka, pa, p);
    const double a1 = detail::piece_density(ka, pa, q);
    const double b0 = detail::piece_density(kb, pb, p);
    const double b1 = detail::piece_density(kb, pb, q);
    const double g0 = a0 - b0;
    const double g1 = a1 - b1;
    if ((g0 > 0.0 && g1 < 0.0) || (g0 < 0.0 && g1 > 0.0)) {
      const double r = len * g0 / (g0 - g1);
      sup = std::max(sup, std::abs(fa - fb + 0.5 * r * g0));
    }
    fa += 0.5 * len * (a0 + a1);
    fb += 0.5 * len * (b0 + b1);
  }
  return std::max(sup, std::abs(fa - fb));
}

template <class A, class B>
double ks_distance(const A& a, const B& b) {
  return ks_distance(to_profile(a), to_profile(b));
}

// Sum of the per-species KS distances.
template <class A1, class A2, class B1, class B2>
double pair_distance(const A1& a1, const A2& a2, const B1& b1, const B2& b2) {
  return ks_distance(a1, b1) + ks_distance(a2, b2);
}

// max over x = l*spacing, 0 <= x <= upper, of |F_a(x) - F_b(x)|.
template <Measure A, Measure B>
double ks_distance_on_grid(const A& a, const B& b, double spacing, double upper) {
  if (!(spacing > 0.0)) throw DomainError("grid spacing must be positive");
  const auto count = static_cast<std::size_t>(std::floor(upper / spacing + 1e-9));
  double sup = 0.0;
  for (std::size_t l = 0; l <= count; ++l) {
    const double x = static_cast<double>(l) * spacing;
    sup = std::max(sup, std::abs(a.cumulative(x) - b.cumulative(x)));
  }
  return sup;
}

// sup_x sum_j |f_j(x + delta) - f_j(x)|. Both increments are piecewise linear
// with kinks at nodes and nodes - delta, so the sup is attained (or
// approached from one side at the support jump) at those candidates.
inline double modulus_of_continuity(const GridDensity& f1, const GridDensity& f2, double delta) {
  if (!(delta > 0.0)) throw DomainError("modulus of continuity needs delta > 0");
  std::vector<double> candidates{0.0};
  for (const GridDensity* f : {&f1, &f2}) {
    for (std::size_t i = 0; i < f->size(); ++i) {
      const double x = f->node(i);
      candidates.push_back(x);
      if (x - delta >= 0.0) candidates.push_back(x - delta);
    }
  }
  double sup = 0.0;
  for (double x : candidates) {
    const double left = std::abs(f1(x + delta) - f1(x)) + std::abs(f2(x + delta) - f2(x));
    const double right = std::abs(f1.right_limit(x + delta) - f1.right_limit(x)) +
                         std::abs(f2.right_limit(x + delta) - f2.right_limit(x));
    sup = std::max({sup, left, right});
  }
  return sup;
}

// Trapezoid mass of f on each bin [l*delta, (l+1)*delta).
inline BinMeasure bin_from_density(const GridDensity& f, double delta) {
  const std::size_t per_bin = detail::checked_ratio(delta, f.step(), "bin width");
  const std::size_t cells = f.size() - 1;
  const std::size_t bins = (cells + per_bin - 1) / per_bin;
  std::vector<double> masses(bins, 0.0);
  const double h = f.step();
  for (std::size_t l = 0; l < bins; ++l) {
    const std::size_t end = std::min((l + 1) * per_bin, cells);
    double m = 0.0;
    for (std::size_t i = l * per_bin; i < end; ++i) m += 0.5 * h * (f[i] + f[i + 1]);
    masses[l] = m;
  }
  return BinMeasure(delta, std::move(masses));
}

// inf{x : F(x) >= q}. Levels within a relative 1e-12 of the total mass are
// snapped to the end of the support, where bisection is ill-conditioned.
inline double quantile(const GridDensity& f, double q) {
  const double total = f.mass();
  if (!(q >= 0.0) || q > total * (1.0 + 1e-12) + 1e-300) {
    throw DomainError("quantile level outside [0, mass]");
  }
  if (q == 0.0 || total == 0.0) return 0.0;
  const auto v = f.values();
  if (q >= total * (1.0 - 1e-12)) {
    std::size_t last = v.size() - 1;
    while (last > 0 && v[last] == 0.0) --last;
    return f.node(std::min(last + 1, v.size() - 1));
  }
  const auto prefix = f.prefix();
  const auto it = std::lower_bound(prefix.begin(), prefix.end(), q);
  const auto k = static_cast<std::size_t>(it - prefix.begin());
  // F(node(k-1)) < q <= F(node(k))
  double lo = 0.0;
  double hi = f.step();
  for (int iter = 0; iter < 200; ++iter) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    if (f.cell_cumulative(k - 1, mid) >= q) {
      hi = mid;
    } else {
      lo = mid;
    }
  }
  return hi >= f.step() ? f.node(k) : f.node(k - 1) + hi;
}

}  // namespace coarsen
