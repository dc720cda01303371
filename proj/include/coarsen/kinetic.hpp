#pragma once

// Explicit solution of the two-species kinetic equations.
//
// The removal rate a(t) = f1(0, t) solves the renewal equation
//     a(t) = f1bar(t) + int_0^t a(t - s) f2hat(s) ds,   f2hat = f2bar / N2(0),
// whose solution is the renewal series a = sum_j f2hat^{*j} * f1bar (the j = 0
// term being f1bar itself). Everything else follows from a:
//     L(t)  = int_0^t a,          N2(t) = N2(0) - L(t),
//     f2(x, t) = N2(t) / N2(0) * f2bar(x),
//     f1(x, t) = f1bar(x + t) + int_0^t f2hat(x + t - s) a(s) ds.
//
// All quadratures are trapezoid rules on the grid of the initial data; time
// and space share the step h.

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <vector>

#include "coarsen/errors.hpp"
#include "coarsen/measures.hpp"

namespace coarsen {

enum class ConvolutionMethod { direct, fft };

namespace detail {

inline void require_same_step(double a, double b) {
  if (std::abs(a - b) > 1e-12 * std::max(a, b)) throw ConfigError("grid steps differ");
}

inline double value_or_zero(std::span<const double> v, std::size_t i) { return i < v.size() ? v[i] : 0.0; }

// h * [sum_{j=0}^{i} f[i-j] g[j] - (f[i] g[0] + f[0] g[i]) / 2] for i < n_out.
inline std::vector<double> convolve_direct(std::span<const double> f, std::span<const double> g,
                                           std::size_t n_out, double h) {
  std::vector<double> out(n_out, 0.0);
  if (f.empty() || g.empty()) return out;
  for (std::size_t i = 1; i < n_out; ++i) {
    const std::size_t j_lo = i >= f.size() ? i - f.size() + 1 : 0;
    const std::size_t j_hi = std::min(i, g.size() - 1);
    double sum = 0.0;
    for (std::size_t j = j_lo; j <= j_hi; ++j) sum += f[i - j] * g[j];
    sum -= 0.5 * (value_or_zero(f, i) * g[0] + f[0] * value_or_zero(g, i));
    out[i] = h * sum;
  }
  return out;
}

inline std::mutex& fftw_planner_mutex() {
  static std::mutex m;
  return m;
}

struct FftwDeleter {
  void operator()(void* p) const noexcept { fftw_free(p); }
};

inline std::vector<double> convolve_fft(std::span<const double> f, std::span<const double> g,
                                        std::size_t n_out, double h) {
  std::vector<double> out(n_out, 0.0);
  if (f.empty() || g.empty() || n_out == 0) return out;
  const std::size_t nf = std::min(f.size(), n_out);
  const std::size_t ng = std::min(g.size(), n_out);
  std::size_t n = 1;
  while (n < nf + ng - 1) n <<= 1;
  const std::size_t nc = n / 2 + 1;

  std::unique_ptr<double, FftwDeleter> buf(fftw_alloc_real(n));
  std::unique_ptr<fftw_complex, FftwDeleter> fa(fftw_alloc_complex(nc));
  std::unique_ptr<fftw_complex, FftwDeleter> fb(fftw_alloc_complex(nc));
  fftw_plan fwd_a;
  fftw_plan fwd_b;
  fftw_plan inv;
  {
    std::lock_guard lock(fftw_planner_mutex());
    const int ni = static_cast<int>(n);
    fwd_a = fftw_plan_dft_r2c_1d(ni, buf.get(), fa.get(), FFTW_ESTIMATE);
    fwd_b = fftw_plan_dft_r2c_1d(ni, buf.get(), fb.get(), FFTW_ESTIMATE);
    inv = fftw_plan_dft_c2r_1d(ni, fa.get(), buf.get(), FFTW_ESTIMATE);
  }
  double* b = buf.get();
  std::fill(b, b + n, 0.0);
  std::copy_n(f.begin(), nf, b);
  fftw_execute(fwd_a);
  std::fill(b, b + n, 0.0);
  std::copy_n(g.begin(), ng, b);
  fftw_execute(fwd_b);
  for (std::size_t k = 0; k < nc; ++k) {
    const double re = fa.get()[k][0] * fb.get()[k][0] - fa.get()[k][1] * fb.get()[k][1];
    const double im = fa.get()[k][0] * fb.get()[k][1] + fa.get()[k][1] * fb.get()[k][0];
    fa.get()[k][0] = re;
    fa.get()[k][1] = im;
  }
  fftw_execute(inv);
  {
    std::lock_guard lock(fftw_planner_mutex());
    fftw_destroy_plan(fwd_a);
    fftw_destroy_plan(fwd_b);
    fftw_destroy_plan(inv);
  }
  const double scale = 1.0 / static_cast<double>(n);
  for (std::size_t i = 1; i < n_out; ++i) {
    const double full = i < nf + ng - 1 ? b[i] * scale : 0.0;
    const double ends = 0.5 * (value_or_zero(f, i) * g[0] + f[0] * value_or_zero(g, i));
    out[i] = std::max(0.0, h * (full - ends));
  }
  return out;
}

}  // namespace detail

// Causal trapezoid convolution (f*g)(t_i) = int_0^{t_i} f(t_i - s) g(s) ds for
// the first n_out grid times. Values past either input's last node are zero.
inline GridDensity convolve(const GridDensity& f, const GridDensity& g, std::size_t n_out,
                            ConvolutionMethod method = ConvolutionMethod::direct) {
  detail::require_same_step(f.step(), g.step());
  if (n_out == 0) throw DomainError("convolution output needs at least one node");
  auto out = method == ConvolutionMethod::fft ? detail::convolve_fft(f.values(), g.values(), n_out, f.step())
                                              : detail::convolve_direct(f.values(), g.values(), n_out, f.step());
  return GridDensity(f.step(), std::move(out));
}

inline GridDensity convolve(const GridDensity& f, const GridDensity& g,
                            ConvolutionMethod method = ConvolutionMethod::direct) {
  return convolve(f, g, std::max(f.size(), g.size()), method);
}

// rho = int e^{-x} p(x) dx for a probability density p (trapezoid).
inline double laplace_at_one(const GridDensity& p) {
  double sum = 0.0;
  const double h = p.step();
  for (std::size_t i = 0; i + 1 < p.size(); ++i) {
    sum += 0.5 * h * (std::exp(-p.node(i)) * p[i] + std::exp(-p.node(i + 1)) * p[i + 1]);
  }
  return sum;
}

// Smallest K >= 0 with e^{t_max} rho^{K+1} / (1 - rho) * sup_f1 < tol.
inline std::size_t series_term_count(double rho, double t_max, double sup_f1, double tol) {
  if (!(tol > 0.0)) throw DomainError("series tolerance must be positive");
  if (sup_f1 == 0.0 || rho == 0.0) return 0;
  const double prefactor = std::exp(t_max) * sup_f1 / (1.0 - rho);
  std::size_t k = 0;
  double tail = prefactor * rho;
  while (tail >= tol) {
    tail *= rho;
    if (++k > 1'000'000) throw DegenerateError("renewal series does not converge to tolerance");
  }
  return k;
}

struct RenewalSeries {
  GridDensity rate;
  std::size_t terms = 0;  // highest convolution power K
  double rho = 0.0;
};

inline RenewalSeries renewal_series(const GridDensity& f1bar, const GridDensity& f2hat, double t_max, double tol,
                                    ConvolutionMethod method = ConvolutionMethod::direct) {
  detail::require_same_step(f1bar.step(), f2hat.step());
  if (!(tol > 0.0)) throw DomainError("series tolerance must be positive");
  if (!(t_max >= 0.0)) throw DomainError("t_max must be nonnegative");
  if (std::abs(f2hat.mass() - 1.0) > 1e-8) throw ConfigError("renewal kernel must have unit mass");
  const double rho = laplace_at_one(f2hat);
  if (rho >= 1.0 - 1e-12) throw DegenerateError("renewal kernel concentrated at the origin");

  const double h = f1bar.step();
  const auto n_t = static_cast<std::size_t>(std::llround(t_max / h)) + 1;
  std::vector<double> first(n_t);
  for (std::size_t i = 0; i < n_t; ++i) first[i] = f1bar.at_node(i);
  GridDensity term(h, std::move(first));
  std::vector<double> sum(term.values().begin(), term.values().end());

  const std::size_t terms = series_term_count(rho, t_max, f1bar.max_value(), tol);
  for (std::size_t j = 1; j <= terms; ++j) {
    term = convolve(f2hat, term, n_t, method);
    const auto v = term.values();
    for (std::size_t i = 0; i < n_t; ++i) sum[i] += v[i];
  }
  return {GridDensity(h, std::move(sum)), terms, rho};
}

// Partial renewal series, truncated where the geometric tail bound drops
// below tol.
inline GridDensity renewal_density(const GridDensity& f1bar, const GridDensity& f2hat, double t_max, double tol,
                                   ConvolutionMethod method = ConvolutionMethod::direct) {
  return renewal_series(f1bar, f2hat, t_max, tol, method).rate;
}

// Running trapezoid integral of a.
inline GridDensity total_loss(const GridDensity& a) {
  std::vector<double> loss(a.size(), 0.0);
  for (std::size_t i = 1; i < a.size(); ++i) loss[i] = loss[i - 1] + 0.5 * a.step() * (a[i - 1] + a[i]);
  return GridDensity(a.step(), std::move(loss));
}

struct KineticOptions {
  double t_max = 1.0;
  double tol = 1e-10;
  std::optional<double> n2_floor;  // default 1e-3 * N2(0)
  ConvolutionMethod method = ConvolutionMethod::direct;
};

struct KineticSolution {
  GridDensity rate;        // a(t)
  GridDensity loss;        // L(t)
  std::vector<double> n2;  // N2(t) = N2(0) - L(t); the last entry may be <= 0
  GridDensity f1bar;
  GridDensity f2bar;
  double n2_zero = 0.0;
  double n2_floor = 0.0;
  double horizon = 0.0;    // first crossing of n2_floor, or t_max
  bool horizon_reached = false;
  std::size_t series_terms = 0;

  double step() const noexcept { return rate.step(); }
  double t_max() const noexcept { return rate.support_bound(); }
  double time(std::size_t i) const noexcept { return rate.node(i); }
  std::size_t time_count() const noexcept { return n2.size(); }
};

// First time N2 <= n2_floor, linearly interpolated between grid times;
// t_max when the floor is never reached.
inline double blowup_time(const KineticSolution& sol, double n2_floor) {
  const auto& n2 = sol.n2;
  for (std::size_t i = 0; i < n2.size(); ++i) {
    if (n2[i] <= n2_floor) {
      if (i == 0) return 0.0;
      const double frac = (n2[i - 1] - n2_floor) / (n2[i - 1] - n2[i]);
      return sol.time(i - 1) + frac * sol.step();
    }
  }
  return sol.t_max();
}

// Solves on [0, opts.t_max]. Arrays stop at the first grid time with N2 <= 0;
// queries are accepted only before the first crossing of the N2 floor.
inline KineticSolution solve_kinetic(const GridDensity& f1bar, const GridDensity& f2bar, const KineticOptions& opts) {
  detail::require_same_step(f1bar.step(), f2bar.step());
  const double n2_zero = f2bar.mass();
  if (!(n2_zero > 0.0)) throw DegenerateError("species 2 has zero initial mass");
  const GridDensity f2hat = f2bar.scaled(1.0 / n2_zero);
  auto series = renewal_series(f1bar, f2hat, opts.t_max, opts.tol, opts.method);
  GridDensity loss = total_loss(series.rate);

  std::vector<double> n2(loss.size());
  std::size_t count = n2.size();
  for (std::size_t i = 0; i < n2.size(); ++i) {
    n2[i] = n2_zero - loss[i];
    if (n2[i] <= 0.0) {
      count = i + 1;
      break;
    }
  }
  n2.resize(count);
  auto truncate = [count](const GridDensity& g) {
    return GridDensity(g.step(), std::vector<double>(g.values().begin(), g.values().begin() + count));
  };

  KineticSolution sol{truncate(series.rate), truncate(loss), std::move(n2), f1bar, f2bar, n2_zero,
                      opts.n2_floor.value_or(1e-3 * n2_zero), 0.0, false, series.terms};
  if (sol.n2_floor < 0.0) throw DomainError("n2 floor must be nonnegative");
  sol.horizon_reached = std::any_of(sol.n2.begin(), sol.n2.end(), [&](double v) { return v <= sol.n2_floor; });
  sol.horizon = blowup_time(sol, sol.n2_floor);
  return sol;
}

namespace detail {

inline void check_query_time(const KineticSolution& sol, double t) {
  if (!(t >= 0.0)) throw DomainError("negative time");
  if (t > sol.t_max() * (1.0 + 1e-12)) throw HorizonError("time past the solved interval");
  if (sol.horizon_reached && t >= sol.horizon) throw HorizonError("time past the N2 floor horizon");
}

inline std::size_t grid_index(const KineticSolution& sol, double t) {
  const double r = t / sol.step();
  const double m = std::round(r);
  if (std::abs(r - m) > 1e-6) throw DomainError("time must lie on the solution grid");
  return static_cast<std::size_t>(m);
}

}  // namespace detail

// N2 at time t, linear in time between grid points.
inline double n2_at(const KineticSolution& sol, double t) {
  detail::check_query_time(sol, t);
  const double r = t / sol.step();
  auto i = std::min(static_cast<std::size_t>(r), sol.n2.size() - 1);
  if (i + 1 >= sol.n2.size()) return sol.n2[i];
  const double frac = r - static_cast<double>(i);
  return sol.n2[i] + frac * (sol.n2[i + 1] - sol.n2[i]);
}

inline GridDensity f2_eval(const KineticSolution& sol, double t) {
  detail::check_query_time(sol, t);
  if (t == 0.0) return sol.f2bar;
  return sol.f2bar.scaled(n2_at(sol, t) / sol.n2_zero);
}

// t must be a grid time.
inline GridDensity f1_eval(const KineticSolution& sol, double t) {
  detail::check_query_time(sol, t);
  const std::size_t m = detail::grid_index(sol, t);
  if (m == 0) return sol.f1bar;
  const double h = sol.step();
  const double inv_n2 = 1.0 / sol.n2_zero;
  const auto a = sol.rate.values();
  const std::size_t nx = std::max(sol.f1bar.size(), sol.f2bar.size());
  std::vector<double> out(nx);
  for (std::size_t i = 0; i < nx; ++i) {
    double sum = 0.0;
    for (std::size_t j = 0; j <= m; ++j) {
      const double w = (j == 0 || j == m) ? 0.5 : 1.0;
      sum += w * sol.f2bar.at_node(i + m - j) * a[j];
    }
    out[i] = sol.f1bar.at_node(i + m) + h * inv_n2 * sum;
  }
  return GridDensity(h, std::move(out));
}

// max over grid t <= horizon of |a(t) - f1bar(t) - int_0^t a(t - s) f2hat(s) ds|.
// The integral uses composite Simpson (with a 3/8 panel for odd cell counts),
// a quadrature independent of the trapezoid rule the series is built on, so
// the residual exposes the O(h^2) discretization error of the solver.
inline double renewal_residual(const KineticSolution& sol) {
  const double h = sol.step();
  const auto a = sol.rate.values();
  const double inv_n2 = 1.0 / sol.n2_zero;
  std::size_t last = a.size() - 1;
  while (last > 0 && sol.time(last) > sol.horizon) --last;

  std::vector<double> g;
  double worst = 0.0;
  for (std::size_t i = 0; i <= last; ++i) {
    g.resize(i + 1);
    for (std::size_t j = 0; j <= i; ++j) g[j] = a[i - j] * sol.f2bar.at_node(j) * inv_n2;
    double integral = 0.0;
    if (i == 1) {
      integral = 0.5 * h * (g[0] + g[1]);
    } else if (i >= 2) {
      const std::size_t simpson_end = (i % 2 == 0) ? i : i - 3;
      if (simpson_end > 0) {
        double s = g[0] + g[simpson_end];
        for (std::size_t j = 1; j < simpson_end; ++j) s += (j % 2 == 1 ? 4.0 : 2.0) * g[j];
        integral = h / 3.0 * s;
      }
      if (simpson_end != i) {
        const std::size_t k = simpson_end;
        integral += 3.0 * h / 8.0 * (g[k] + 3.0 * g[k + 1] + 3.0 * g[k + 2] + g[k + 3]);
      }
    }
    worst = std::max(worst, std::abs(a[i] - sol.f1bar.at_node(i) - integral));
  }
  return worst;
}

}  // namespace coarsen
