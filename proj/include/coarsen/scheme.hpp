#pragma once

// Deterministic delta-discretization of the kinetic equations.
//
// Measures are stored as masses of the bins I_l = [(l-1) delta, l delta) and
// are piecewise constant on the time intervals [t_k, t_{k+1}), t_k = k delta.
// One step:
//   dL   = mu1(t_{k-1}, I_1)
//   mu1 <- S_delta(mu1) + (dL / N2) mu2      (S_delta drops bin 1, shifts down)
//   mu2 <- (1 - dL / N2) mu2
//   N2  <- N2 - dL

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <ostream>
#include <vector>

#include "coarsen/csv.hpp"
#include "coarsen/errors.hpp"
#include "coarsen/measures.hpp"

namespace coarsen {

struct SchemeState {
  double delta = 0.0;
  std::size_t k = 0;
  BinMeasure mu1;
  BinMeasure mu2;
  double n1 = 0.0;               // conserved species-1 mass
  double n2_zero = 0.0;
  double cumulative_loss = 0.0;  // sequential sum of loss_history
  std::vector<double> loss_history;

  double time() const noexcept { return static_cast<double>(k) * delta; }
  double n2() const noexcept { return n2_zero - cumulative_loss; }
};

inline SchemeState scheme_init(const GridDensity& f1bar, const GridDensity& f2bar, double delta) {
  if (!(delta > 0.0)) throw DomainError("delta must be positive");
  const double total = f1bar.mass() + f2bar.mass();
  if (std::abs(total - 1.0) > 1e-8) throw ConfigError("initial densities must have total mass 1");
  if (!(f2bar.mass() > 0.0)) throw DegenerateError("species 2 has zero initial mass");
  const double support = std::max(f1bar.support_bound(), f2bar.support_bound());
  if (!detail::is_integer_multiple(support, delta)) throw ConfigError("delta must divide the support bound");

  // Pad the shorter density so both species use the same bins.
  auto padded = [&](const GridDensity& f) {
    const auto cells = static_cast<std::size_t>(std::llround(support / f.step()));
    std::vector<double> v(cells + 1, 0.0);
    std::copy(f.values().begin(), f.values().end(), v.begin());
    return GridDensity(f.step(), std::move(v));
  };
  SchemeState s;
  s.delta = delta;
  s.mu1 = bin_from_density(padded(f1bar), delta);
  s.mu2 = bin_from_density(padded(f2bar), delta);
  s.n1 = s.mu1.mass();
  s.n2_zero = s.mu2.mass();
  return s;
}

inline SchemeState scheme_step(const SchemeState& s) {
  const double loss = s.mu1.size() > 0 ? s.mu1[0] : 0.0;
  const double n2_prev = s.n2();
  if (!(s.n2_zero - (s.cumulative_loss + loss) > 0.0)) {
    throw HorizonError("scheme undefined: species-2 mass exhausted");
  }
  const double transfer = loss / n2_prev;
  const auto m1 = s.mu1.masses();
  const auto m2 = s.mu2.masses();
  const std::size_t bins = m1.size();
  std::vector<double> next1(bins);
  std::vector<double> next2(bins);
  for (std::size_t l = 0; l < bins; ++l) {
    const double shifted = l + 1 < bins ? m1[l + 1] : 0.0;
    next1[l] = shifted + transfer * m2[l];
    next2[l] = m2[l] * (1.0 - transfer);
  }

  SchemeState out;
  out.delta = s.delta;
  out.k = s.k + 1;
  out.mu1 = BinMeasure(s.delta, std::move(next1));
  out.mu2 = BinMeasure(s.delta, std::move(next2));
  out.n1 = s.n1;
  out.n2_zero = s.n2_zero;
  out.cumulative_loss = s.cumulative_loss + loss;
  out.loss_history = s.loss_history;
  out.loss_history.push_back(loss);
  return out;
}

// Snapshots at every t_k <= t_end, starting with s0.
inline std::vector<SchemeState> scheme_run(const SchemeState& s0, double t_end) {
  std::vector<SchemeState> out{s0};
  const auto last_k = static_cast<std::size_t>(std::floor(t_end / s0.delta + 1e-9));
  while (out.back().k < last_k) out.push_back(scheme_step(out.back()));
  return out;
}

// Measure at an arbitrary time: the snapshot at floor(t / delta).
inline const SchemeState& scheme_at(const std::vector<SchemeState>& run, double t) {
  if (run.empty()) throw DomainError("empty scheme run");
  const auto k = static_cast<std::size_t>(std::floor(t / run.front().delta + 1e-9));
  if (k < run.front().k || k > run.back().k) throw HorizonError("time outside the scheme run");
  return run[k - run.front().k];
}

// CSV rows: t,bin,mu1,mu2,n2
inline void write_scheme_snapshots(std::ostream& os, const std::vector<SchemeState>& run) {
  os << "t,bin,mu1,mu2,n2\n";
  for (const auto& s : run) {
    for (std::size_t l = 0; l < s.mu1.size(); ++l) {
      os << csv::num(s.time()) << ',' << l << ',' << csv::num(s.mu1[l]) << ',' << csv::num(s.mu2[l]) << ','
         << csv::num(s.n2()) << '\n';
    }
  }
}

}  // namespace coarsen
