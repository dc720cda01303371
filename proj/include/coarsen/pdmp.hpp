#pragma once

// Event-driven simulation of the n-particle two-species process.
//
// Species 1 drifts toward the origin at unit speed; species 2 is stationary.
// When a species-1 particle reaches the origin it is removed and a species-2
// particle chosen uniformly at random turns into species 1 at its current
// position. Simultaneous arrivals draw mutation candidates without
// replacement. A removal that finds species 2 empty sends the process to the
// cemetery state, where it stays.
//
// Drift is a global clock: species 1 is a min-heap of keys
// key = position + (time of entry into species 1), so the effective position
// at time t is key - t and the next arrival happens at time min(key).

#include <algorithm>
#include <cassert>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <ostream>
#include <span>
#include <vector>

#include "coarsen/csv.hpp"
#include "coarsen/errors.hpp"
#include "coarsen/measures.hpp"
#include "coarsen/rng.hpp"

namespace coarsen {

struct EventRecord {
  double time = 0.0;
  double position = std::numeric_limits<double>::quiet_NaN();  // mutated particle
  bool mutated = false;  // false: no species-2 candidate was left
};

class ParticleState {
 public:
  ParticleState() = default;

  static ParticleState from_positions(std::vector<double> species1, std::vector<double> species2,
                                      std::size_t n_initial, std::uint64_t seed) {
    if (species1.size() + species2.size() > n_initial) {
      throw ConfigError("more particles than the initial count");
    }
    detail::require_nonnegative(species1, "species-1 positions");
    detail::require_nonnegative(species2, "species-2 positions");
    ParticleState s;
    s.heap_ = std::move(species1);
    std::make_heap(s.heap_.begin(), s.heap_.end(), std::greater<>{});
    s.species2_ = std::move(species2);
    s.n_initial_ = n_initial;
    s.n1_initial_ = s.heap_.size();
    s.rng_ = Rng(seed);
    return s;
  }

  double time() const noexcept { return time_; }
  bool terminal() const noexcept { return terminal_; }
  std::size_t n_initial() const noexcept { return n_initial_; }
  std::size_t species1_count() const noexcept { return heap_.size(); }
  std::size_t species2_count() const noexcept { return species2_.size(); }
  std::span<const EventRecord> events() const noexcept { return events_; }

  // Absolute time of the next arrival at the origin.
  std::optional<double> next_event_time() const noexcept {
    if (terminal_ || heap_.empty()) return std::nullopt;
    return heap_.front();
  }

  // Applies every arrival at the next event time.
  void advance() {
    const auto when = next_event_time();
    if (!when) return;
    time_ = *when;
    pending_.clear();
    std::size_t arrivals = 0;
    while (!heap_.empty() && heap_.front() == time_) {
      std::pop_heap(heap_.begin(), heap_.end(), std::greater<>{});
      heap_.pop_back();
      ++arrivals;
    }
    for (std::size_t i = 0; i < arrivals; ++i) {
      if (species2_.empty()) {
        events_.push_back({time_, std::numeric_limits<double>::quiet_NaN(), false});
        terminal_ = true;
        continue;
      }
      const auto idx = static_cast<std::size_t>(rng_.bounded(species2_.size()));
      const double position = species2_[idx];
      species2_[idx] = species2_.back();
      species2_.pop_back();
      events_.push_back({time_, position, true});
      pending_.push_back(position + time_);
    }
    for (double key : pending_) {
      heap_.push_back(key);
      std::push_heap(heap_.begin(), heap_.end(), std::greater<>{});
    }
    assert(terminal_ || heap_.size() == n1_initial_);
  }

  // Runs every event with time <= t.
  void run_until(double t) {
    for (auto next = next_event_time(); next && *next <= t; next = next_event_time()) advance();
  }

  // Species-1 positions at time t (frozen at the cemetery time once terminal).
  // Requires time() <= t <= next_event_time().
  std::vector<double> species1_positions(double t) const {
    const double clock = terminal_ ? time_ : t;
    std::vector<double> out(heap_.size());
    std::transform(heap_.begin(), heap_.end(), out.begin(), [clock](double key) { return key - clock; });
    std::sort(out.begin(), out.end());
    return out;
  }

  std::vector<double> species2_positions() const {
    std::vector<double> out(species2_);
    std::sort(out.begin(), out.end());
    return out;
  }

 private:
  std::vector<double> heap_;
  std::vector<double> species2_;
  std::vector<double> pending_;
  std::vector<EventRecord> events_;
  std::size_t n_initial_ = 0;
  std::size_t n1_initial_ = 0;
  double time_ = 0.0;
  bool terminal_ = false;
  Rng rng_;
};

struct InitialPositions {
  std::vector<double> species1;
  std::vector<double> species2;
};

// Deterministic quantile placement: floor(n N1(0)) species-1 particles at
// F1^{-1}(i/n), the rest at F2^{-1}(i/n) for increasing i, with F_j the
// unnormalized cumulative functions.
inline InitialPositions quantile_positions(const GridDensity& f1bar, const GridDensity& f2bar, std::size_t n) {
  if (n < 2) throw ConfigError("need at least two particles");
  const double n1_mass = f1bar.mass();
  const double n2_mass = f2bar.mass();
  if (!(n2_mass > 0.0)) throw ConfigError("species 2 has zero initial mass");
  if (std::abs(n1_mass + n2_mass - 1.0) > 1e-8) throw ConfigError("initial densities must have total mass 1");
  const double nd = static_cast<double>(n);
  const auto n1 = std::min(n - 1, static_cast<std::size_t>(std::floor(nd * n1_mass + 1e-9)));
  InitialPositions out;
  out.species1.reserve(n1);
  out.species2.reserve(n - n1);
  for (std::size_t i = 1; i <= n1; ++i) {
    out.species1.push_back(quantile(f1bar, std::min(static_cast<double>(i) / nd, n1_mass)));
  }
  for (std::size_t i = 1; i <= n - n1; ++i) {
    out.species2.push_back(quantile(f2bar, std::min(static_cast<double>(i) / nd, n2_mass)));
  }
  return out;
}

inline ParticleState pdmp_init(const GridDensity& f1bar, const GridDensity& f2bar, std::size_t n,
                               std::uint64_t seed) {
  auto pos = quantile_positions(f1bar, f2bar, n);
  return ParticleState::from_positions(std::move(pos.species1), std::move(pos.species2), n, seed);
}

// Minimum effective species-1 position; nullopt once the process has ended.
inline std::optional<double> next_event(const ParticleState& s) {
  const auto when = s.next_event_time();
  if (!when) return std::nullopt;
  return *when - s.time();
}

inline ParticleState apply_event(ParticleState s) {
  s.advance();
  return s;
}

struct PdmpSnapshot {
  double t = 0.0;
  EmpiricalMeasure species1;
  EmpiricalMeasure species2;
  bool terminal = false;
};

inline PdmpSnapshot snapshot(const ParticleState& s, double t) {
  const double w = 1.0 / static_cast<double>(s.n_initial());
  return {t, EmpiricalMeasure(s.species1_positions(t), w), EmpiricalMeasure(s.species2_positions(), w),
          s.terminal()};
}

// Advances `state` through t_end, sampling the empirical measures at each
// snapshot time after applying every event at or before it.
inline std::vector<PdmpSnapshot> pdmp_run(ParticleState& state, double t_end, std::span<const double> snap_times) {
  if (!std::is_sorted(snap_times.begin(), snap_times.end())) throw DomainError("snapshot times must be sorted");
  if (!snap_times.empty() && (snap_times.back() > t_end || snap_times.front() < state.time())) {
    throw DomainError("snapshot times must lie in [current time, t_end]");
  }
  std::vector<PdmpSnapshot> out;
  out.reserve(snap_times.size());
  for (double t : snap_times) {
    state.run_until(t);
    out.push_back(snapshot(state, t));
  }
  state.run_until(t_end);
  return out;
}

inline std::vector<PdmpSnapshot> pdmp_run(ParticleState&& state, double t_end, std::span<const double> snap_times) {
  ParticleState s = std::move(state);
  return pdmp_run(s, t_end, snap_times);
}

// L^n(t): removals up to time t divided by n.
inline double loss_count(const ParticleState& s, double t) {
  if (t > s.time() && !s.terminal() && s.next_event_time() && *s.next_event_time() <= t) {
    throw DomainError("loss queried past the simulated time");
  }
  const auto ev = s.events();
  const auto count =
      std::upper_bound(ev.begin(), ev.end(), t, [](double v, const EventRecord& e) { return v < e.time; }) -
      ev.begin();
  return static_cast<double>(count) / static_cast<double>(s.n_initial());
}

// CSV rows: event,time,position (position empty for the removal that found
// species 2 empty).
inline void write_event_log(std::ostream& os, const ParticleState& s) {
  os << "event,time,position\n";
  const auto ev = s.events();
  for (std::size_t i = 0; i < ev.size(); ++i) {
    os << i << ',' << csv::num(ev[i].time) << ',';
    if (ev[i].mutated) os << csv::num(ev[i].position);
    os << '\n';
  }
}

}  // namespace coarsen
