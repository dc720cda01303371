#pragma once

// Named initial conditions (f1bar, f2bar) on a grid of step h, plus a CSV
// loader for user-supplied densities.

#include <cmath>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "coarsen/errors.hpp"
#include "coarsen/measures.hpp"

namespace coarsen {

struct InitialCondition {
  std::string name;
  GridDensity f1;
  GridDensity f2;

  double support_bound() const { return std::max(f1.support_bound(), f2.support_bound()); }
};

namespace detail {

// Symmetric tent on [lo, hi] with the given peak.
inline double bump(double x, double lo, double hi, double peak) {
  if (x <= lo || x >= hi) return 0.0;
  const double mid = 0.5 * (lo + hi);
  return x <= mid ? peak * (x - lo) / (mid - lo) : peak * (hi - x) / (hi - mid);
}

}  // namespace detail

// f1bar = f2bar = 1/2 on [0, 1].
inline InitialCondition uniform_halves(double h) {
  auto f = GridDensity::sample(h, 1.0, [](double) { return 0.5; });
  return {"uniform_halves", f, f};
}

// f1bar = f2bar = 2x on [0, 1/2], 2(1 - x) on [1/2, 1].
inline InitialCondition tent(double h) {
  if (!detail::is_integer_multiple(0.5, h)) throw ConfigError("tent IC needs h dividing 1/2");
  auto f = GridDensity::sample(h, 1.0, [](double x) { return detail::bump(x, 0.0, 1.0, 1.0); });
  return {"tent", f, f};
}

// Narrow tents of mass 1/2: species 1 on [0.4, 0.5], species 2 on [0.2, 0.3].
// With n = 2 the quantile placement puts one particle at 0.5 (species 1) and
// one at 0.3 (species 2), which makes the whole trajectory deterministic.
inline InitialCondition two_particle(double h) {
  if (!detail::is_integer_multiple(0.05, h)) throw ConfigError("two_particle IC needs h dividing 0.05");
  return {"two_particle", GridDensity::sample(h, 0.5, [](double x) { return detail::bump(x, 0.4, 0.5, 10.0); }),
          GridDensity::sample(h, 0.5, [](double x) { return detail::bump(x, 0.2, 0.3, 10.0); })};
}

// CSV with header x,f1,f2 and rows at x = i*h, i = 0..N.
inline InitialCondition load_initial_condition_csv(const std::string& path, double h) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open initial condition file '" + path + "'");
  std::string line;
  if (!std::getline(in, line)) throw ConfigError("empty initial condition file '" + path + "'");
  std::vector<double> f1;
  std::vector<double> f2;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ss(line);
    double x = 0.0;
    double a = 0.0;
    double b = 0.0;
    char c1 = 0;
    char c2 = 0;
    if (!(ss >> x >> c1 >> a >> c2 >> b) || c1 != ',' || c2 != ',') {
      throw ConfigError(path + ": malformed row " + std::to_string(row + 2));
    }
    if (std::abs(x - static_cast<double>(row) * h) > 1e-9 * std::max(1.0, x)) {
      throw ConfigError(path + ": row " + std::to_string(row + 2) + " is not on the grid of step grid_step");
    }
    f1.push_back(a);
    f2.push_back(b);
    ++row;
  }
  if (row < 2) throw ConfigError(path + ": need at least two grid rows");
  return {"custom_file", GridDensity(h, std::move(f1)), GridDensity(h, std::move(f2))};
}

inline InitialCondition make_initial_condition(const std::string& name, double h, const std::string& path = {}) {
  if (name == "uniform_halves") return uniform_halves(h);
  if (name == "tent") return tent(h);
  if (name == "two_particle") return two_particle(h);
  if (name == "custom_file") {
    if (path.empty()) throw ConfigError("custom_file IC needs custom_ic_path");
    return load_initial_condition_csv(path, h);
  }
  throw ConfigError("unknown initial condition '" + name + "'");
}

}  // namespace coarsen
