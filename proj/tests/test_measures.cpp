#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <vector>

#include "coarsen/initial_conditions.hpp"
#include "coarsen/measures.hpp"
#include "oracles.hpp"

using namespace coarsen;

namespace {

GridDensity constant(double value, double h = 1e-3, double support = 1.0) {
  return GridDensity::sample(h, support, [value](double) { return value; });
}

GridDensity random_piecewise_linear(std::mt19937_64& gen, std::size_t cells, double h, double floor = 0.0) {
  std::uniform_real_distribution<double> u(floor, 1.0);
  std::vector<double> v(cells + 1);
  for (double& x : v) x = u(gen);
  return GridDensity(h, std::move(v));
}

}  // namespace

TEST(Cumulative, UniformHalfway) { EXPECT_NEAR(cumulative_eval(constant(1.0), 0.5), 0.5, 1e-15); }

TEST(Cumulative, ZeroAtOrigin) {
  EXPECT_EQ(cumulative_eval(constant(1.0), 0.0), 0.0);
  EXPECT_EQ(cumulative_eval(BinMeasure(0.25, {0.25, 0.25, 0.25, 0.25}), 0.0), 0.0);
}

TEST(Cumulative, EmpiricalStepIsRightContinuous) {
  const EmpiricalMeasure m({0.25, 0.75}, 0.5);
  EXPECT_EQ(cumulative_eval(m, 0.25), 0.5);
  EXPECT_EQ(cumulative_eval(m, std::nextafter(0.25, 0.0)), 0.0);
}

TEST(Cumulative, NegativeArgumentIsDomainError) {
  EXPECT_THROW(cumulative_eval(constant(1.0), -0.1), DomainError);
  EXPECT_THROW(cumulative_eval(BinMeasure(0.5, {1.0}), -1e-9), DomainError);
  EXPECT_THROW(cumulative_eval(EmpiricalMeasure({0.1}, 1.0), -1.0), DomainError);
}

TEST(Cumulative, MonotoneAndReachesMass) {
  std::mt19937_64 gen(3);
  for (int trial = 0; trial < 20; ++trial) {
    const auto f = random_piecewise_linear(gen, 40, 0.025);
    double prev = 0.0;
    for (int i = 0; i <= 1000; ++i) {
      const double c = f.cumulative(i * 1e-3);
      ASSERT_GE(c, prev);
      prev = c;
    }
    EXPECT_DOUBLE_EQ(f.cumulative(f.support_bound()), f.mass());
  }
}

TEST(GridDensity, RejectsNegativeValues) { EXPECT_THROW(GridDensity(0.1, {0.0, -1.0}), DomainError); }

TEST(KsDistance, Identity) {
  const auto f = tent(1e-3).f1;
  EXPECT_EQ(ks_distance(f, f), 0.0);
  const EmpiricalMeasure e({0.1, 0.2, 0.2}, 0.25);
  EXPECT_EQ(ks_distance(e, e), 0.0);
}

TEST(KsDistance, EmpiricalVersusUniform) {
  const EmpiricalMeasure e({0.25, 0.75}, 0.5);
  const auto u = constant(1.0);
  EXPECT_NEAR(ks_distance(e, u), 0.25, 1e-12);
  // Brute force on a 1e-4 grid: the left limit at 0.25 is hit at 0.25 - 1e-4.
  const double brute =
      oracle::ks_brute([&](double x) { return e.cumulative(x); }, [&](double x) { return u.cumulative(x); }, 1.0);
  EXPECT_NEAR(brute, 0.25, 1e-4 + 1e-12);
  EXPECT_LE(brute, ks_distance(e, u) + 1e-12);
}

TEST(KsDistance, DisjointPointMasses) {
  EXPECT_EQ(ks_distance(EmpiricalMeasure({0.5}, 1.0), EmpiricalMeasure({0.7}, 1.0)), 1.0);
}

TEST(KsDistance, AgreesWithBruteForceOnMixedMeasures) {
  std::mt19937_64 gen(17);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 25; ++trial) {
    const auto f = random_piecewise_linear(gen, 8, 0.125);
    std::vector<double> masses(5);
    for (double& m : masses) m = u(gen);
    const BinMeasure b(0.2, masses);
    std::vector<double> pts(6);
    for (double& p : pts) p = std::round(u(gen) * 1e4) / 1e4;
    const EmpiricalMeasure e(pts, 0.1);
    auto F = [&](double x) { return f.cumulative(x); };
    auto B = [&](double x) { return b.cumulative(x); };
    auto E = [&](double x) { return e.cumulative(x); };
    // Exact sup dominates any sample; the densities vary by at most
    // max density * grid spacing between samples.
    const double slack = 1e-4 * (f.max_value() + b.max_mass() / 0.2) + 1e-12;
    EXPECT_NEAR(ks_distance(f, b), oracle::ks_brute(F, B, 1.0), slack);
    EXPECT_GE(ks_distance(f, b) + 1e-12, oracle::ks_brute(F, B, 1.0));
    EXPECT_GE(ks_distance(f, e) + 1e-12, oracle::ks_brute(F, E, 1.0));
    EXPECT_GE(ks_distance(b, e) + 1e-12, oracle::ks_brute(B, E, 1.0));
    // F is continuous and E is constant between atoms, so the exact sup sits
    // at an atom (either side of its jump) or at the right end.
    double exact = std::abs(F(1.0) - E(1.0));
    for (double p : pts) {
      const double below = p > 0.0 ? E(std::nextafter(p, 0.0)) : 0.0;
      exact = std::max({exact, std::abs(F(p) - below), std::abs(F(p) - E(p))});
    }
    EXPECT_NEAR(ks_distance(f, e), exact, 1e-12);
  }
}

TEST(KsDistance, InteriorExtremumOfCrossingDensities) {
  // F(x) = x^2 against G(x) = x on [0, 1]: sup |x - x^2| = 1/4 at x = 1/2,
  // which is not a knot of either profile when both use a single cell.
  const GridDensity rising(1.0, {0.0, 2.0});
  const GridDensity flat(1.0, {1.0, 1.0});
  EXPECT_NEAR(ks_distance(rising, flat), 0.25, 1e-15);
}

TEST(PairDistance, Examples) {
  const EmpiricalMeasure e({0.25, 0.75}, 0.5);
  const auto u = constant(1.0);
  EXPECT_EQ(pair_distance(u, u, u, u), 0.0);
  EXPECT_NEAR(pair_distance(e, u, u, u), 0.25, 1e-12);
  const EmpiricalMeasure a({0.5}, 1.0);
  const EmpiricalMeasure b({0.7}, 1.0);
  EXPECT_EQ(pair_distance(a, a, b, b), 2.0);
}

TEST(Modulus, ConstantDensitiesOnlyMoveAtEdges) {
  const auto u = constant(0.5);
  // Jump of 1/2 at the support edge for each species.
  EXPECT_NEAR(modulus_of_continuity(u, u, 0.1), 1.0, 1e-15);
  const auto f = GridDensity::sample(1e-3, 1.0, [](double x) { return x > 0.3 && x < 0.7 ? 1.0 : 0.0; });
  EXPECT_NEAR(modulus_of_continuity(f, GridDensity(1e-3, std::vector<double>(1001, 0.0)), 0.05), 1.0, 1e-12);
}

TEST(Modulus, TentMatchesSlopeTimesDelta) {
  const auto ic = tent(1e-3);
  EXPECT_NEAR(modulus_of_continuity(ic.f1, ic.f2, 0.1), 0.4, 1e-12);
  EXPECT_NEAR(oracle::modulus_brute(ic.f1, ic.f2, 0.1), 0.4, 1e-9);
}

TEST(Modulus, MatchesBruteForceOnFinerGrid) {
  std::mt19937_64 gen(5);
  for (int trial = 0; trial < 10; ++trial) {
    const auto f1 = random_piecewise_linear(gen, 20, 0.05);
    const auto f2 = random_piecewise_linear(gen, 20, 0.05);
    for (double delta : {0.05, 0.1, 0.25}) {
      EXPECT_NEAR(modulus_of_continuity(f1, f2, delta), oracle::modulus_brute(f1, f2, delta), 1e-9);
    }
  }
}

TEST(Modulus, LipschitzBound) {
  const auto ic = tent(1e-3);
  for (double delta : {0.001, 0.01, 0.2}) EXPECT_LE(modulus_of_continuity(ic.f1, ic.f2, delta), 2 * 2 * delta + 1e-12);
}

TEST(Modulus, RejectsNonPositiveDelta) {
  const auto u = constant(0.5);
  EXPECT_THROW(modulus_of_continuity(u, u, 0.0), DomainError);
  EXPECT_THROW(modulus_of_continuity(u, u, -0.1), DomainError);
}

TEST(BinFromDensity, Examples) {
  const auto b = bin_from_density(constant(1.0), 0.25);
  ASSERT_EQ(b.size(), 4u);
  for (double m : b.masses()) EXPECT_NEAR(m, 0.25, 1e-15);
  const auto z = bin_from_density(constant(0.0), 0.25);
  for (double m : z.masses()) EXPECT_EQ(m, 0.0);
  const auto t = bin_from_density(tent(1e-3).f1, 0.5);
  ASSERT_EQ(t.size(), 2u);
  EXPECT_NEAR(t[0], 0.25, 1e-14);
  EXPECT_NEAR(t[1], 0.25, 1e-14);
}

TEST(BinFromDensity, NonMultipleIsConfigError) { EXPECT_THROW(bin_from_density(constant(1.0), 0.0015), ConfigError); }

TEST(BinFromDensity, PreservesMass) {
  std::mt19937_64 gen(9);
  for (int trial = 0; trial < 20; ++trial) {
    const auto f = random_piecewise_linear(gen, 1000, 1e-3);
    const auto b = bin_from_density(f, 0.02);
    EXPECT_LE(std::abs(b.mass() - f.mass()), 10 * std::numeric_limits<double>::epsilon() * 1001);
  }
}

TEST(Quantile, Examples) {
  EXPECT_NEAR(quantile(constant(1.0), 0.5), 0.5, 1e-12);
  EXPECT_EQ(quantile(constant(1.0), 0.0), 0.0);
  EXPECT_NEAR(quantile(tent(1e-3).f1, 0.25), 0.5, 1e-12);
  // F(x) = x^2 on the rising half.
  EXPECT_NEAR(quantile(tent(1e-3).f1, 0.09), 0.3, 1e-12);
}

TEST(Quantile, OutOfRangeIsDomainError) {
  EXPECT_THROW(quantile(constant(1.0), -0.1), DomainError);
  EXPECT_THROW(quantile(constant(1.0), 1.5), DomainError);
}

TEST(Quantile, InvertsCumulativeOnIncreasingStretches) {
  std::mt19937_64 gen(21);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 20; ++trial) {
    const auto f = random_piecewise_linear(gen, 50, 0.02, 0.05);  // strictly positive density
    for (int k = 0; k < 50; ++k) {
      const double x = u(gen);
      EXPECT_NEAR(quantile(f, f.cumulative(x)), x, 1e-9);
    }
  }
}

TEST(Quantile, SatisfiesInfimumDefinition) {
  const auto f = tent(1e-3).f1;  // mass 1/2
  for (double q : {0.005, 0.1, 0.25, 0.385, 0.495}) {
    const double x = quantile(f, q);
    EXPECT_GE(f.cumulative(x), q - 1e-12);
    EXPECT_LT(f.cumulative(std::max(0.0, x - 1e-6)), q);
  }
}
