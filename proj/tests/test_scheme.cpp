#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <sstream>

#include "coarsen/initial_conditions.hpp"
#include "coarsen/kinetic.hpp"
#include "coarsen/scheme.hpp"

using namespace coarsen;

namespace {

constexpr double kEps = std::numeric_limits<double>::epsilon();

// Coarse grid so that every binned mass is exact in binary.
SchemeState uniform_init(double delta = 0.25) {
  const auto ic = uniform_halves(0.125);
  return scheme_init(ic.f1, ic.f2, delta);
}

}  // namespace

TEST(SchemeInit, UniformHalves) {
  const auto s = uniform_init();
  ASSERT_EQ(s.mu1.size(), 4u);
  for (std::size_t l = 0; l < 4; ++l) {
    EXPECT_NEAR(s.mu1[l], 0.125, 1e-15);
    EXPECT_NEAR(s.mu2[l], 0.125, 1e-15);
  }
  EXPECT_NEAR(s.n2(), 0.5, 1e-15);
  EXPECT_EQ(s.k, 0u);
}

TEST(SchemeInit, TentBinsCarryHalfTheSpeciesMass) {
  // Each tent species has mass 1/2, split evenly between the two bins.
  const auto ic = tent(1e-3);
  const auto s = scheme_init(ic.f1, ic.f2, 0.5);
  for (const auto* m : {&s.mu1, &s.mu2}) {
    ASSERT_EQ(m->size(), 2u);
    EXPECT_NEAR((*m)[0], 0.25, 1e-14);
    EXPECT_NEAR((*m)[1], 0.25, 1e-14);
  }
}

TEST(SchemeInit, Errors) {
  const auto f = GridDensity::sample(1e-3, 1.0, [](double) { return 1.0; });
  const auto zero = GridDensity::sample(1e-3, 1.0, [](double) { return 0.0; });
  EXPECT_THROW(scheme_init(f, zero, 0.25), DegenerateError);
  const auto half = GridDensity::sample(1e-3, 1.0, [](double) { return 0.4; });
  EXPECT_THROW(scheme_init(half, half, 0.25), ConfigError);
  const auto ic = uniform_halves(1e-3);
  EXPECT_THROW(scheme_init(ic.f1, ic.f2, 0.3), ConfigError);
}

TEST(SchemeStep, HandComputedUniformStep) {
  const auto s = scheme_step(uniform_init());
  ASSERT_EQ(s.loss_history.size(), 1u);
  EXPECT_NEAR(s.loss_history[0], 0.125, 1e-15);
  const double mu1[] = {0.15625, 0.15625, 0.15625, 0.03125};
  for (std::size_t l = 0; l < 4; ++l) {
    EXPECT_NEAR(s.mu1[l], mu1[l], 1e-15);
    EXPECT_NEAR(s.mu2[l], 0.09375, 1e-15);
  }
  EXPECT_NEAR(s.n2(), 0.375, 1e-15);
  EXPECT_EQ(s.k, 1u);
}

TEST(SchemeStep, ZeroLossIsPureShift) {
  const BinMeasure mu1(0.25, {0.0, 0.2, 0.1, 0.05});
  const BinMeasure mu2(0.25, {0.3, 0.1, 0.15, 0.1});
  SchemeState s{0.25, 0, mu1, mu2, mu1.mass(), mu2.mass(), 0.0, {}};
  const auto next = scheme_step(s);
  EXPECT_EQ(next.mu1[0], 0.2);
  EXPECT_EQ(next.mu1[1], 0.1);
  EXPECT_EQ(next.mu1[2], 0.05);
  EXPECT_EQ(next.mu1[3], 0.0);
  for (std::size_t l = 0; l < 4; ++l) EXPECT_EQ(next.mu2[l], mu2[l]);
}

TEST(SchemeStep, MassBookkeeping) {
  auto s = uniform_init(0.125);
  for (int k = 0; k < 4; ++k) {
    const auto next = scheme_step(s);
    EXPECT_NEAR(next.mu1.mass(), s.mu1.mass(), 4 * kEps);
    EXPECT_NEAR(next.mu2.mass(), next.n2(), 4 * kEps);
    s = next;
  }
}

TEST(SchemeStep, ExhaustionIsHorizonError) {
  const BinMeasure mu1(0.5, {0.6, 0.0});
  const BinMeasure mu2(0.5, {0.2, 0.2});
  SchemeState s{0.5, 0, mu1, mu2, mu1.mass(), mu2.mass(), 0.0, {}};
  EXPECT_THROW(scheme_step(s), HorizonError);
}

TEST(SchemeStep, PreviousStateUntouched) {
  const auto s0 = uniform_init();
  const auto copy = s0;
  (void)scheme_step(s0);
  for (std::size_t l = 0; l < 4; ++l) EXPECT_EQ(s0.mu1[l], copy.mu1[l]);
  EXPECT_TRUE(s0.loss_history.empty());
}

TEST(SchemeRun, SnapshotCounts) {
  EXPECT_EQ(scheme_run(uniform_init(), 0.1).size(), 1u);
  const auto run = scheme_run(uniform_init(), 0.5);
  ASSERT_EQ(run.size(), 3u);
  for (std::size_t k = 0; k < 3; ++k) EXPECT_EQ(run[k].k, k);
}

TEST(SchemeRun, N2StrictlyDecreasingWhileLossPositive) {
  const auto run = scheme_run(uniform_init(), 0.5);
  // Hand iteration: 0.5 -> 0.375 -> 0.375 - 0.15625 = 0.21875.
  EXPECT_NEAR(run[1].n2(), 0.375, 1e-15);
  EXPECT_NEAR(run[2].n2(), 0.21875, 1e-15);
  for (std::size_t k = 1; k < run.size(); ++k) EXPECT_LT(run[k].n2(), run[k - 1].n2());
}

TEST(SchemeRun, ExhaustionPropagates) {
  EXPECT_THROW(scheme_run(uniform_init(), 1.0), HorizonError);
}

TEST(SchemeAt, PiecewiseConstantInTime) {
  const auto run = scheme_run(uniform_init(), 0.5);
  EXPECT_EQ(scheme_at(run, 0.3).k, 1u);
  EXPECT_EQ(scheme_at(run, 0.25).k, 1u);
  EXPECT_EQ(scheme_at(run, 0.4999).k, 1u);
  EXPECT_EQ(scheme_at(run, 0.5).k, 2u);
  EXPECT_THROW(scheme_at(run, 0.8), HorizonError);
}

TEST(SchemeInvariants, TentRun) {
  const auto ic = tent(1e-3);
  const auto run = scheme_run(scheme_init(ic.f1, ic.f2, 0.025), 0.6);
  const auto& first = run.front();
  for (const auto& s : run) {
    EXPECT_LE(std::abs(s.mu1.mass() - first.n1), 10 * kEps * first.n1);
    double sum = 0.0;
    for (double l : s.loss_history) sum += l;
    EXPECT_EQ(s.n2(), first.n2() - sum);
    const double c = s.mu2[10] / first.mu2[10];
    for (std::size_t l = 0; l < s.mu2.size(); ++l) {
      if (first.mu2[l] > 0.0) {
        EXPECT_LE(std::abs(s.mu2[l] / first.mu2[l] - c), 100 * kEps * c);
      }
    }
  }
}

TEST(SchemeInvariants, BinMassesMatchKineticAtSecondOrder) {
  // sup_l |int_{I_l} f_j(t) - mu_j(t, I_l)| shrinks like delta^2 on the tent.
  const double h = 6.25e-4;
  const auto ic = tent(h);
  KineticOptions o;
  o.t_max = 0.4;
  const auto sol = solve_kinetic(ic.f1, ic.f2, o);
  std::vector<double> errors;
  for (double delta : {0.05, 0.025, 0.0125}) {
    const auto run = scheme_run(scheme_init(ic.f1, ic.f2, delta), 0.4);
    double worst = 0.0;
    for (const auto& s : run) {
      const double t = std::round(s.time() / h) * h;
      const auto b1 = bin_from_density(f1_eval(sol, t), delta);
      const auto b2 = bin_from_density(f2_eval(sol, t), delta);
      for (std::size_t l = 0; l < s.mu1.size() && l < b1.size(); ++l) {
        worst = std::max({worst, std::abs(b1[l] - s.mu1[l]), std::abs(b2[l] - s.mu2[l])});
      }
    }
    errors.push_back(worst);
  }
  for (std::size_t i = 1; i < errors.size(); ++i) {
    const double ratio = errors[i - 1] / errors[i];
    EXPECT_GE(ratio, 3.0) << "delta step " << i;
    EXPECT_LE(ratio, 5.0) << "delta step " << i;
  }
}

TEST(SchemeSnapshots, CsvLayout) {
  std::ostringstream os;
  write_scheme_snapshots(os, scheme_run(uniform_init(), 0.25));
  EXPECT_EQ(os.str(),
            "t,bin,mu1,mu2,n2\n"
            "0,0,0.125,0.125,0.5\n0,1,0.125,0.125,0.5\n0,2,0.125,0.125,0.5\n0,3,0.125,0.125,0.5\n"
            "0.25,0,0.15625,0.09375,0.375\n0.25,1,0.15625,0.09375,0.375\n0.25,2,0.15625,0.09375,0.375\n"
            "0.25,3,0.03125,0.09375,0.375\n");
}
