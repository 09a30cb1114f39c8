#include <gtest/gtest.h>

#include <random>

#include "hjlab/environment.hpp"
#include "hjlab/solver.hpp"

using namespace hjlab;

namespace {

SolveResult run(const Environment& env, double h, double T) { return solve(env, GridSpec::isolated(h, T)); }

}  // namespace

TEST(GridSpec, ValidationRules) {
  EXPECT_NO_THROW(GridSpec::isolated(0.1, 16).validate());
  EXPECT_THROW((GridSpec{0.1, 36, 16, 0.06}).validate(), std::invalid_argument);  // CFL
  EXPECT_THROW((GridSpec{0.1, 20, 16, 0.05}).validate(), std::invalid_argument);  // isolation
  EXPECT_THROW((GridSpec{0.1, 36.05, 16, 0.05}).validate(), std::invalid_argument);
  EXPECT_THROW((GridSpec{0.1, 36, 16.01, 0.05}).validate(), std::invalid_argument);
  EXPECT_NO_THROW((GridSpec{0.1, 32.2, 16, 0.05}).validate());
  const GridSpec g = GridSpec::isolated(0.4, 16);
  EXPECT_EQ(g.nodes(), 2 * 90 + 1);
  EXPECT_EQ(g.coordinate(90), 0.0);
}

TEST(LfFlux, ZeroAndConsistency) {
  EXPECT_EQ(lf_flux(0, 0, 0, 0, 1.3), -1.3);
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-20.0, 20.0);
  for (int i = 0; i < 1000; ++i) {
    const double p1 = u(rng), p2 = u(rng);
    EXPECT_EQ(lf_flux(p1, p1, p2, p2, 1.5), hamiltonian(Momentum{p1, p2}, 1.5));
  }
}

TEST(LfFlux, Monotonicity) {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(-20.0, 20.0), d(0.0, 3.0);
  for (int i = 0; i < 10000; ++i) {
    const double w = u(rng), e = u(rng), s = u(rng), n = u(rng), c = 1.5, delta = d(rng);
    const double f = lf_flux(w, e, s, n, c);
    ASSERT_LE(lf_flux(w, e + delta, s, n, c), f + 1e-12);
    ASSERT_LE(lf_flux(w, e, s, n + delta, c), f + 1e-12);
    ASSERT_GE(lf_flux(w + delta, e, s, n, c), f - 1e-12);
    ASSERT_GE(lf_flux(w, e, s + delta, n, c), f - 1e-12);
  }
}

TEST(Solve, ConstantFieldIsExact) {
  const GridSpec grid = GridSpec::isolated(0.2, 16);
  SolveOptions opt;
  for (double t = 0.0; t <= 16.0; t += 2.0) opt.probe_times.push_back(t);
  const SolveResult one = solve(Environment::planted({}), grid, opt);
  ASSERT_EQ(one.probes.size(), 9u);
  for (const ProbeRow& r : one.probes) EXPECT_NEAR(r.u00, r.t, 1e-12 * std::max(1.0, r.t));
  const SolveResult two = solve(ConstantWeight{2.0}, grid, opt);
  for (const ProbeRow& r : two.probes) EXPECT_NEAR(r.u00, 2.0 * r.t, 1e-12 * std::max(1.0, r.t));
  EXPECT_NEAR(probe_origin(two.field), 32.0, 32e-12);
}

TEST(Solve, ProbeAtTimeZero) {
  const GridSpec grid = GridSpec::isolated(0.4, 0.0);
  const SolveResult r = solve(ConstantWeight{2.0}, grid);
  EXPECT_EQ(probe_origin(r.field), 0.0);
  const SolveResult one = solve(ConstantWeight{2.0}, GridSpec::isolated(0.2, 1.0));
  EXPECT_NEAR(probe_origin(one.field), 2.0, 1e-12);
  EXPECT_EQ(one.field.sample(Point{0, 0}), probe_origin(one.field));
}

TEST(Solve, PlantedGreenAndRedLimits) {
  // c is identically 1 around a lone green, so u = t exactly.
  const Environment green = Environment::planted({Segment{Color::green, 2, 0, 0}});
  const Environment red = Environment::planted({Segment{Color::red, 2, 0, 0}});
  for (double h : {0.4, 0.2}) {
    EXPECT_NEAR(probe_origin(run(green, h, 16).field) / 16.0, 1.0, 1e-12);
    const double ur = probe_origin(run(red, h, 16).field) / 16.0;
    EXPECT_GT(ur, 1.5);
    EXPECT_LE(ur, 2.0 + 1e-12);
  }
}

TEST(Solve, RejectsBadGrids) {
  EXPECT_THROW(solve(ConstantWeight{}, GridSpec{0.1, 10, 16, 0.05}), std::invalid_argument);
  SolveOptions opt;
  opt.probe_times = {0.07};
  EXPECT_THROW(solve(ConstantWeight{}, GridSpec::isolated(0.2, 1.0), opt), std::invalid_argument);
}

TEST(Solve, BoundsAtInteriorNodes) {
  const Environment env = Environment::random(Seed128{3, 4}, 6);
  const SolveResult r = run(env, 0.2, 8.0);
  const double t = r.field.time;
  for (int j = 1; j + 1 < r.field.n; ++j) {
    for (int i = 1; i + 1 < r.field.n; ++i) {
      ASSERT_GE(r.field.at(i, j), t - 1e-12);
      ASSERT_LE(r.field.at(i, j), 2.0 * t + 1e-12);
    }
  }
}

TEST(Solve, DiscreteComparisonOnRandomPairs) {
  const Environment env = Environment::planted({Segment{Color::red, 1, 0, 0}, Segment{Color::green, 1, 2, 3}});
  const GridSpec grid = GridSpec::isolated(0.4, 2.0);
  const int n = grid.nodes();
  const std::size_t size = static_cast<std::size_t>(n) * n;
  const LocalField field(env, Rect{-grid.R, grid.R, -grid.R, grid.R});
  const auto weights = sample_weights(field, grid);
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> u(-3.0, 3.0), gap(0.0, 1.0);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> lo(size), hi(size);
    for (std::size_t i = 0; i < size; ++i) {
      lo[i] = u(rng);
      hi[i] = lo[i] + gap(rng);
    }
    SolveOptions a, b;
    a.initial = lo;
    b.initial = hi;
    const auto ua = solve_weights(weights, grid, a).field.values;
    const auto ub = solve_weights(weights, grid, b).field.values;
    for (std::size_t i = 0; i < size; ++i) ASSERT_LE(ua[i], ub[i] + 1e-12);
  }
}

TEST(Solve, EnvironmentMonotonicity) {
  const Environment env = Environment::planted({Segment{Color::red, 1, 1, 0}, Segment{Color::green, 2, 0, 2}});
  const GridSpec grid = GridSpec::isolated(0.2, 4.0);
  const LocalField field(env, Rect{-grid.R, grid.R, -grid.R, grid.R});
  const auto lo = solve(field, grid).field.values;
  const auto hi = solve(ShiftedWeight<LocalField>{field, 0.25}, grid).field.values;
  for (std::size_t i = 0; i < lo.size(); ++i) ASSERT_LE(lo[i], hi[i]);
}

TEST(Solve, MirrorSymmetry) {
  const Environment env = Environment::planted({Segment{Color::red, 1, 2, 1}, Segment{Color::green, 1, -1, 3}});
  const Environment mirrored = Environment::planted({Segment{Color::red, 1, -2, 1}, Segment{Color::green, 1, 1, 3}});
  const auto a = run(env, 0.2, 4.0).field;
  const auto b = run(mirrored, 0.2, 4.0).field;
  for (int j = 0; j < a.n; ++j) {
    for (int i = 0; i < a.n; ++i) ASSERT_EQ(a.at(i, j), b.at(a.n - 1 - i, j));
  }
}

TEST(Solve, ThreadScheduleIndependence) {
  const Environment env = Environment::random(Seed128{8, 9}, 5);
  const GridSpec grid = GridSpec::isolated(0.2, 4.0);
  SolveOptions one, four;
  four.threads = 4;
  EXPECT_EQ(solve(env, grid, one).field.values, solve(env, grid, four).field.values);
}

TEST(Solve, ProbeAtOffGridPoint) {
  SolveOptions opt;
  opt.probe_times = {2.0};
  opt.probe = Point{0.05, -0.1};
  const SolveResult r = solve(ConstantWeight{2.0}, GridSpec::isolated(0.2, 2.0), opt);
  ASSERT_EQ(r.probes.size(), 1u);
  EXPECT_NEAR(r.probes[0].u00, 4.0, 1e-12);
  EXPECT_NEAR(r.probes[0].umin, 4.0, 1e-12);
  EXPECT_NEAR(r.probes[0].umax, 4.0, 1e-12);
}

TEST(ScalingCheck, UnitEpsIsIdentity) {
  const Environment env = Environment::planted({Segment{Color::red, 1, 0, 0}});
  const ScalingResult r = scaling_check(env, 1.0, 2.0, GridSpec::isolated(0.2, 2.0));
  EXPECT_EQ(r.direct, r.rescaled);
}

TEST(ScalingCheck, ConstantAndPlantedQuarter) {
  const GridSpec grid = GridSpec::isolated(0.1, 4.0);
  const ScalingResult c = scaling_check(ConstantWeight{1.5}, 0.25, 1.0, grid);
  EXPECT_NEAR(c.direct, 1.5, 1e-12);
  EXPECT_NEAR(c.rescaled, 1.5, 1e-12);
  const Environment red = Environment::planted({Segment{Color::red, 2, 0, 0}});
  const ScalingResult r = scaling_check(red, 0.25, 1.0, grid);
  EXPECT_LE(std::abs(r.direct - r.rescaled), 1e-10);
  EXPECT_THROW(scaling_check(red, 0.25, 1.0, GridSpec::isolated(0.1, 3.0)), std::invalid_argument);
}
