#include <gtest/gtest.h>

#include <algorithm>
#include <random>

#include "hjlab/environment.hpp"
#include "hjlab/raster_oracle.hpp"

using namespace hjlab;

namespace {

// Several crossings of every kind inside [-12, 12]^2.
std::vector<Segment> crossing_rich() {
  return {
      Segment{Color::green, 1, 0, 0},   Segment{Color::red, 2, 0, 0},    Segment{Color::green, 2, 3, 4},
      Segment{Color::red, 1, 5, 2},     Segment{Color::red, 1, -6, -3},  Segment{Color::green, 1, -4, -3},
      Segment{Color::red, 3, 8, -20},   Segment{Color::green, 1, 2, -7}, Segment{Color::red, 2, -9, 10},
      Segment{Color::green, 3, -50, 9}, Segment{Color::red, 1, 3, -5},   Segment{Color::green, 1, 20, 6},
  };
}

double worst_gap(const Environment& env, const PhaseOracle& oracle, const Rect& w, int n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> ux(w.x0, w.x1), uy(w.y0, w.y1);
  double worst = 0.0;
  for (int i = 0; i < n; ++i) {
    const Point p{ux(rng), uy(rng)};
    worst = std::max(worst, std::abs(env.eval_c(p) - oracle(p)));
  }
  return worst;
}

}  // namespace

TEST(PhaseOracle, ConstantRegion) {
  const Environment env = Environment::planted({});
  const PhaseOracle oracle(env, Rect{-5, 5, -5, 5}, 0.1);
  std::size_t nx = 0, ny = 0;
  for (double v : oracle.raster(nx, ny)) EXPECT_EQ(v, 1.0);
  EXPECT_EQ(nx, 101u);
  EXPECT_EQ(ny, 101u);
}

TEST(PhaseOracle, AgreesWithEvalCOnPlantedCrossings) {
  const Environment env = Environment::planted(crossing_rich());
  const Rect w{-12, 12, -12, 12};
  const double delta = 0.05;
  const PhaseOracle oracle(env, w, delta);
  EXPECT_LE(worst_gap(env, oracle, w, 10000, 1), 2.0 * delta);
}

TEST(PhaseOracle, AgreesWithEvalCOnRandomField) {
  const Environment env = Environment::random(Seed128{0xc0ffee, 0x1}, 5);
  const Rect w{-25, 25, -25, 25};
  const double delta = 0.05;
  const PhaseOracle oracle(env, w, delta);
  EXPECT_LE(worst_gap(env, oracle, w, 10000, 2), 2.0 * delta);
}

TEST(PhaseOracle, ExactAtLatticePoints) {
  // Integer points of every segment are sampled exactly, so lattice queries match eval_c.
  const Environment env = Environment::planted(crossing_rich());
  const PhaseOracle oracle(env, Rect{-10, 10, -10, 10}, 0.25);
  for (int x = -10; x <= 10; ++x) {
    for (int y = -10; y <= 10; ++y) {
      const Point p{static_cast<double>(x), static_cast<double>(y)};
      EXPECT_NEAR(oracle(p), env.eval_c(p), 1e-12) << x << "," << y;
    }
  }
}

TEST(PhaseOracle, IndependentOfManifestOrder) {
  auto segs = crossing_rich();
  const Rect w{-12, 12, -12, 12};
  std::size_t nx = 0, ny = 0;
  const auto reference = PhaseOracle(Environment::planted(segs), w, 0.1).raster(nx, ny);
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 3; ++trial) {
    std::shuffle(segs.begin(), segs.end(), rng);
    EXPECT_EQ(PhaseOracle(Environment::planted(segs), w, 0.1).raster(nx, ny), reference);
  }
}

TEST(PhaseOracle, MemoryGuardAndValidation) {
  const Environment env = Environment::planted({});
  EXPECT_THROW(PhaseOracle(env, Rect{-1, 1, -1, 1}, 0.0), std::invalid_argument);
  const PhaseOracle big(env, Rect{-1000, 1000, -1000, 1000}, 0.1);
  std::size_t nx = 0, ny = 0;
  EXPECT_THROW(big.raster(nx, ny), std::length_error);
}
