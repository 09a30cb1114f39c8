#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <thread>

#include "hjlab/environment.hpp"
#include "hjlab/stochastics.hpp"

using namespace hjlab;

namespace {

Environment planted(std::vector<Segment> s) { return Environment::planted(std::move(s)); }

const Segment kGreen1{Color::green, 1, 0, 0};
const Segment kRed2{Color::red, 2, 0, 0};

}  // namespace

TEST(SegmentsNear, EmptyPlantedField) {
  EXPECT_TRUE(planted({}).segments_near(Point{0, 0}, 100.0).empty());
}

TEST(SegmentsNear, DistanceCutoff) {
  const Environment env = planted({kGreen1});
  EXPECT_TRUE(env.segments_near(Point{25.0, 0.0}, 1.0).empty());
  ASSERT_EQ(env.segments_near(Point{20.5, 0.0}, 1.0).size(), 1u);
  EXPECT_THROW(env.segments_near(Point{}, -1.0), std::invalid_argument);
}

TEST(SegmentsNear, AgreesWithBruteForceOverBlocks) {
  const Environment env = Environment::random(Seed128{11, 12}, 3);
  const Point p{3.5, -7.25};
  const double radius = 6.0;
  std::vector<Segment> brute;
  for (int colour = 1; colour <= 2; ++colour) {
    for (int k = 1; k <= 3; ++k) {
      const std::int64_t T = scale_length(k);
      const std::int64_t reach = 5 * T + 10;
      for (std::int64_t bx = floor_div(-reach, T) - 1; bx <= floor_div(reach, T) + 1; ++bx) {
        for (std::int64_t by = floor_div(-reach, T) - 1; by <= floor_div(reach, T) + 1; ++by) {
          for (const auto& [l, m] : env.block_sites(static_cast<Color>(colour), k, bx, by)) {
            const Segment s{static_cast<Color>(colour), k, l, m};
            if (s.distance_to(p) <= radius) brute.push_back(s);
          }
        }
      }
    }
  }
  std::sort(brute.begin(), brute.end());
  EXPECT_EQ(env.segments_near(p, radius), brute);
}

TEST(BlockSites, RejectsScaleAboveTruncation) {
  const Environment env = Environment::random(Seed128{1, 1}, 2);
  EXPECT_THROW(env.block_sites(Color::green, 3, 0, 0), std::out_of_range);
  EXPECT_NO_THROW(env.block_sites(Color::green, 2, 0, 0));
}

TEST(BlockSites, SitesAreDistinctAndInsideBlock) {
  const Environment env = Environment::random(Seed128{5, 5}, 3);
  for (std::int64_t bx = -20; bx < 20; ++bx) {
    const auto sites = env.block_sites(Color::red, 1, bx, 3);
    for (std::size_t i = 0; i < sites.size(); ++i) {
      EXPECT_GE(sites[i].first, bx * 4);
      EXPECT_LT(sites[i].first, bx * 4 + 4);
      EXPECT_GE(sites[i].second, 12);
      EXPECT_LT(sites[i].second, 16);
      if (i) {
        EXPECT_LT(sites[i - 1], sites[i]);
      }
    }
    EXPECT_EQ(sites, env.block_sites(Color::red, 1, bx, 3));
  }
}

TEST(BlockSites, CountLawMeanAndVariance) {
  const Environment env = Environment::random(Seed128{0x5eed, 0x1}, 8);
  const std::size_t n = 100000;
  std::vector<double> counts(n);
  for (std::size_t b = 0; b < n; ++b) {
    counts[b] = static_cast<double>(env.block_sites(Color::green, 1, static_cast<std::int64_t>(b), -7).size());
  }
  const Moments m = sample_moments(counts);
  EXPECT_NEAR(m.mean, 1.0, 0.04);
  EXPECT_NEAR(m.variance, 15.0 / 16.0, 0.05 * 15.0 / 16.0);
}

TEST(BlockSites, LargeScaleMeanCount) {
  const Environment env = Environment::random(Seed128{0x5eed, 0x2}, 8);
  const std::size_t n = 20000;
  double sum = 0.0;
  for (std::size_t b = 0; b < n; ++b) {
    sum += static_cast<double>(env.block_sites(Color::red, 6, 3, static_cast<std::int64_t>(b)).size());
  }
  EXPECT_NEAR(sum / n, 1.0, 4.0 * std::sqrt(1.0 / n));
}

TEST(RedActivated, NoGreens) {
  const Environment env = planted({kRed2});
  for (double y = -80; y <= 80; y += 0.5) EXPECT_TRUE(env.red_activated(kRed2, y));
}

TEST(RedActivated, LargerGreenSuppresses) {
  const Segment red1{Color::red, 1, 0, 0};
  const Environment env = planted({red1, Segment{Color::green, 2, 0, 0}});
  EXPECT_FALSE(env.red_activated(red1, 0.0));
  EXPECT_FALSE(env.red_activated(red1, 0.99));
  EXPECT_TRUE(env.red_activated(red1, 1.0));
}

TEST(RedActivated, SmallerGreenDoesNotSuppress) {
  const Environment env = planted({kRed2, kGreen1});
  EXPECT_TRUE(env.red_activated(kRed2, 0.0));
}

TEST(RedActivated, StrictDistanceOne) {
  // Green ends at x = 20; a red at abscissa 21 sits exactly at distance 1.
  const Segment red{Color::red, 1, 21, 0};
  const Environment env = planted({red, kGreen1});
  EXPECT_TRUE(env.red_activated(red, 0.0));
  const Segment near{Color::red, 1, 20, 0};
  EXPECT_FALSE(planted({near, kGreen1}).red_activated(near, 0.0));
}

TEST(ActiveSet, IsolatedSegmentKeepsFullExtent) {
  const Environment env = planted({kGreen1});
  const ActiveSet as = env.active_set(kGreen1);
  ASSERT_EQ(as.kept.size(), 1u);
  EXPECT_EQ(as.kept[0], (Interval{-20.0, 20.0}));
  EXPECT_TRUE(as.crossing_points.empty());
}

TEST(ActiveSet, GreenCrossedByDominatingRed) {
  const Environment env = planted({kGreen1, kRed2});
  const ActiveSet as = env.active_set(kGreen1);
  ASSERT_EQ(as.kept.size(), 2u);
  EXPECT_EQ(as.kept[0], (Interval{-20.0, -1.0}));
  EXPECT_EQ(as.kept[1], (Interval{1.0, 20.0}));
  ASSERT_EQ(as.crossing_points.size(), 1u);
  EXPECT_EQ(as.crossing_points[0], 0.0);
}

TEST(ActiveSet, RedCutByEqualScaleGreen) {
  const Segment red{Color::red, 1, 0, 0};
  const Environment env = planted({red, Segment{Color::green, 1, 0, 3}});
  const ActiveSet as = env.active_set(red);
  ASSERT_EQ(as.kept.size(), 2u);
  EXPECT_EQ(as.kept[0], (Interval{-20.0, 2.0}));
  EXPECT_EQ(as.kept[1], (Interval{4.0, 20.0}));
}

TEST(ActiveSet, RedCutOnlyWithinUnitDistance) {
  // A scale-1 green on row 5 spans [-20, 20]; a red at abscissa 21 is at distance exactly 1.
  const Segment green{Color::green, 1, 0, 5};
  const Segment far{Color::red, 1, 21, 0};
  const ActiveSet untouched = planted({far, green}).active_set(far);
  ASSERT_EQ(untouched.kept.size(), 1u);
  const Segment touching{Color::red, 1, 20, 0};
  const ActiveSet cut = planted({touching, green}).active_set(touching);
  ASSERT_EQ(cut.kept.size(), 2u);
  EXPECT_EQ(cut.kept[0], (Interval{-20.0, 4.0}));
  EXPECT_EQ(cut.kept[1], (Interval{6.0, 20.0}));
}

TEST(ActiveSet, DominatingRedAtGreenEndpoint) {
  const Segment red{Color::red, 2, 20, 0};
  const Environment env = planted({kGreen1, red});
  const ActiveSet as = env.active_set(kGreen1);
  ASSERT_EQ(as.kept.size(), 1u);
  EXPECT_EQ(as.kept[0], (Interval{-20.0, 19.0}));
  ASSERT_EQ(as.crossing_points.size(), 1u);
  EXPECT_EQ(as.crossing_points[0], 20.0);
  EXPECT_EQ(env.eval_c(Point{20.0, 0.0}), 2.0);
  EXPECT_EQ(env.eval_c(Point{19.5, 0.0}), 1.5);
}

TEST(ActiveSet, DominatingRedBeyondEndHasNoEffect) {
  const Segment red{Color::red, 2, 21, 0};
  const ActiveSet as = planted({kGreen1, red}).active_set(kGreen1);
  ASSERT_EQ(as.kept.size(), 1u);
  EXPECT_EQ(as.kept[0], (Interval{-20.0, 20.0}));
  EXPECT_TRUE(as.crossing_points.empty());
}

TEST(Completeness, Examples) {
  EXPECT_TRUE(planted({kGreen1}).is_complete(kGreen1));
  const Environment crossed = planted({kGreen1, kRed2});
  EXPECT_FALSE(crossed.is_complete(kGreen1));
  EXPECT_TRUE(crossed.is_complete(kRed2));
}

TEST(Completeness, EqualScalesFavorGreen) {
  const Segment red{Color::red, 2, 0, 0};
  const Segment green{Color::green, 2, 0, 0};
  const Environment env = planted({red, green});
  EXPECT_TRUE(env.is_complete(green));
  EXPECT_FALSE(env.is_complete(red));
  EXPECT_EQ(env.eval_c(Point{0, 0}), 1.0);
}

TEST(EvalC, FarFromEverything) {
  EXPECT_EQ(planted({}).eval_c(Point{3.3, 4.4}), 1.0);
  EXPECT_EQ(planted({kGreen1}).eval_c(Point{0.0, 3.0}), 1.0);
}

TEST(EvalC, OnCompleteSegments) {
  EXPECT_EQ(planted({kGreen1}).eval_c(Point{7.25, 0.0}), 1.0);
  const Environment env = planted({kRed2});
  EXPECT_EQ(env.eval_c(Point{0.0, 33.3}), 2.0);
  EXPECT_EQ(env.eval_c(Point{0.5, 10.0}), 1.5);
  EXPECT_EQ(env.eval_c(Point{0.0, 81.0}), 1.0);
  EXPECT_NEAR(env.eval_c(Point{0.3, 80.4}), 1.5, 1e-12);
}

TEST(EvalC, CrossingExample) {
  const Environment env = planted({kGreen1, kRed2});
  EXPECT_EQ(env.eval_c(Point{0.5, 0.0}), 1.5);
  EXPECT_EQ(env.eval_c(Point{0.0, 0.0}), 2.0);
}

TEST(Plant, CompleteGreenAndRed) {
  const Segment g{Color::green, 2, 0, 0};
  const Environment eg = planted({g});
  EXPECT_TRUE(eg.is_complete(g));
  for (double t = -80; t <= 80; t += 0.25) EXPECT_EQ(eg.eval_c(Point{t, 0}), 1.0);
  const Environment er = planted({kRed2});
  for (double y = -80; y <= 80; y += 0.25) EXPECT_EQ(er.eval_c(Point{0, y}), 2.0);
}

TEST(Plant, ProtectedBackgroundKeepsCompleteness) {
  for (std::uint64_t i = 0; i < 20; ++i) {
    const Segment green{Color::green, 1, 0, 0};
    const Environment env = Environment::planted({green}, BackgroundPolicy{Seed128{i, 77}, 6, 0});
    EXPECT_TRUE(env.is_complete(green));
    const Environment red_env = Environment::planted({kRed2}, BackgroundPolicy{Seed128{i, 78}, 6, 0});
    EXPECT_TRUE(red_env.is_complete(kRed2));
  }
}

TEST(Plant, UnprotectedBackgroundCompletenessMatchesActivation) {
  // A background green of scale >= 2 on the same row suppresses every crossing red of
  // its scale, so completeness is not rare; it holds exactly when no crossing red is activated.
  std::size_t complete = 0;
  for (std::uint64_t i = 0; i < 20; ++i) {
    const Environment env = Environment::planted({kGreen1}, BackgroundPolicy{Seed128{i, 79}, 6, std::nullopt});
    bool activated = false;
    for (const Segment& r : env.segments_in(kGreen1.bounds(), 1.0, SegmentFilter::reds(2))) {
      if (r.axial_lo() <= 0.0 && r.axial_hi() >= 0.0 && gap(r.transverse(), -20.0, 20.0) < 1.0) {
        activated = activated || env.red_activated(r, 0.0);
      }
    }
    EXPECT_EQ(env.is_complete(kGreen1), !activated) << i;
    complete += env.is_complete(kGreen1);
  }
  EXPECT_LT(complete, 10u);
}

TEST(Plant, ProtectIndexValidated) {
  EXPECT_THROW(Environment::planted({kGreen1}, BackgroundPolicy{Seed128{}, 4, 3}), std::invalid_argument);
  EXPECT_THROW(Environment::planted({Segment{Color::red, 0, 0, 0}}), std::invalid_argument);
}

TEST(EnvInvariants, RangeAndLipschitz) {
  const Environment env = Environment::random(Seed128{0xfeed, 0xbeef}, 6);
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-60.0, 60.0), small(-3.0, 3.0);
  for (int i = 0; i < 10000; ++i) {
    const Point x{u(rng), u(rng)};
    const Point y{x.x + small(rng), x.y + small(rng)};
    const double cx = env.eval_c(x), cy = env.eval_c(y);
    ASSERT_GE(cx, 1.0);
    ASSERT_LE(cx, 2.0);
    ASSERT_LE(std::abs(cx - cy), distance(x, y) + 1e-12);
  }
}

TEST(EnvInvariants, InteriorOfKeptSetsCarriesPhaseTwoValue) {
  const Environment env = Environment::random(Seed128{0xa, 0xb}, 5);
  std::size_t checked = 0;
  for (const Segment& s : env.segments_in(Rect{-50, 50, -50, 50}, 0.0)) {
    const ActiveSet as = env.active_set(s);
    for (const Interval& iv : as.kept) {
      if (iv.hi - iv.lo < 1e-9) continue;
      const double mid = 0.5 * (iv.lo + iv.hi);
      const Point p = s.color == Color::green ? Point{mid, s.transverse()} : Point{s.transverse(), mid};
      if (s.color == Color::red) {
        EXPECT_EQ(env.eval_c(p), 2.0);
        ++checked;
      } else if (env.segments_in(Rect{p.x, p.x, p.y, p.y}, 1.0, SegmentFilter::reds()).empty()) {
        EXPECT_EQ(env.eval_c(p), 1.0);
        ++checked;
      }
    }
  }
  EXPECT_GT(checked, 10u);
}

TEST(EnvInvariants, DeterministicAcrossInstancesAndThreads) {
  const Seed128 seed{0x1234, 0x5678};
  const Environment a = Environment::random(seed, 7);
  const Environment b = Environment::random(seed, 7);
  std::vector<Point> pts;
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(-200.0, 200.0);
  for (int i = 0; i < 2000; ++i) pts.push_back(Point{u(rng), u(rng)});
  std::vector<double> serial;
  for (const Point& p : pts) serial.push_back(a.eval_c(p));
  std::vector<double> parallel(pts.size());
  {
    std::vector<std::jthread> pool;
    for (int t = 0; t < 4; ++t) {
      pool.emplace_back([&, t] {
        for (std::size_t i = static_cast<std::size_t>(t); i < pts.size(); i += 4) parallel[i] = b.eval_c(pts[i]);
      });
    }
  }
  EXPECT_EQ(serial, parallel);
}

TEST(EnvInvariants, PlantedTranslationEquivariance) {
  const std::vector<Segment> base{kGreen1, kRed2, Segment{Color::green, 2, 3, 7}, Segment{Color::red, 1, -4, 2}};
  const std::int64_t vx = 13, vy = -6;
  std::vector<Segment> moved;
  for (const Segment& s : base) moved.push_back(s.translated(vx, vy));
  const Environment a = planted(base), b = planted(moved);
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(-30.0, 30.0);
  for (int i = 0; i < 3000; ++i) {
    const Point x{u(rng), u(rng)};
    ASSERT_EQ(b.eval_c(Point{x.x + vx, x.y + vy}), a.eval_c(x));
  }
}

TEST(TruncationBound, SummedSeriesValues) {
  // Direct summation of the per-scale candidate counts, independently evaluated.
  EXPECT_NEAR(truncation_bound(8, Rect{-40, 40, -40, 40}, 0.0), 0.008443407900631427, 1e-15);
  EXPECT_NEAR(truncation_bound(9, Rect{-40, 40, -40, 40}, 0.0), 0.0021108123590238394, 1e-15);
  EXPECT_NEAR(truncation_bound(6, Rect{-10, 10, -5, 5}, 5.0), 0.04557872613271077, 1e-14);
  EXPECT_LT(truncation_bound(8, Rect{-40, 40, -40, 40}, 0.0), 1e-2);
}

TEST(TruncationBound, QuartersPerScaleAndGrowsWithWindow) {
  const Rect w{-40, 40, -40, 40};
  for (int k = 6; k < 12; ++k) {
    EXPECT_LE(truncation_bound(k + 1, w, 0.0), truncation_bound(k, w, 0.0) / 4.0 + 1e-12);
  }
  EXPECT_LT(truncation_bound(8, Rect{-10, 10, -10, 10}, 0.0), truncation_bound(8, w, 0.0));
  EXPECT_LT(truncation_bound(8, w, 0.0), truncation_bound(8, w, 16.0));
  EXPECT_THROW(truncation_bound(8, Rect{0, 0, 0, 1}, 0.0), std::invalid_argument);
  EXPECT_EQ(truncation_bound(planted({}), w, 0.0), 0.0);
  EXPECT_LE(truncation_bound(1, Rect{-1e6, 1e6, -1e6, 1e6}, 0.0), 1.0);
}

TEST(LocalField, MatchesEvalCInsideWindow) {
  const Environment env = Environment::random(Seed128{0x77, 0x88}, 6);
  const Rect w{-30, 30, -30, 30};
  const LocalField field(env, w);
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-30.0, 30.0);
  for (int i = 0; i < 5000; ++i) {
    const Point x{u(rng), u(rng)};
    ASSERT_EQ(field(x), env.eval_c(x));
  }
}
