#include "dsr/swucb.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <random>

#include "oracle/window_oracle.hpp"

namespace dsr {
namespace {

TEST(ArmSetTest, RejectsInvalidSets) {
  EXPECT_THROW(ArmSet({}), std::invalid_argument);
  EXPECT_THROW(ArmSet({2, 2, 4}), std::invalid_argument);
  EXPECT_THROW(ArmSet({4, 2}), std::invalid_argument);
  EXPECT_THROW(ArmSet({-1, 2}), std::invalid_argument);
  ArmSet arms({2, 4, 6});
  EXPECT_EQ(arms.size(), 3u);
  EXPECT_EQ(arms.max(), 6);
  EXPECT_EQ(arms.IndexOf(4), 1u);
  EXPECT_EQ(arms.IndexOf(5), 3u);
}

TEST(MetaControllerTest, Construction) {
  MetaController mc(ArmSet({2, 4, 6}), 2.0, 5000);
  EXPECT_EQ(mc.arms().size(), 3u);
  EXPECT_TRUE(mc.window().empty());
  EXPECT_EQ(mc.selections(), 0u);

  MetaController single(ArmSet({3}), 0.0, 1);
  EXPECT_EQ(single.Select().d, 3);

  EXPECT_THROW(MetaController(ArmSet({1}), 2.0, 0), std::invalid_argument);
  EXPECT_THROW(MetaController(ArmSet({1}), std::numeric_limits<double>::infinity(), 5), std::invalid_argument);
  EXPECT_THROW(MetaController(ArmSet({1}), std::nan(""), 5), std::invalid_argument);
  EXPECT_THROW(MetaController(ArmSet({1}), -1.0, 5), std::invalid_argument);
}

TEST(MetaControllerTest, WindowedCount) {
  MetaController mc(ArmSet({1, 2}), 1.0, 3);
  EXPECT_EQ(mc.WindowedCount(0), 0u);
  mc.Update(0, 0.5);
  mc.Update(1, 0.2);
  mc.Update(0, 0.9);
  EXPECT_EQ(mc.WindowedCount(0), 2u);
  EXPECT_THROW(mc.WindowedCount(2), std::out_of_range);

  MetaController evict(ArmSet({1, 2}), 1.0, 2);
  evict.Update(0, 0.1);
  evict.Update(0, 0.2);
  evict.Update(1, 0.3);
  EXPECT_EQ(evict.WindowedCount(0), 1u);
  EXPECT_DOUBLE_EQ(evict.WindowedMean(0), 0.2);
}

TEST(MetaControllerTest, UcbScore) {
  MetaController mc(ArmSet({1, 2, 3}), 1.0, 3);
  EXPECT_EQ(mc.UcbScore(0), std::numeric_limits<double>::infinity());
  mc.Update(0, 0.5);
  EXPECT_DOUBLE_EQ(mc.UcbScore(0), 0.5);  // ln 1 = 0
  mc.Update(1, 0.1);
  mc.Update(2, 0.1);
  EXPECT_NEAR(mc.UcbScore(0), 1.5482, 1e-4);
  EXPECT_DOUBLE_EQ(mc.UcbScore(0), 0.5 + std::sqrt(std::log(3.0)));

  MetaController greedy(ArmSet({1}), 0.0, 10);
  greedy.Update(0, 0.4);
  greedy.Update(0, 0.6);
  EXPECT_DOUBLE_EQ(greedy.UcbScore(0), 0.5);
}

TEST(MetaControllerTest, SelectTieBreakAndPurity) {
  MetaController mc(ArmSet({2, 4, 6}), 2.0, 5000);
  EXPECT_EQ(mc.Select(), (ArmChoice{0, 2}));
  EXPECT_EQ(mc.Select(), (ArmChoice{0, 2}));

  MetaController two(ArmSet({1, 2, 3}), 1.0, 3);
  two.Update(0, 0.5);
  two.Update(1, 0.2);
  EXPECT_NEAR(two.UcbScore(0), 0.5 + std::sqrt(std::log(2.0)), 1e-12);
  EXPECT_NEAR(two.UcbScore(0), 1.3326, 1e-4);
  EXPECT_NEAR(two.UcbScore(1), 1.0326, 1e-4);
  // Arm 2 is unexplored and wins; without it arm 0 leads.
  EXPECT_EQ(two.Select().arm, 2u);
  MetaController pair(ArmSet({1, 2}), 1.0, 3);
  pair.Update(0, 0.5);
  pair.Update(1, 0.2);
  EXPECT_EQ(pair.Select().arm, 0u);
}

TEST(MetaControllerTest, ExplorationVisitsEveryArmOnce) {
  MetaController mc(ArmSet({0, 1, 3, 5, 8}), 2.0, 100);
  for (std::size_t i = 0; i < 5; ++i) {
    const ArmChoice choice = mc.Select();
    EXPECT_EQ(choice.arm, i);
    mc.Update(choice.arm, 1.0 - 0.1 * static_cast<double>(i));
  }
}

TEST(MetaControllerTest, UpdateEvictionAndSaturation) {
  MetaController mc(ArmSet({1, 2}), 1.0, 1);
  mc.Update(0, 0.5);
  mc.Update(1, 0.9);
  ASSERT_EQ(mc.window().size(), 1u);
  EXPECT_EQ(mc.window().front(), (WindowEntry{1, 0.9}));
  EXPECT_EQ(mc.WindowedCount(0), 0u);

  MetaController big(ArmSet({1}), 2.0, 5000);
  for (int i = 0; i < 5000; ++i) big.Update(0, 0.25);
  EXPECT_EQ(big.WindowedCount(0), 5000u);
  big.Update(0, 0.25);
  EXPECT_EQ(big.WindowedCount(0), 5000u);
  EXPECT_EQ(big.selections(), 5001u);

  EXPECT_THROW(mc.Update(0, std::nan("")), std::invalid_argument);
  EXPECT_THROW(mc.Update(0, std::numeric_limits<double>::infinity()), std::invalid_argument);
  EXPECT_THROW(mc.Update(5, 0.0), std::out_of_range);
}

TEST(MetaControllerTest, BestByMean) {
  MetaController mc(ArmSet({1, 2, 3}), 2.0, 10);
  EXPECT_THROW(mc.BestByMean(), std::logic_error);
  mc.Update(0, 0.2);
  mc.Update(1, 0.8);
  EXPECT_EQ(mc.BestByMean().arm, 1u);

  MetaController only(ArmSet({1, 2, 3}), 100.0, 10);
  only.Update(2, -5.0);
  EXPECT_EQ(only.BestByMean(), (ArmChoice{2, 3}));
}

TEST(MetaControllerTest, BestByMeanIsScaleInvariant) {
  std::mt19937_64 gen(3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 200; ++trial) {
    MetaController a(ArmSet({1, 2, 3, 4}), 2.0, 20);
    MetaController b(ArmSet({1, 2, 3, 4}), 2.0, 20);
    for (int k = 0; k < 30; ++k) {
      const std::size_t arm = gen() % 4;
      const double r = u(gen);
      a.Update(arm, r);
      b.Update(arm, 7.5 * r);
    }
    EXPECT_EQ(a.BestByMean(), b.BestByMean());
  }
}

TEST(MetaControllerTest, MatchesBruteForceWindow) {
  std::mt19937_64 gen(11);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int seq = 0; seq < 200; ++seq) {
    const std::size_t m = 1 + gen() % 5;
    const std::size_t w = 1 + gen() % 50;
    std::vector<int> values;
    for (std::size_t i = 0; i < m; ++i) values.push_back(static_cast<int>(2 * i));
    MetaController mc(ArmSet(values), 2.0, w);
    oracle::Window ref(m, 2.0, w);
    for (int step = 0; step < 100; ++step) {
      ASSERT_EQ(mc.Select().arm, ref.Select());
      for (std::size_t i = 0; i < m; ++i) {
        ASSERT_EQ(mc.WindowedCount(i), ref.Count(i));
        const double s = mc.UcbScore(i), r = ref.Score(i);
        if (std::isinf(r)) {
          ASSERT_TRUE(std::isinf(s));
        } else {
          ASSERT_NEAR(s, r, 1e-12);
        }
      }
      // Half the time follow the bandit, otherwise a random arm.
      const std::size_t arm = gen() % 2 ? mc.Select().arm : gen() % m;
      const double reward = u(gen);
      mc.Update(arm, reward);
      ref.Push(arm, reward);
      ASSERT_EQ(mc.BestByMean().arm, ref.BestByMean());
    }
  }
}

TEST(MetaControllerTest, ConservationOverLongRun) {
  std::mt19937_64 gen(5);
  MetaController mc(ArmSet({1, 2, 3}), 1.0, 50);
  for (int k = 1; k <= 10000; ++k) {
    mc.Update(gen() % 3, static_cast<double>(gen() % 1000) / 1000.0);
    std::size_t total = 0;
    for (std::size_t i = 0; i < 3; ++i) total += mc.WindowedCount(i);
    ASSERT_EQ(total, std::min<std::size_t>(k, 50));
  }
}

TEST(MetaControllerTest, JsonRoundTrip) {
  MetaController mc(ArmSet({1, 4}), 1.5, 3);
  mc.Update(0, 0.1);
  mc.Update(1, 0.7);
  mc.Update(1, 0.3);
  mc.Update(0, 1.0 / 3.0);
  const MetaController back = MetaController::FromJson(mc.ToJson());
  EXPECT_EQ(back.window(), mc.window());
  EXPECT_EQ(back.selections(), mc.selections());
  EXPECT_EQ(back.arms(), mc.arms());
  for (std::size_t i = 0; i < 2; ++i) EXPECT_EQ(back.UcbScore(i), mc.UcbScore(i));
}

}  // namespace
}  // namespace dsr
