#include "dsr/lbf.hpp"

#include <gtest/gtest.h>

#include <set>

#include "dsr/rng.hpp"
#include "oracle/env_oracle.hpp"

namespace dsr {
namespace {

LbfConfig Config(int w, int h, int agents, int foods, bool coop) {
  LbfConfig cfg;
  cfg.width = w;
  cfg.height = h;
  cfg.n_agents = agents;
  cfg.n_foods = foods;
  cfg.coop = coop;
  return cfg;
}

TEST(LbfTest, ConfigValidation) {
  EXPECT_THROW(LbfEnv(Config(2, 2, 3, 2, false), 0), std::invalid_argument);
  LbfConfig bad = Config(4, 4, 1, 1, false);
  bad.max_steps = 0;
  EXPECT_THROW(LbfEnv(bad, 0), std::invalid_argument);
}

TEST(LbfTest, PlacementOnDistinctCells) {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    LbfEnv env(Config(10, 10, 4, 2, true), seed);
    std::set<std::pair<int, int>> cells;
    int team = 0;
    for (const auto& a : env.state().agents) {
      cells.insert({a.row, a.col});
      team += a.level;
      EXPECT_GE(a.level, 1);
      EXPECT_LE(a.level, env.config().max_agent_level);
    }
    for (const auto& f : env.state().foods) {
      cells.insert({f.row, f.col});
      EXPECT_EQ(f.level, team);  // coop: full team required
    }
    EXPECT_EQ(cells.size(), 6u);
    EXPECT_EQ(env.state().agents.size(), 4u);
    EXPECT_EQ(env.total_food_level(), 2 * team);
  }
}

TEST(LbfTest, NonCoopFoodLevelBoundedByPairSum) {
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    LbfConfig cfg = Config(6, 6, 3, 3, false);
    cfg.max_agent_level = 3;
    LbfEnv env(cfg, seed);
    std::vector<int> levels;
    for (const auto& a : env.state().agents) levels.push_back(a.level);
    std::sort(levels.rbegin(), levels.rend());
    for (const auto& f : env.state().foods) {
      EXPECT_GE(f.level, 1);
      EXPECT_LE(f.level, levels[0] + levels[1]);
    }
  }
}

TEST(LbfTest, SaturatedGridAndReseed) {
  LbfEnv env(Config(2, 1, 1, 1, false), 4);
  const auto& a = env.state().agents[0];
  const auto& f = env.state().foods[0];
  EXPECT_NE(a.col, f.col);
  EXPECT_EQ(a.row, 0);

  LbfEnv x(Config(8, 8, 2, 2, false), 77), y(Config(8, 8, 2, 2, false), 77);
  EXPECT_EQ(x.ToJson().dump(), y.ToJson().dump());
  x.Reset(5);
  y.Reset(5);
  EXPECT_EQ(x.ToJson().dump(), y.ToJson().dump());
}

TEST(LbfTest, LoneAgentLoadsMatchingFood) {
  LbfEnv env(Config(5, 5, 1, 2, false), 0);
  env.SetState({{{2, 2, 2}}, {{2, 3, 2, false}, {0, 0, 1, false}}, 0});
  const StepResult r = env.Step({LbfEnv::kLoad});
  EXPECT_DOUBLE_EQ(r.reward, 2.0 / 3.0);
  EXPECT_TRUE(env.state().foods[0].collected);
  EXPECT_FALSE(r.done);
  EXPECT_EQ(r.info.at("foods_collected"), 1.0);
}

TEST(LbfTest, InsufficientLevelCollectsNothing) {
  LbfEnv env(Config(5, 5, 1, 1, false), 0);
  env.SetState({{{2, 2, 1}}, {{1, 2, 3, false}}, 0});
  const StepResult r = env.Step({LbfEnv::kLoad});
  EXPECT_EQ(r.reward, 0.0);
  EXPECT_FALSE(env.state().foods[0].collected);
}

TEST(LbfTest, JointLoadMatchesAdjacencySumOracle) {
  // Two loaders of levels 1 and 2 around a level-3 food.
  LbfEnv env(Config(5, 5, 2, 1, false), 0);
  env.SetState({{{2, 1, 1}, {1, 2, 2}}, {{2, 2, 3, false}}, 0});
  EXPECT_DOUBLE_EQ(env.Step({LbfEnv::kLoad, LbfEnv::kLoad}).reward, 1.0);

  // Random placements: enumerate every load/no-op subset.
  Rng rng(9);
  for (int trial = 0; trial < 300; ++trial) {
    LbfConfig cfg = Config(4, 4, 3, 1, false);
    cfg.max_agent_level = 3;
    LbfEnv base(cfg, rng.NextU64());
    for (int mask = 0; mask < 8; ++mask) {
      LbfEnv e = base;
      JointAction act(3);
      int load = 0;
      const auto& f = e.state().foods[0];
      for (int i = 0; i < 3; ++i) {
        act[static_cast<std::size_t>(i)] = (mask >> i) & 1 ? LbfEnv::kLoad : LbfEnv::kNoop;
        const auto& a = e.state().agents[static_cast<std::size_t>(i)];
        if ((mask >> i) & 1 && std::abs(a.row - f.row) + std::abs(a.col - f.col) == 1) load += a.level;
      }
      const int level = f.level;
      const StepResult r = e.Step(act);
      EXPECT_EQ(e.state().foods[0].collected, load >= level);
      EXPECT_DOUBLE_EQ(r.reward, load >= level ? 1.0 : 0.0);
    }
  }
}

TEST(LbfTest, MovementConflicts) {
  LbfEnv env(Config(5, 5, 3, 1, false), 0);
  // Agents 0 and 1 both target (2, 2); agent 2 walks into food; off-grid move fails.
  env.SetState({{{2, 1, 1}, {2, 3, 1}, {0, 0, 1}}, {{4, 4, 1, false}}, 0});
  env.Step({LbfEnv::kRight, LbfEnv::kLeft, LbfEnv::kUp});
  EXPECT_EQ(env.state().agents[0].col, 1);
  EXPECT_EQ(env.state().agents[1].col, 3);
  EXPECT_EQ(env.state().agents[2].row, 0);

  // Moving into a cell vacated this tick is still blocked (occupied at tick start).
  env.SetState({{{2, 1, 1}, {2, 2, 1}, {0, 0, 1}}, {{4, 4, 1, false}}, 0});
  env.Step({LbfEnv::kRight, LbfEnv::kRight, LbfEnv::kNoop});
  EXPECT_EQ(env.state().agents[0].col, 1);
  EXPECT_EQ(env.state().agents[1].col, 3);

  env.SetState({{{3, 4, 1}, {0, 1, 1}, {0, 0, 1}}, {{4, 4, 1, false}}, 0});
  env.Step({LbfEnv::kDown, LbfEnv::kNoop, LbfEnv::kNoop});
  EXPECT_EQ(env.state().agents[0].row, 3);
}

TEST(LbfTest, ObservationSightRange) {
  LbfEnv env(Config(10, 10, 2, 2, false), 0);
  env.SetState({{{5, 5, 1}, {9, 9, 2}}, {{5, 7, 1, false}, {4, 4, 2, false}}, 0});
  const Observation o1 = env.Observe(0, 1);
  ASSERT_EQ(o1.size(), 12u);
  EXPECT_EQ((std::vector<double>(o1.begin(), o1.begin() + 3)), (std::vector<double>{5, 5, 1}));
  EXPECT_EQ((std::vector<double>(o1.begin() + 3, o1.begin() + 6)), (std::vector<double>{-1, -1, 0}));
  EXPECT_EQ((std::vector<double>(o1.begin() + 6, o1.begin() + 9)), (std::vector<double>{4, 4, 2}));
  EXPECT_EQ((std::vector<double>(o1.begin() + 9, o1.end())), (std::vector<double>{-1, -1, 0}));

  const Observation full = env.Observe(0, 10);
  for (double v : full) EXPECT_NE(v, -1.0);

  const Observation zero = env.Observe(1, 0);
  EXPECT_EQ((std::vector<double>(zero.begin(), zero.begin() + 3)), (std::vector<double>{9, 9, 2}));
  for (std::size_t i = 3; i < zero.size(); i += 3) EXPECT_EQ(zero[i], -1.0);

  EXPECT_THROW(env.Observe(0, 11), std::out_of_range);
  EXPECT_THROW(env.Observe(2, 1), std::out_of_range);
}

TEST(LbfTest, RandomRolloutInvariants) {
  LbfConfig cfg = Config(6, 6, 3, 3, true);
  LbfEnv env(cfg, 1);
  Rng rng(2);
  for (int episode = 0; episode < 300; ++episode) {
    env.Reset(rng.NextU64());
    double ret = 0.0;
    int prev_collected = 0;
    while (!env.done()) {
      for (std::size_t i = 0; i < 3; ++i) {
        for (int d : {0, 1, 2, 4, 6}) {
          ASSERT_EQ(env.Observe(i, d), oracle::LbfObservation(env.state(), i, d));
        }
      }
      JointAction act(3);
      for (auto& a : act) a = static_cast<int>(rng.UniformInt(LbfEnv::kActionCount));
      const std::vector<LbfFood> before = env.state().foods;
      const StepResult r = env.Step(act);
      ret += r.reward;
      // Coop: a food is only collected when all three agents load next to it.
      for (std::size_t k = 0; k < before.size(); ++k) {
        if (!before[k].collected && env.state().foods[k].collected) {
          for (std::size_t i = 0; i < 3; ++i) {
            const auto& a = env.state().agents[i];
            ASSERT_EQ(act[i], LbfEnv::kLoad);
            ASSERT_EQ(std::abs(a.row - before[k].row) + std::abs(a.col - before[k].col), 1);
          }
        }
        if (before[k].collected) ASSERT_TRUE(env.state().foods[k].collected);
      }
      ASSERT_GE(env.collected_level(), prev_collected);
      prev_collected = env.collected_level();
      ASSERT_DOUBLE_EQ(r.info.at("collected_level"), env.collected_level());
    }
    EXPECT_LE(env.step_count(), 50);
    EXPECT_NEAR(ret, static_cast<double>(env.collected_level()) / env.total_food_level(), 1e-12);
    EXPECT_GE(ret, 0.0);
    EXPECT_LE(ret, 1.0 + 1e-12);
  }
}

TEST(LbfTest, StepAfterDoneThrows) {
  LbfConfig cfg = Config(4, 4, 1, 1, false);
  cfg.max_steps = 2;
  LbfEnv env(cfg, 0);
  env.Step({LbfEnv::kNoop});
  EXPECT_TRUE(env.Step({LbfEnv::kNoop}).done);
  EXPECT_THROW(env.Step({LbfEnv::kNoop}), std::logic_error);
  env.Reset(1);
  EXPECT_THROW(env.Step({LbfEnv::kNoop, LbfEnv::kNoop}), std::invalid_argument);
  EXPECT_THROW(env.Step({7}), std::invalid_argument);
}

}  // namespace
}  // namespace dsr
