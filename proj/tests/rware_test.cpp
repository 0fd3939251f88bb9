#include "dsr/rware.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <set>

#include "dsr/lbf.hpp"
#include "dsr/rng.hpp"
#include "oracle/env_oracle.hpp"

namespace dsr {
namespace {

RwareConfig Tiny(int agents = 2, int sight = 3) {
  RwareConfig cfg;
  cfg.n_agents = agents;
  cfg.max_sight = sight;
  return cfg;
}

// First shelf id stationed at `cell`, or -1.
int ShelfAt(const RwareEnv& env, int cell) {
  const auto& shelves = env.state().shelves;
  for (std::size_t k = 0; k < shelves.size(); ++k) {
    if (shelves[k].cell == cell) return static_cast<int>(k);
  }
  return -1;
}

TEST(RwareLayoutTest, NamedLayouts) {
  const auto tiny = RwareLayout::Named("tiny");
  EXPECT_EQ(tiny.shelf_columns, 2);
  EXPECT_EQ(tiny.width, 7);
  EXPECT_EQ(tiny.height, 10);
  EXPECT_EQ(tiny.shelf_homes.size(), 24u);
  const auto small = RwareLayout::Named("small");
  EXPECT_EQ(small.shelf_columns, 5);
  EXPECT_EQ(small.width, 16);
  EXPECT_EQ(small.shelf_homes.size(), 60u);
  EXPECT_THROW(RwareLayout::Named("huge"), std::invalid_argument);
  for (const auto& l : {tiny, small}) {
    ASSERT_EQ(l.goals.size(), 2u);
    for (int g : l.goals) {
      EXPECT_EQ(g / l.width, l.height - 1);
      EXPECT_EQ(std::count(l.shelf_homes.begin(), l.shelf_homes.end(), g), 0);
    }
  }
}

TEST(RwareTest, ConstructionRequestsAndErrors) {
  RwareEnv env(Tiny(), 3);
  EXPECT_EQ(env.RequestedCount(), 2);
  EXPECT_EQ(env.obs_len(), 7u * 49 + 5);

  RwareConfig crowded = Tiny(47);  // 70 cells - 24 shelves - 2 goals = 44 free
  EXPECT_THROW(RwareEnv(crowded, 0), std::invalid_argument);
  RwareConfig too_many = Tiny(2);
  too_many.n_requests = 22;
  EXPECT_THROW(RwareEnv(too_many, 0), std::invalid_argument);

  RwareEnv a(Tiny(), 42), b(Tiny(), 42);
  EXPECT_EQ(a.ToJson().dump(), b.ToJson().dump());
}

TEST(RwareTest, DeliveryScoresAndReplenishes) {
  RwareEnv env(Tiny(), 0);
  RwareState s = env.state();
  const int goal = env.layout().goals[0];
  const int w = env.layout().width;
  // Agent 0 one step north of the goal, facing south, carrying a requested shelf.
  int requested = -1;
  for (std::size_t k = 0; k < s.shelves.size(); ++k) {
    if (s.shelves[k].requested) requested = static_cast<int>(k);
  }
  ASSERT_GE(requested, 0);
  s.agents[0] = {goal / w - 1, goal % w, Heading::kSouth, requested};
  s.shelves[static_cast<std::size_t>(requested)].cell = goal - w;
  s.agents[1] = {0, 0, Heading::kNorth, -1};
  env.SetState(s, 7);
  const StepResult r = env.Step({RwareEnv::kForward, RwareEnv::kNoop});
  EXPECT_EQ(r.reward, 1.0);
  EXPECT_EQ(r.info.at("deliveries"), 1.0);
  EXPECT_EQ(env.RequestedCount(), 2);
  EXPECT_FALSE(env.state().shelves[static_cast<std::size_t>(requested)].requested);
  // Still carrying; standing on the goal again gives nothing.
  EXPECT_EQ(env.state().agents[0].carrying, requested);
  EXPECT_EQ(env.Step({RwareEnv::kNoop, RwareEnv::kNoop}).reward, 0.0);
}

TEST(RwareTest, ToggleRules) {
  RwareEnv env(Tiny(), 0);
  RwareState s = env.state();
  s.agents[0] = {0, 0, Heading::kNorth, -1};  // aisle cell, no shelf
  s.agents[1] = {1, 1, Heading::kNorth, -1};  // on a shelf home
  env.SetState(s, 0);
  const int shelf = ShelfAt(env, 1 * 7 + 1);
  ASSERT_GE(shelf, 0);
  StepResult r = env.Step({RwareEnv::kToggleLoad, RwareEnv::kToggleLoad});
  EXPECT_EQ(r.reward, 0.0);
  EXPECT_EQ(env.state().agents[0].carrying, -1);
  EXPECT_EQ(env.state().agents[1].carrying, shelf);

  // Drop-off is refused off a shelf home and accepted on an empty home.
  s = env.state();
  s.agents[1].row = 0;
  s.agents[1].col = 1;
  s.shelves[static_cast<std::size_t>(shelf)].cell = 1;
  s.agents[0] = {4, 0, Heading::kNorth, -1};
  env.SetState(s, 0);
  env.Step({RwareEnv::kNoop, RwareEnv::kToggleLoad});
  EXPECT_EQ(env.state().agents[1].carrying, shelf);
  env.Step({RwareEnv::kNoop, RwareEnv::kRight});
  env.Step({RwareEnv::kNoop, RwareEnv::kRight});  // now facing south
  env.Step({RwareEnv::kNoop, RwareEnv::kForward});
  EXPECT_EQ(env.state().agents[1].row, 1);
  env.Step({RwareEnv::kNoop, RwareEnv::kToggleLoad});
  EXPECT_EQ(env.state().agents[1].carrying, -1);
  EXPECT_EQ(env.state().shelves[static_cast<std::size_t>(shelf)].cell, 1 * 7 + 1);
}

TEST(RwareTest, CarryingAgentBlockedByStationedShelf) {
  RwareEnv env(Tiny(), 0);
  RwareState s = env.state();
  // Agent 0 carries the (1,1) shelf at (0,2), facing the stationed shelf at (1,2).
  const int carried = ShelfAt(env, 1 * 7 + 1);
  s.shelves[static_cast<std::size_t>(carried)].cell = 0 * 7 + 2;
  s.agents[0] = {0, 2, Heading::kSouth, carried};
  s.agents[1] = {4, 0, Heading::kNorth, -1};
  env.SetState(s, 0);
  env.Step({RwareEnv::kForward, RwareEnv::kNoop});
  EXPECT_EQ(env.state().agents[0].row, 0);
  EXPECT_EQ(env.state().shelves[static_cast<std::size_t>(carried)].cell, 2);

  // An unloaded agent passes under shelves.
  s = env.state();
  s.agents[0].carrying = -1;
  s.shelves[static_cast<std::size_t>(carried)].cell = 1 * 7 + 1;
  env.SetState(s, 0);
  env.Step({RwareEnv::kForward, RwareEnv::kNoop});
  EXPECT_EQ(env.state().agents[0].row, 1);
}

TEST(RwareTest, ContestedCellBlocksEveryone) {
  RwareEnv env(Tiny(), 0);
  RwareState s = env.state();
  s.agents[0] = {4, 1, Heading::kEast, -1};
  s.agents[1] = {4, 3, Heading::kWest, -1};
  env.SetState(s, 0);
  env.Step({RwareEnv::kForward, RwareEnv::kForward});
  EXPECT_EQ(env.state().agents[0].col, 1);
  EXPECT_EQ(env.state().agents[1].col, 3);
  env.Step({RwareEnv::kLeft, RwareEnv::kRight});
  EXPECT_EQ(env.state().agents[0].heading, Heading::kNorth);
  EXPECT_EQ(env.state().agents[1].heading, Heading::kNorth);
}

TEST(RwareTest, ObservationMasking) {
  RwareEnv env(Tiny(2, 3), 5);
  RwareState s = env.state();
  s.agents[0] = {4, 3, Heading::kEast, -1};
  s.agents[1] = {4, 5, Heading::kWest, -1};
  env.SetState(s, 0);
  const Observation full = env.Observe(0, 3);
  EXPECT_EQ(full[2], 1.0);  // heading east
  EXPECT_EQ(full[env.CellOffset(0, 2)], 1.0);
  EXPECT_EQ(full[env.CellOffset(0, 2) + 1 + 3], 1.0);  // other agent faces west
  const Observation d1 = env.Observe(0, 1);
  for (int dr = -3; dr <= 3; ++dr) {
    for (int dc = -3; dc <= 3; ++dc) {
      if (std::max(std::abs(dr), std::abs(dc)) <= 1) continue;
      for (std::size_t f = 0; f < 7; ++f) EXPECT_EQ(d1[env.CellOffset(dr, dc) + f], 0.0);
    }
  }
  EXPECT_EQ(d1, oracle::RwareMask(full, 3, 1));
  EXPECT_THROW(env.Observe(0, 4), std::out_of_range);
}

TEST(RwareTest, RandomRolloutInvariants) {
  for (const char* layout : {"tiny", "small"}) {
    RwareConfig cfg = Tiny(layout == std::string("tiny") ? 2 : 4, 2);
    cfg.layout = layout;
    cfg.max_steps = 200;
    RwareEnv env(cfg, 9);
    Rng rng(10);
    for (int episode = 0; episode < 10; ++episode) {
      env.Reset(rng.NextU64());
      double ret = 0.0;
      while (!env.done()) {
        JointAction act(env.n_agents());
        for (auto& a : act) a = static_cast<int>(rng.UniformInt(RwareEnv::kActionCount));
        const StepResult r = env.Step(act);
        ret += r.reward;
        ASSERT_EQ(ret, env.state().deliveries);
        ASSERT_EQ(env.RequestedCount(), cfg.requests());
        std::set<int> cells;
        for (const auto& a : env.state().agents) ASSERT_TRUE(cells.insert(a.row * env.layout().width + a.col).second);
        for (std::size_t i = 0; i < env.n_agents(); ++i) {
          const Observation full = env.Observe(i, 2);
          for (int d = 0; d < 2; ++d) ASSERT_EQ(env.Observe(i, d), oracle::RwareMask(full, 2, d));
        }
      }
      EXPECT_EQ(env.step_count(), 200);
    }
  }
}

TEST(EnvContractTest, BuildStateConcatenates) {
  LbfConfig cfg;
  cfg.n_foods = 1;
  LbfEnv env(cfg, 3);
  EXPECT_EQ(env.obs_len(), 9u);
  const StateVector s = env.BuildState(2);
  ASSERT_EQ(s.size(), 18u);
  const Observation o0 = env.Observe(0, 2), o1 = env.Observe(1, 2);
  EXPECT_TRUE(std::equal(o0.begin(), o0.end(), s.begin()));
  EXPECT_TRUE(std::equal(o1.begin(), o1.end(), s.begin() + 9));
  // The state changes with d exactly when some observation does.
  for (int d = 0; d < 8; ++d) {
    const bool obs_changed = env.Observe(0, d) != env.Observe(0, d + 1) || env.Observe(1, d) != env.Observe(1, d + 1);
    EXPECT_EQ(env.BuildState(d) != env.BuildState(d + 1), obs_changed);
  }
}

TEST(EnvContractTest, SightMonotonicityAndLengthInvariance) {
  Rng rng(4);
  LbfConfig lcfg;
  lcfg.width = lcfg.height = 7;
  lcfg.n_agents = 3;
  lcfg.n_foods = 3;
  LbfEnv lbf(lcfg, 1);
  RwareEnv rware(Tiny(3, 3), 1);
  for (int trial = 0; trial < 100; ++trial) {
    lbf.Reset(rng.NextU64());
    rware.Reset(rng.NextU64());
    for (Environment* env : std::initializer_list<Environment*>{&lbf, &rware}) {
      for (std::size_t i = 0; i < env->n_agents(); ++i) {
        Observation prev = env->Observe(i, 0);
        for (int d = 1; d <= env->max_sight(); ++d) {
          const Observation cur = env->Observe(i, d);
          ASSERT_EQ(cur.size(), env->obs_len());
          // Every informative entry at d - 1 keeps its value at d.
          const double def = env->name() == "lbf" ? -1.0 : 0.0;
          for (std::size_t k = 0; k < cur.size(); ++k) {
            if (env->name() == "lbf" && k % 3 == 2) continue;  // level slot defaults to 0
            if (prev[k] != def) ASSERT_EQ(prev[k], cur[k]);
          }
          prev = cur;
        }
      }
    }
  }
}

TEST(EnvContractTest, NoopRewardsAndStepDeterminism) {
  LbfEnv lbf(LbfConfig{}, 2);
  RwareEnv rware(Tiny(), 2);
  for (Environment* env : std::initializer_list<Environment*>{&lbf, &rware}) {
    const JointAction noop(env->n_agents(), 0);
    int steps = 0;
    while (!env->done()) {
      EXPECT_EQ(env->Step(noop).reward, 0.0);
      ++steps;
    }
    EXPECT_EQ(steps, env->max_steps());
    EXPECT_THROW(env->Step(noop), std::logic_error);
  }
  Rng rng(3);
  RwareEnv a(Tiny(), 11);
  for (int t = 0; t < 100; ++t) {
    JointAction act(2);
    for (auto& x : act) x = static_cast<int>(rng.UniformInt(5));
    auto b = a.Clone();
    a.Step(act);
    b->Step(act);
    ASSERT_EQ(a.ToJson().dump(), b->ToJson().dump());
  }
}

}  // namespace
}  // namespace dsr
