#pragma once

#include <algorithm>
#include <string>
#include <vector>

#include "dsr/env.hpp"

namespace dsr {

struct LbfConfig {
  int width = 8;
  int height = 8;
  int n_agents = 2;
  int n_foods = 2;
  bool coop = false;
  int max_steps = 50;
  int max_agent_level = 2;

  /// Throws std::invalid_argument naming the offending field.
  void Validate() const;
};

struct LbfAgent {
  int row;
  int col;
  int level;
};

struct LbfFood {
  int row;
  int col;
  int level;
  bool collected = false;
};

struct LbfState {
  std::vector<LbfAgent> agents;
  std::vector<LbfFood> foods;
  int step = 0;
};

/// Level-Based Foraging: leveled agents load leveled food cooperatively.
///
/// Actions: 0 no-op, 1 up, 2 down, 3 left, 4 right, 5 load. A food is
/// collected when the summed level of orthogonally adjacent agents choosing
/// load reaches the food level. The team reward for a tick is the collected
/// level mass divided by the total food level at reset, so an episode return
/// lies in [0, 1].
class LbfEnv final : public Environment {
 public:
  enum Action : int { kNoop = 0, kUp, kDown, kLeft, kRight, kLoad, kActionCount };

  static constexpr double kDefaultCoord = -1.0;
  static constexpr double kDefaultLevel = 0.0;

  LbfEnv(LbfConfig cfg, std::uint64_t seed);

  /// Installs an explicit state (for tests and replays). Throws when the
  /// state breaks the config or occupancy invariants.
  void SetState(LbfState state);

  std::string name() const override { return "lbf"; }
  std::size_t n_agents() const override { return static_cast<std::size_t>(cfg_.n_agents); }
  std::size_t action_count() const override { return kActionCount; }
  std::size_t obs_len() const override {
    return 3 * static_cast<std::size_t>(cfg_.n_agents + cfg_.n_foods);
  }
  SightRange max_sight() const override { return std::max(cfg_.width, cfg_.height); }
  int max_steps() const override { return cfg_.max_steps; }

  void Reset(std::uint64_t seed) override;
  StepResult Step(const JointAction& actions) override;
  Observation Observe(std::size_t agent, SightRange d) const override;

  int step_count() const override { return state_.step; }
  bool done() const override { return done_; }

  nlohmann::json ToJson() const override;
  std::unique_ptr<Environment> Clone() const override { return std::make_unique<LbfEnv>(*this); }

  const LbfConfig& config() const { return cfg_; }
  const LbfState& state() const { return state_; }
  int total_food_level() const { return total_food_level_; }
  int collected_level() const { return collected_level_; }

  /// True iff the entity at (row, col) is within Chebyshev distance d of agent.
  bool Visible(std::size_t agent, int row, int col, SightRange d) const;

  std::string Render() const;

 private:
  LbfConfig cfg_;
  LbfState state_;
  int total_food_level_ = 0;
  int collected_level_ = 0;
  int foods_collected_ = 0;
  bool done_ = false;
};

}  // namespace dsr
