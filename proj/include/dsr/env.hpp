#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "dsr/swucb.hpp"
#include "json.hpp"

namespace dsr {

using Observation = std::vector<double>;
using StateVector = std::vector<double>;
using JointAction = std::vector<int>;

struct StepResult {
  /// Shared team reward for this tick.
  double reward = 0.0;
  bool done = false;
  /// True when the episode ended for a reason other than the step limit.
  bool terminated = false;
  /// Cumulative named event counters since reset.
  std::map<std::string, double> info;
};

/// Grid-world Dec-POMDP with a sight-range-parameterized observation function.
///
/// observe() returns obs_len() values for every d in [0, max_sight()]; entries
/// that lie outside d take the environment's default value.
class Environment {
 public:
  virtual ~Environment() = default;

  virtual std::string name() const = 0;
  virtual std::size_t n_agents() const = 0;
  virtual std::size_t action_count() const = 0;
  virtual std::size_t obs_len() const = 0;
  virtual SightRange max_sight() const = 0;
  virtual int max_steps() const = 0;

  virtual void Reset(std::uint64_t seed) = 0;
  virtual StepResult Step(const JointAction& actions) = 0;
  virtual Observation Observe(std::size_t agent, SightRange d) const = 0;

  virtual int step_count() const = 0;
  virtual bool done() const = 0;

  /// Canonical state serialization; entity lists in fixed order.
  virtual nlohmann::json ToJson() const = 0;
  virtual std::unique_ptr<Environment> Clone() const = 0;

  /// Concatenation of every agent's observation at d, in agent order.
  StateVector BuildState(SightRange d) const;

 protected:
  void CheckObserveArgs(std::size_t agent, SightRange d) const;
  void CheckJointAction(const JointAction& actions) const;
};

}  // namespace dsr
