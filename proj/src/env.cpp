#include "dsr/env.hpp"

#include <stdexcept>

namespace dsr {

StateVector Environment::BuildState(SightRange d) const {
  StateVector state;
  state.reserve(n_agents() * obs_len());
  for (std::size_t i = 0; i < n_agents(); ++i) {
    const Observation o = Observe(i, d);
    state.insert(state.end(), o.begin(), o.end());
  }
  return state;
}

void Environment::CheckObserveArgs(std::size_t agent, SightRange d) const {
  if (agent >= n_agents()) throw std::out_of_range("agent index out of range");
  if (d < 0 || d > max_sight()) {
    throw std::out_of_range("sight range " + std::to_string(d) + " outside [0, " +
                            std::to_string(max_sight()) + "]");
  }
}

void Environment::CheckJointAction(const JointAction& actions) const {
  if (done()) throw std::logic_error("step called on a finished episode");
  if (actions.size() != n_agents()) throw std::invalid_argument("joint action length mismatch");
  for (int a : actions) {
    if (a < 0 || static_cast<std::size_t>(a) >= action_count()) {
      throw std::invalid_argument("action out of range");
    }
  }
}

}  // namespace dsr
