#pragma once

#include <string>
#include <vector>

#include "dsr/env.hpp"
#include "dsr/rng.hpp"

namespace dsr {

/// Warehouse geometry.
///
/// Canonical layout with `shelf_columns` blocks, each two cells wide, laid out
/// as: row 0 aisle, rows 1-3 shelves, row 4 cross aisle, rows 5-7 shelves,
/// row 8 aisle, row 9 goal row. Blocks are separated by one-cell aisles, so
/// width = 3 * shelf_columns + 1. The two goal cells sit in the middle of the
/// bottom row.
struct RwareLayout {
  int width = 0;
  int height = 0;
  int shelf_columns = 0;
  std::vector<int> shelf_homes;  // cell ids, row-major
  std::vector<int> goals;

  /// "tiny" (2 shelf columns) or "small" (5 shelf columns).
  static RwareLayout Named(const std::string& name);
  static RwareLayout WithColumns(int shelf_columns);
};

struct RwareConfig {
  std::string layout = "tiny";
  int n_agents = 2;
  /// Requested-shelf count; 0 means "equal to n_agents".
  int n_requests = 0;
  int max_steps = 500;
  SightRange max_sight = 3;

  int requests() const { return n_requests > 0 ? n_requests : n_agents; }
  void Validate() const;
};

enum class Heading : int { kNorth = 0, kEast = 1, kSouth = 2, kWest = 3 };

struct RwareAgent {
  int row;
  int col;
  Heading heading;
  int carrying = -1;  // shelf id or -1
};

struct RwareShelf {
  int home;  // cell id of initial placement
  int cell;  // current cell id (follows the carrier)
  bool requested = false;
};

struct RwareState {
  std::vector<RwareAgent> agents;
  std::vector<RwareShelf> shelves;
  int step = 0;
  int deliveries = 0;
};

/// Multi-robot warehouse: robots fetch requested shelves, bring them to a goal
/// cell for +1, then return them to an empty shelf slot.
///
/// Actions: 0 no-op, 1 forward, 2 rotate left, 3 rotate right, 4 pick up or
/// drop off. The observation is a fixed (2*max_sight+1)^2 window of 7 features
/// per cell plus a 5-value self block; cells beyond sight range d are zeroed.
class RwareEnv final : public Environment {
 public:
  enum Action : int { kNoop = 0, kForward, kLeft, kRight, kToggleLoad, kActionCount };
  static constexpr std::size_t kCellFeatures = 7;
  static constexpr std::size_t kSelfFeatures = 5;

  RwareEnv(RwareConfig cfg, std::uint64_t seed);

  /// Installs an explicit state. Throws when it breaks the layout or
  /// occupancy invariants. `seed` reseeds the request sampler.
  void SetState(RwareState state, std::uint64_t seed = 0);

  std::string name() const override { return "rware"; }
  std::size_t n_agents() const override { return static_cast<std::size_t>(cfg_.n_agents); }
  std::size_t action_count() const override { return kActionCount; }
  std::size_t obs_len() const override {
    const auto side = static_cast<std::size_t>(2 * cfg_.max_sight + 1);
    return kCellFeatures * side * side + kSelfFeatures;
  }
  SightRange max_sight() const override { return cfg_.max_sight; }
  int max_steps() const override { return cfg_.max_steps; }

  void Reset(std::uint64_t seed) override;
  StepResult Step(const JointAction& actions) override;
  Observation Observe(std::size_t agent, SightRange d) const override;

  int step_count() const override { return state_.step; }
  bool done() const override { return state_.step >= cfg_.max_steps; }

  nlohmann::json ToJson() const override;
  std::unique_ptr<Environment> Clone() const override { return std::make_unique<RwareEnv>(*this); }

  const RwareConfig& config() const { return cfg_; }
  const RwareLayout& layout() const { return layout_; }
  const RwareState& state() const { return state_; }
  int RequestedCount() const;

  /// Offset of cell (dr, dc) relative to the agent within an observation.
  std::size_t CellOffset(int dr, int dc) const;

  std::string Render() const;

 private:
  int Cell(int r, int c) const { return r * layout_.width + c; }
  bool IsShelfHome(int cell) const { return is_home_[static_cast<std::size_t>(cell)] != 0; }
  bool IsGoal(int cell) const;
  void RequestNewShelf();

  RwareConfig cfg_;
  RwareLayout layout_;
  std::vector<char> is_home_;
  RwareState state_;
  Rng rng_{0};
};

}  // namespace dsr
