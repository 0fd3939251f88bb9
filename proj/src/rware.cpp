#include "dsr/rware.hpp"

#include <algorithm>
#include <cstdlib>
#include <stdexcept>

namespace dsr {

namespace {

constexpr int kDr[4] = {-1, 0, 1, 0};
constexpr int kDc[4] = {0, 1, 0, -1};

}  // namespace

RwareLayout RwareLayout::WithColumns(int shelf_columns) {
  if (shelf_columns < 1) throw std::invalid_argument("env.layout: need at least one shelf column");
  RwareLayout l;
  l.shelf_columns = shelf_columns;
  l.width = 3 * shelf_columns + 1;
  l.height = 10;
  for (int r = 0; r < l.height; ++r) {
    const bool shelf_row = (r >= 1 && r <= 3) || (r >= 5 && r <= 7);
    if (!shelf_row) continue;
    for (int c = 0; c < l.width; ++c) {
      if (c % 3 != 0) l.shelf_homes.push_back(r * l.width + c);
    }
  }
  const int bottom = l.height - 1;
  l.goals = {bottom * l.width + l.width / 2 - 1, bottom * l.width + l.width / 2};
  return l;
}

RwareLayout RwareLayout::Named(const std::string& name) {
  if (name == "tiny") return WithColumns(2);
  if (name == "small") return WithColumns(5);
  throw std::invalid_argument("env.layout: unknown layout '" + name + "' (expected tiny or small)");
}

void RwareConfig::Validate() const {
  const RwareLayout l = RwareLayout::Named(layout);
  if (n_agents < 1) throw std::invalid_argument("env.n_agents: must be >= 1");
  if (n_requests < 0) throw std::invalid_argument("env.n_requests: must be >= 0");
  if (max_steps < 1) throw std::invalid_argument("env.max_steps: must be >= 1");
  if (max_sight < 0) throw std::invalid_argument("env.max_sight: must be >= 0");
  const int free_cells = l.width * l.height - static_cast<int>(l.shelf_homes.size()) -
                         static_cast<int>(l.goals.size());
  if (n_agents > free_cells) throw std::invalid_argument("env.n_agents: no free cells left for agents");
  // New requests exclude requested and carried shelves, so keep a spare.
  if (requests() + n_agents >= static_cast<int>(l.shelf_homes.size())) {
    throw std::invalid_argument("env.n_agents: too many requests for the shelf count");
  }
}

RwareEnv::RwareEnv(RwareConfig cfg, std::uint64_t seed) : cfg_(std::move(cfg)) {
  cfg_.Validate();
  layout_ = RwareLayout::Named(cfg_.layout);
  is_home_.assign(static_cast<std::size_t>(layout_.width * layout_.height), 0);
  for (int cell : layout_.shelf_homes) is_home_[static_cast<std::size_t>(cell)] = 1;
  Reset(seed);
}

bool RwareEnv::IsGoal(int cell) const {
  return std::find(layout_.goals.begin(), layout_.goals.end(), cell) != layout_.goals.end();
}

void RwareEnv::Reset(std::uint64_t seed) {
  Rng rng(seed);
  RwareState s;
  for (int cell : layout_.shelf_homes) s.shelves.push_back({cell, cell, false});

  // Requested shelves: partial Fisher-Yates over shelf ids.
  std::vector<int> ids(s.shelves.size());
  for (std::size_t i = 0; i < ids.size(); ++i) ids[i] = static_cast<int>(i);
  for (int i = 0; i < cfg_.requests(); ++i) {
    const auto j = static_cast<std::size_t>(i) + rng.UniformInt(ids.size() - static_cast<std::size_t>(i));
    std::swap(ids[static_cast<std::size_t>(i)], ids[j]);
    s.shelves[static_cast<std::size_t>(ids[static_cast<std::size_t>(i)])].requested = true;
  }

  std::vector<int> free_cells;
  for (int cell = 0; cell < layout_.width * layout_.height; ++cell) {
    if (!IsShelfHome(cell) && !IsGoal(cell)) free_cells.push_back(cell);
  }
  for (int i = 0; i < cfg_.n_agents; ++i) {
    const auto j = static_cast<std::size_t>(i) +
                   rng.UniformInt(free_cells.size() - static_cast<std::size_t>(i));
    std::swap(free_cells[static_cast<std::size_t>(i)], free_cells[j]);
    const int cell = free_cells[static_cast<std::size_t>(i)];
    const auto heading = static_cast<Heading>(rng.UniformInt(4));
    s.agents.push_back({cell / layout_.width, cell % layout_.width, heading, -1});
  }
  SetState(std::move(s), rng.NextU64());
}

void RwareEnv::SetState(RwareState s, std::uint64_t seed) {
  const int cells = layout_.width * layout_.height;
  if (s.agents.size() != static_cast<std::size_t>(cfg_.n_agents)) {
    throw std::invalid_argument("state agent count does not match config");
  }
  if (s.shelves.size() != layout_.shelf_homes.size()) {
    throw std::invalid_argument("state shelf count does not match layout");
  }
  if (s.step < 0 || s.step > cfg_.max_steps || s.deliveries < 0) {
    throw std::invalid_argument("state counters out of range");
  }
  std::vector<char> agent_at(static_cast<std::size_t>(cells), 0);
  std::vector<int> carrier(s.shelves.size(), -1);
  for (std::size_t i = 0; i < s.agents.size(); ++i) {
    const auto& a = s.agents[i];
    if (a.row < 0 || a.row >= layout_.height || a.col < 0 || a.col >= layout_.width) {
      throw std::invalid_argument("agent out of bounds");
    }
    char& slot = agent_at[static_cast<std::size_t>(Cell(a.row, a.col))];
    if (slot) throw std::invalid_argument("two agents share a cell");
    slot = 1;
    if (a.carrying >= 0) {
      if (static_cast<std::size_t>(a.carrying) >= s.shelves.size()) {
        throw std::invalid_argument("carried shelf id out of range");
      }
      if (carrier[static_cast<std::size_t>(a.carrying)] >= 0) {
        throw std::invalid_argument("shelf carried by two agents");
      }
      carrier[static_cast<std::size_t>(a.carrying)] = static_cast<int>(i);
      if (s.shelves[static_cast<std::size_t>(a.carrying)].cell != Cell(a.row, a.col)) {
        throw std::invalid_argument("carried shelf not at carrier position");
      }
    }
  }
  std::vector<char> stationed(static_cast<std::size_t>(cells), 0);
  int requested = 0;
  for (std::size_t k = 0; k < s.shelves.size(); ++k) {
    const auto& sh = s.shelves[k];
    if (sh.cell < 0 || sh.cell >= cells) throw std::invalid_argument("shelf out of bounds");
    requested += sh.requested ? 1 : 0;
    if (carrier[k] >= 0) continue;
    if (!IsShelfHome(sh.cell)) throw std::invalid_argument("stationed shelf off a shelf slot");
    char& slot = stationed[static_cast<std::size_t>(sh.cell)];
    if (slot) throw std::invalid_argument("two shelves share a slot");
    slot = 1;
  }
  if (requested != cfg_.requests()) throw std::invalid_argument("requested shelf count mismatch");
  state_ = std::move(s);
  rng_ = Rng(seed);
}

int RwareEnv::RequestedCount() const {
  return static_cast<int>(std::count_if(state_.shelves.begin(), state_.shelves.end(),
                                        [](const RwareShelf& s) { return s.requested; }));
}

void RwareEnv::RequestNewShelf() {
  std::vector<char> carried(state_.shelves.size(), 0);
  for (const auto& a : state_.agents) {
    if (a.carrying >= 0) carried[static_cast<std::size_t>(a.carrying)] = 1;
  }
  std::vector<int> candidates;
  for (std::size_t k = 0; k < state_.shelves.size(); ++k) {
    if (!state_.shelves[k].requested && !carried[k]) candidates.push_back(static_cast<int>(k));
  }
  // Validate() guarantees at least one candidate.
  const auto pick = candidates[rng_.UniformInt(candidates.size())];
  state_.shelves[static_cast<std::size_t>(pick)].requested = true;
}

StepResult RwareEnv::Step(const JointAction& actions) {
  CheckJointAction(actions);
  const int cells = layout_.width * layout_.height;
  const std::size_t n = state_.agents.size();

  for (std::size_t i = 0; i < n; ++i) {
    auto& a = state_.agents[i];
    const int h = static_cast<int>(a.heading);
    if (actions[i] == kLeft) a.heading = static_cast<Heading>((h + 3) % 4);
    if (actions[i] == kRight) a.heading = static_cast<Heading>((h + 1) % 4);
  }

  std::vector<char> agent_at(static_cast<std::size_t>(cells), 0);
  std::vector<char> shelf_stationed(static_cast<std::size_t>(cells), 0);
  for (const auto& a : state_.agents) agent_at[static_cast<std::size_t>(Cell(a.row, a.col))] = 1;
  {
    std::vector<char> carried(state_.shelves.size(), 0);
    for (const auto& a : state_.agents) {
      if (a.carrying >= 0) carried[static_cast<std::size_t>(a.carrying)] = 1;
    }
    for (std::size_t k = 0; k < state_.shelves.size(); ++k) {
      if (!carried[k]) shelf_stationed[static_cast<std::size_t>(state_.shelves[k].cell)] = 1;
    }
  }

  // Forward moves: blocked by walls, by agents present at the start of the
  // tick, and (when carrying) by stationed shelves. Contested cells block all.
  std::vector<int> target(n, -1);
  std::vector<int> claims(static_cast<std::size_t>(cells), 0);
  for (std::size_t i = 0; i < n; ++i) {
    if (actions[i] != kForward) continue;
    const auto& a = state_.agents[i];
    const int h = static_cast<int>(a.heading);
    const int r = a.row + kDr[h];
    const int c = a.col + kDc[h];
    if (r < 0 || r >= layout_.height || c < 0 || c >= layout_.width) continue;
    const int cell = Cell(r, c);
    if (agent_at[static_cast<std::size_t>(cell)]) continue;
    if (a.carrying >= 0 && shelf_stationed[static_cast<std::size_t>(cell)]) continue;
    target[i] = cell;
    ++claims[static_cast<std::size_t>(cell)];
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (target[i] < 0 || claims[static_cast<std::size_t>(target[i])] != 1) continue;
    auto& a = state_.agents[i];
    a.row = target[i] / layout_.width;
    a.col = target[i] % layout_.width;
    if (a.carrying >= 0) state_.shelves[static_cast<std::size_t>(a.carrying)].cell = target[i];
  }

  for (std::size_t i = 0; i < n; ++i) {
    if (actions[i] != kToggleLoad) continue;
    auto& a = state_.agents[i];
    const int cell = Cell(a.row, a.col);
    if (a.carrying < 0) {
      if (!shelf_stationed[static_cast<std::size_t>(cell)]) continue;
      for (std::size_t k = 0; k < state_.shelves.size(); ++k) {
        if (state_.shelves[k].cell == cell) {
          a.carrying = static_cast<int>(k);
          shelf_stationed[static_cast<std::size_t>(cell)] = 0;
          break;
        }
      }
    } else if (IsShelfHome(cell) && !shelf_stationed[static_cast<std::size_t>(cell)]) {
      state_.shelves[static_cast<std::size_t>(a.carrying)].cell = cell;
      shelf_stationed[static_cast<std::size_t>(cell)] = 1;
      a.carrying = -1;
    }
  }

  int delivered = 0;
  for (auto& a : state_.agents) {
    if (a.carrying < 0) continue;
    auto& shelf = state_.shelves[static_cast<std::size_t>(a.carrying)];
    if (shelf.requested && IsGoal(Cell(a.row, a.col))) {
      shelf.requested = false;
      ++delivered;
      RequestNewShelf();
    }
  }
  state_.deliveries += delivered;
  ++state_.step;

  StepResult out;
  out.reward = static_cast<double>(delivered);
  out.done = done();
  out.terminated = false;
  out.info = {{"deliveries", state_.deliveries}};
  return out;
}

std::size_t RwareEnv::CellOffset(int dr, int dc) const {
  const int side = 2 * cfg_.max_sight + 1;
  return kSelfFeatures +
         kCellFeatures * static_cast<std::size_t>((dr + cfg_.max_sight) * side + (dc + cfg_.max_sight));
}

Observation RwareEnv::Observe(std::size_t agent, SightRange d) const {
  CheckObserveArgs(agent, d);
  Observation o(obs_len(), 0.0);
  const auto& self = state_.agents[agent];
  o[0] = self.carrying >= 0 ? 1.0 : 0.0;
  o[1 + static_cast<std::size_t>(self.heading)] = 1.0;

  for (std::size_t j = 0; j < state_.agents.size(); ++j) {
    const auto& other = state_.agents[j];
    const int dr = other.row - self.row;
    const int dc = other.col - self.col;
    if (std::max(std::abs(dr), std::abs(dc)) > d) continue;
    const std::size_t base = CellOffset(dr, dc);
    o[base] = 1.0;
    o[base + 1 + static_cast<std::size_t>(other.heading)] = 1.0;
  }
  for (const auto& shelf : state_.shelves) {
    const int dr = shelf.cell / layout_.width - self.row;
    const int dc = shelf.cell % layout_.width - self.col;
    if (std::max(std::abs(dr), std::abs(dc)) > d) continue;
    const std::size_t base = CellOffset(dr, dc);
    o[base + 5] = 1.0;
    o[base + 6] = shelf.requested ? 1.0 : 0.0;
  }
  return o;
}

nlohmann::json RwareEnv::ToJson() const {
  nlohmann::json agents = nlohmann::json::array();
  for (const auto& a : state_.agents) {
    agents.push_back({a.row, a.col, static_cast<int>(a.heading), a.carrying});
  }
  nlohmann::json shelves = nlohmann::json::array();
  for (const auto& s : state_.shelves) shelves.push_back({s.home, s.cell, s.requested});
  return {{"env", "rware"},
          {"layout", cfg_.layout},
          {"agents", agents},
          {"shelves", shelves},
          {"goals", layout_.goals},
          {"step", state_.step},
          {"deliveries", state_.deliveries}};
}

std::string RwareEnv::Render() const {
  std::vector<std::string> grid(static_cast<std::size_t>(layout_.height),
                                std::string(static_cast<std::size_t>(layout_.width), '.'));
  auto at = [&](int cell) -> char& {
    return grid[static_cast<std::size_t>(cell / layout_.width)][static_cast<std::size_t>(cell % layout_.width)];
  };
  for (int g : layout_.goals) at(g) = 'G';
  for (const auto& s : state_.shelves) at(s.cell) = s.requested ? 'R' : 'S';
  for (const auto& a : state_.agents) at(Cell(a.row, a.col)) = "^>v<"[static_cast<int>(a.heading)];
  std::string out;
  for (const auto& row : grid) out += row + '\n';
  return out;
}

}  // namespace dsr
