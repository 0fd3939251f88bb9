#include "dsr/lbf.hpp"

#include <algorithm>
#include <cstdlib>
#include <numeric>
#include <stdexcept>

#include "dsr/rng.hpp"

namespace dsr {

void LbfConfig::Validate() const {
  auto fail = [](const std::string& key, const std::string& why) {
    throw std::invalid_argument("env." + key + ": " + why);
  };
  if (width < 1) fail("width", "must be >= 1");
  if (height < 1) fail("height", "must be >= 1");
  if (n_agents < 1) fail("n_agents", "must be >= 1");
  if (n_foods < 1) fail("n_foods", "must be >= 1");
  if (n_agents + n_foods > width * height) fail("n_foods", "agents and foods exceed grid cells");
  if (max_steps < 1) fail("max_steps", "must be >= 1");
  if (max_agent_level < 1) fail("max_agent_level", "must be >= 1");
}

LbfEnv::LbfEnv(LbfConfig cfg, std::uint64_t seed) : cfg_(cfg) {
  cfg_.Validate();
  Reset(seed);
}

void LbfEnv::Reset(std::uint64_t seed) {
  Rng rng(seed);
  const int cells = cfg_.width * cfg_.height;
  const int entities = cfg_.n_agents + cfg_.n_foods;

  // Partial Fisher-Yates: the first `entities` slots are distinct uniform cells.
  std::vector<int> order(static_cast<std::size_t>(cells));
  std::iota(order.begin(), order.end(), 0);
  for (int i = 0; i < entities; ++i) {
    const auto j = i + static_cast<int>(rng.UniformInt(static_cast<std::uint64_t>(cells - i)));
    std::swap(order[static_cast<std::size_t>(i)], order[static_cast<std::size_t>(j)]);
  }

  LbfState s;
  for (int i = 0; i < cfg_.n_agents; ++i) {
    const int cell = order[static_cast<std::size_t>(i)];
    const int level = static_cast<int>(rng.UniformRange(1, cfg_.max_agent_level));
    s.agents.push_back({cell / cfg_.width, cell % cfg_.width, level});
  }
  const int team_level = std::accumulate(s.agents.begin(), s.agents.end(), 0,
                                         [](int acc, const LbfAgent& a) { return acc + a.level; });
  for (int i = 0; i < cfg_.n_foods; ++i) {
    const int cell = order[static_cast<std::size_t>(cfg_.n_agents + i)];
    int level = team_level;
    if (!cfg_.coop) {
      int cap = s.agents[0].level;
      if (cfg_.n_agents >= 2) {
        const auto a = rng.UniformInt(static_cast<std::uint64_t>(cfg_.n_agents));
        auto b = rng.UniformInt(static_cast<std::uint64_t>(cfg_.n_agents - 1));
        if (b >= a) ++b;
        cap = s.agents[a].level + s.agents[b].level;
      }
      level = static_cast<int>(rng.UniformRange(1, cap));
    }
    s.foods.push_back({cell / cfg_.width, cell % cfg_.width, level, false});
  }
  SetState(std::move(s));
}

void LbfEnv::SetState(LbfState s) {
  if (s.agents.size() != static_cast<std::size_t>(cfg_.n_agents) ||
      s.foods.size() != static_cast<std::size_t>(cfg_.n_foods)) {
    throw std::invalid_argument("state entity counts do not match config");
  }
  if (s.step < 0 || s.step > cfg_.max_steps) throw std::invalid_argument("state step out of range");
  std::vector<char> occupied(static_cast<std::size_t>(cfg_.width * cfg_.height), 0);
  auto claim = [&](int r, int c) {
    if (r < 0 || r >= cfg_.height || c < 0 || c >= cfg_.width) {
      throw std::invalid_argument("entity out of bounds");
    }
    char& cell = occupied[static_cast<std::size_t>(r * cfg_.width + c)];
    if (cell) throw std::invalid_argument("two entities share a cell");
    cell = 1;
  };
  for (const auto& a : s.agents) {
    if (a.level < 1) throw std::invalid_argument("agent level must be >= 1");
    claim(a.row, a.col);
  }
  int total = 0, collected = 0, n_collected = 0;
  for (const auto& f : s.foods) {
    if (f.level < 1) throw std::invalid_argument("food level must be >= 1");
    total += f.level;
    if (f.collected) {
      collected += f.level;
      ++n_collected;
    } else {
      claim(f.row, f.col);
    }
  }
  state_ = std::move(s);
  total_food_level_ = total;
  collected_level_ = collected;
  foods_collected_ = n_collected;
  done_ = n_collected == cfg_.n_foods || state_.step >= cfg_.max_steps;
}

StepResult LbfEnv::Step(const JointAction& actions) {
  CheckJointAction(actions);
  const int w = cfg_.width;
  const int h = cfg_.height;
  std::vector<char> occupied(static_cast<std::size_t>(w * h), 0);
  for (const auto& a : state_.agents) occupied[static_cast<std::size_t>(a.row * w + a.col)] = 1;
  for (const auto& f : state_.foods) {
    if (!f.collected) occupied[static_cast<std::size_t>(f.row * w + f.col)] = 1;
  }

  // Moves into cells occupied at the start of the tick fail; contested
  // empty cells block every contender.
  const std::size_t n = state_.agents.size();
  std::vector<int> target(n, -1);
  std::vector<int> claims(static_cast<std::size_t>(w * h), 0);
  for (std::size_t i = 0; i < n; ++i) {
    int r = state_.agents[i].row;
    int c = state_.agents[i].col;
    switch (actions[i]) {
      case kUp: --r; break;
      case kDown: ++r; break;
      case kLeft: --c; break;
      case kRight: ++c; break;
      default: continue;
    }
    if (r < 0 || r >= h || c < 0 || c >= w) continue;
    const int cell = r * w + c;
    if (occupied[static_cast<std::size_t>(cell)]) continue;
    target[i] = cell;
    ++claims[static_cast<std::size_t>(cell)];
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (target[i] < 0 || claims[static_cast<std::size_t>(target[i])] != 1) continue;
    state_.agents[i].row = target[i] / w;
    state_.agents[i].col = target[i] % w;
  }

  int gained = 0;
  for (auto& f : state_.foods) {
    if (f.collected) continue;
    int load = 0;
    for (std::size_t i = 0; i < n; ++i) {
      if (actions[i] != kLoad) continue;
      const auto& a = state_.agents[i];
      if (std::abs(a.row - f.row) + std::abs(a.col - f.col) == 1) load += a.level;
    }
    if (load >= f.level) {
      f.collected = true;
      gained += f.level;
      ++foods_collected_;
    }
  }
  collected_level_ += gained;
  ++state_.step;

  StepResult out;
  out.reward = static_cast<double>(gained) / static_cast<double>(total_food_level_);
  out.terminated = foods_collected_ == cfg_.n_foods;
  out.done = out.terminated || state_.step >= cfg_.max_steps;
  out.info = {{"foods_collected", foods_collected_}, {"collected_level", collected_level_}};
  done_ = out.done;
  return out;
}

bool LbfEnv::Visible(std::size_t agent, int row, int col, SightRange d) const {
  const auto& a = state_.agents.at(agent);
  return std::max(std::abs(a.row - row), std::abs(a.col - col)) <= d;
}

Observation LbfEnv::Observe(std::size_t agent, SightRange d) const {
  CheckObserveArgs(agent, d);
  Observation o(obs_len());
  auto put = [&o](std::size_t slot, double r, double c, double lvl) {
    o[3 * slot] = r;
    o[3 * slot + 1] = c;
    o[3 * slot + 2] = lvl;
  };
  const auto& self = state_.agents[agent];
  put(0, self.row, self.col, self.level);
  std::size_t slot = 1;
  for (const auto& f : state_.foods) {
    if (!f.collected && Visible(agent, f.row, f.col, d)) {
      put(slot, f.row, f.col, f.level);
    } else {
      put(slot, kDefaultCoord, kDefaultCoord, kDefaultLevel);
    }
    ++slot;
  }
  for (std::size_t j = 0; j < state_.agents.size(); ++j) {
    if (j == agent) continue;
    const auto& other = state_.agents[j];
    if (Visible(agent, other.row, other.col, d)) {
      put(slot, other.row, other.col, other.level);
    } else {
      put(slot, kDefaultCoord, kDefaultCoord, kDefaultLevel);
    }
    ++slot;
  }
  return o;
}

nlohmann::json LbfEnv::ToJson() const {
  nlohmann::json agents = nlohmann::json::array();
  for (const auto& a : state_.agents) agents.push_back({a.row, a.col, a.level});
  nlohmann::json foods = nlohmann::json::array();
  for (const auto& f : state_.foods) foods.push_back({f.row, f.col, f.level, f.collected});
  return {{"env", "lbf"},
          {"agents", agents},
          {"foods", foods},
          {"step", state_.step},
          {"total_food_level", total_food_level_},
          {"done", done_}};
}

std::string LbfEnv::Render() const {
  std::vector<std::string> grid(static_cast<std::size_t>(cfg_.height),
                                std::string(static_cast<std::size_t>(cfg_.width), '.'));
  for (const auto& f : state_.foods) {
    if (!f.collected) grid[f.row][f.col] = static_cast<char>('0' + std::min(f.level, 9));
  }
  for (std::size_t i = 0; i < state_.agents.size(); ++i) {
    grid[state_.agents[i].row][state_.agents[i].col] = static_cast<char>('A' + i % 26);
  }
  std::string out;
  for (const auto& row : grid) out += row + '\n';
  return out;
}

}  // namespace dsr
