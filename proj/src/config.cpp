#include "dsr/config.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <istream>
#include <set>
#include <sstream>

#include "dsr/digest.hpp"
#include "dsr/error.hpp"

namespace dsr {

namespace {

const std::set<std::string> kLbfKeys = {"env.width", "env.height", "env.n_foods", "env.coop", "env.max_agent_level"};
const std::set<std::string> kRwareKeys = {"env.layout", "env.max_sight", "env.n_requests"};

std::string Trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return "";
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

template <typename T>
T ParseNumber(const std::string& key, const std::string& value) {
  T v{};
  const auto res = std::from_chars(value.data(), value.data() + value.size(), v);
  if (value.empty() || res.ec != std::errc() || res.ptr != value.data() + value.size()) {
    throw ConfigError(key, "cannot parse '" + value + "' as a number");
  }
  return v;
}

int ParseInt(const std::string& key, const std::string& value) { return ParseNumber<int>(key, value); }
double ParseReal(const std::string& key, const std::string& value) { return ParseNumber<double>(key, value); }

bool ParseBool(const std::string& key, const std::string& value) {
  if (value == "true") return true;
  if (value == "false") return false;
  throw ConfigError(key, "expected true or false, got '" + value + "'");
}

std::vector<std::string> Split(const std::string& s, char sep) {
  std::vector<std::string> parts;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, sep)) parts.push_back(Trim(item));
  return parts;
}

std::string Bool(bool b) { return b ? "true" : "false"; }

}  // namespace

const std::vector<std::string>& KnownConfigKeys() {
  static const std::vector<std::string> keys = {
      "env.name",          "env.width",           "env.height",           "env.n_agents",
      "env.n_foods",       "env.coop",            "env.max_steps",        "env.max_agent_level",
      "env.layout",        "env.max_sight",       "env.n_requests",       "algo.name",
      "algo.gamma",        "algo.lr",             "algo.hidden",          "algo.hidden_layers",
      "algo.batch_size",   "algo.buffer_episodes", "algo.eps_start",      "algo.eps_finish",
      "algo.eps_anneal",   "algo.eval_eps",       "algo.target_update",   "algo.grad_clip",
      "algo.standardise_rewards", "algo.mixing_embed", "algo.hypernet_embed", "dsr.enabled",
      "dsr.sight_set",     "dsr.c",               "dsr.w",                "dsr.reward_divisor",
      "train.fixed_d",     "train.schedule",      "train.episodes",       "train.eval_interval",
      "train.eval_episodes", "train.seed"};
  return keys;
}

std::string ResolveConfigKey(const std::string& key) {
  const auto& keys = KnownConfigKeys();
  if (std::find(keys.begin(), keys.end(), key) != keys.end()) return key;
  std::vector<std::string> matches;
  for (const auto& k : keys) {
    if (k.size() > key.size() && k.compare(k.size() - key.size(), key.size(), key) == 0 &&
        k[k.size() - key.size() - 1] == '.') {
      matches.push_back(k);
    }
  }
  if (matches.size() == 1) return matches.front();
  if (matches.empty()) throw ConfigError(key, "unknown config key");
  throw ConfigError(key, "ambiguous key (matches " + matches[0] + " and " + matches[1] + ")");
}

ConfigMap ParseConfigText(std::istream& in) {
  ConfigMap entries;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = Trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("line " + std::to_string(line_no), "expected 'key = value'");
    }
    const std::string key = Trim(line.substr(0, eq));
    const std::string value = Trim(line.substr(eq + 1));
    const auto& keys = KnownConfigKeys();
    if (std::find(keys.begin(), keys.end(), key) == keys.end()) throw ConfigError(key, "unknown config key");
    if (!entries.emplace(key, value).second) throw ConfigError(key, "duplicate key");
  }
  return entries;
}

ConfigMap ParseConfigText(const std::string& text) {
  std::istringstream in(text);
  return ParseConfigText(in);
}

std::vector<SightRange> ParseSightList(const std::string& key, const std::string& value) {
  std::vector<SightRange> out;
  if (Trim(value).empty()) return out;
  for (const auto& part : Split(value, ',')) out.push_back(ParseInt(key, part));
  return out;
}

std::vector<SchedulePhase> ParseSchedule(const std::string& value) {
  const std::string key = "train.schedule";
  std::vector<SchedulePhase> out;
  if (Trim(value).empty()) return out;
  for (const auto& part : Split(value, ',')) {
    const auto colon = part.find(':');
    if (colon == std::string::npos) throw ConfigError(key, "phase '" + part + "' is not start:d");
    out.push_back({ParseReal(key, Trim(part.substr(0, colon))), ParseInt(key, Trim(part.substr(colon + 1)))});
  }
  return out;
}

std::string FormatSchedule(const std::vector<SchedulePhase>& schedule) {
  std::string out;
  for (const auto& p : schedule) {
    if (!out.empty()) out += ',';
    out += FormatDouble(p.start) + ":" + std::to_string(p.d);
  }
  return out;
}

TrainConfig ConfigFromMap(const ConfigMap& entries) {
  TrainConfig cfg;
  auto get = [&](const std::string& key) -> const std::string* {
    const auto it = entries.find(key);
    return it == entries.end() ? nullptr : &it->second;
  };
  if (const auto* v = get("env.name")) cfg.env.name = *v;
  if (cfg.env.name != "lbf" && cfg.env.name != "rware") {
    throw ConfigError("env.name", "unknown environment '" + cfg.env.name + "' (expected lbf or rware)");
  }
  const auto& foreign = cfg.env.name == "lbf" ? kRwareKeys : kLbfKeys;
  for (const auto& [key, value] : entries) {
    const auto& keys = KnownConfigKeys();
    if (std::find(keys.begin(), keys.end(), key) == keys.end()) throw ConfigError(key, "unknown config key");
    if (foreign.count(key)) throw ConfigError(key, "does not apply to env.name = " + cfg.env.name);
  }

  for (const auto& [key, v] : entries) {
    if (key == "env.name") continue;
    if (cfg.env.name == "lbf") {
      auto& e = cfg.env.lbf;
      if (key == "env.width") e.width = ParseInt(key, v);
      else if (key == "env.height") e.height = ParseInt(key, v);
      else if (key == "env.n_agents") e.n_agents = ParseInt(key, v);
      else if (key == "env.n_foods") e.n_foods = ParseInt(key, v);
      else if (key == "env.coop") e.coop = ParseBool(key, v);
      else if (key == "env.max_steps") e.max_steps = ParseInt(key, v);
      else if (key == "env.max_agent_level") e.max_agent_level = ParseInt(key, v);
    } else {
      auto& e = cfg.env.rware;
      if (key == "env.layout") e.layout = v;
      else if (key == "env.n_agents") e.n_agents = ParseInt(key, v);
      else if (key == "env.n_requests") e.n_requests = ParseInt(key, v);
      else if (key == "env.max_steps") e.max_steps = ParseInt(key, v);
      else if (key == "env.max_sight") e.max_sight = ParseInt(key, v);
    }
    auto& a = cfg.algo;
    if (key == "algo.name") {
      try {
        a.algo = marl::ParseAlgo(v);
      } catch (const std::invalid_argument& err) {
        throw ConfigError("algo.name", "unknown algorithm '" + v + "' (expected iql, vdn or qmix)");
      }
    }
    else if (key == "algo.gamma") a.gamma = ParseReal(key, v);
    else if (key == "algo.lr") a.lr = ParseReal(key, v);
    else if (key == "algo.hidden") a.hidden = ParseInt(key, v);
    else if (key == "algo.hidden_layers") a.hidden_layers = ParseInt(key, v);
    else if (key == "algo.batch_size") a.batch_size = ParseInt(key, v);
    else if (key == "algo.buffer_episodes") a.buffer_episodes = ParseInt(key, v);
    else if (key == "algo.eps_start") a.eps_start = ParseReal(key, v);
    else if (key == "algo.eps_finish") a.eps_finish = ParseReal(key, v);
    else if (key == "algo.eps_anneal") a.eps_anneal = ParseNumber<std::int64_t>(key, v);
    else if (key == "algo.eval_eps") a.eval_eps = ParseReal(key, v);
    else if (key == "algo.target_update") a.target_update = ParseInt(key, v);
    else if (key == "algo.grad_clip") a.grad_clip = ParseReal(key, v);
    else if (key == "algo.standardise_rewards") a.standardise_rewards = ParseBool(key, v);
    else if (key == "algo.mixing_embed") a.mixing_embed = ParseInt(key, v);
    else if (key == "algo.hypernet_embed") a.hypernet_embed = ParseInt(key, v);
    else if (key == "dsr.enabled") cfg.dsr.enabled = ParseBool(key, v);
    else if (key == "dsr.sight_set") cfg.dsr.sight_set = ParseSightList(key, v);
    else if (key == "dsr.c") cfg.dsr.c = ParseReal(key, v);
    else if (key == "dsr.w") {
      const auto w = ParseNumber<long long>(key, v);
      if (w < 1) throw ConfigError(key, "must be >= 1");
      cfg.dsr.w = static_cast<std::size_t>(w);
    }
    else if (key == "dsr.reward_divisor") cfg.dsr.reward_divisor = ParseReal(key, v);
    else if (key == "train.fixed_d") {
      if (!v.empty()) cfg.fixed_d = ParseInt(key, v);
    }
    else if (key == "train.schedule") cfg.schedule = ParseSchedule(v);
    else if (key == "train.episodes") cfg.episodes = ParseInt(key, v);
    else if (key == "train.eval_interval") cfg.eval_interval = ParseInt(key, v);
    else if (key == "train.eval_episodes") cfg.eval_episodes = ParseInt(key, v);
    else if (key == "train.seed") cfg.seed = ParseNumber<std::uint64_t>(key, v);
  }
  cfg.Validate();
  return cfg;
}

TrainConfig LoadConfig(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file " + path.string());
  return ConfigFromMap(ParseConfigText(in));
}

ConfigMap ConfigToMap(const TrainConfig& cfg) {
  ConfigMap m;
  m["env.name"] = cfg.env.name;
  if (cfg.env.name == "lbf") {
    const auto& e = cfg.env.lbf;
    m["env.width"] = std::to_string(e.width);
    m["env.height"] = std::to_string(e.height);
    m["env.n_agents"] = std::to_string(e.n_agents);
    m["env.n_foods"] = std::to_string(e.n_foods);
    m["env.coop"] = Bool(e.coop);
    m["env.max_steps"] = std::to_string(e.max_steps);
    m["env.max_agent_level"] = std::to_string(e.max_agent_level);
  } else {
    const auto& e = cfg.env.rware;
    m["env.layout"] = e.layout;
    m["env.n_agents"] = std::to_string(e.n_agents);
    m["env.n_requests"] = std::to_string(e.n_requests);
    m["env.max_steps"] = std::to_string(e.max_steps);
    m["env.max_sight"] = std::to_string(e.max_sight);
  }
  const auto& a = cfg.algo;
  m["algo.name"] = marl::AlgoName(a.algo);
  m["algo.gamma"] = FormatDouble(a.gamma);
  m["algo.lr"] = FormatDouble(a.lr);
  m["algo.hidden"] = std::to_string(a.hidden);
  m["algo.hidden_layers"] = std::to_string(a.hidden_layers);
  m["algo.batch_size"] = std::to_string(a.batch_size);
  m["algo.buffer_episodes"] = std::to_string(a.buffer_episodes);
  m["algo.eps_start"] = FormatDouble(a.eps_start);
  m["algo.eps_finish"] = FormatDouble(a.eps_finish);
  m["algo.eps_anneal"] = std::to_string(a.eps_anneal);
  m["algo.eval_eps"] = FormatDouble(a.eval_eps);
  m["algo.target_update"] = std::to_string(a.target_update);
  m["algo.grad_clip"] = FormatDouble(a.grad_clip);
  m["algo.standardise_rewards"] = Bool(a.standardise_rewards);
  m["algo.mixing_embed"] = std::to_string(a.mixing_embed);
  m["algo.hypernet_embed"] = std::to_string(a.hypernet_embed);
  m["dsr.enabled"] = Bool(cfg.dsr.enabled);
  std::string arms;
  for (SightRange d : cfg.dsr.sight_set) arms += (arms.empty() ? "" : ",") + std::to_string(d);
  m["dsr.sight_set"] = arms;
  m["dsr.c"] = FormatDouble(cfg.dsr.c);
  m["dsr.w"] = std::to_string(cfg.dsr.w);
  m["dsr.reward_divisor"] = FormatDouble(cfg.dsr.reward_divisor);
  if (cfg.fixed_d) m["train.fixed_d"] = std::to_string(*cfg.fixed_d);
  if (!cfg.schedule.empty()) m["train.schedule"] = FormatSchedule(cfg.schedule);
  m["train.episodes"] = std::to_string(cfg.episodes);
  m["train.eval_interval"] = std::to_string(cfg.eval_interval);
  m["train.eval_episodes"] = std::to_string(cfg.eval_episodes);
  m["train.seed"] = std::to_string(cfg.seed);
  return m;
}

std::string SerializeConfig(const TrainConfig& cfg) {
  std::string out;
  for (const auto& [key, value] : ConfigToMap(cfg)) out += key + " = " + value + "\n";
  return out;
}

std::string ConfigHash(const TrainConfig& cfg) {
  auto m = ConfigToMap(cfg);
  m.erase("train.seed");
  std::string text;
  for (const auto& [key, value] : m) text += key + " = " + value + "\n";
  return Sha1Hex(text);
}

void ApplyOverride(ConfigMap& entries, const std::string& key, const std::string& value) {
  const std::string full = ResolveConfigKey(key);
  if (full == "train.fixed_d") {
    entries.erase("train.schedule");
    entries["dsr.enabled"] = "false";
  } else if (full == "train.schedule") {
    entries.erase("train.fixed_d");
    entries["dsr.enabled"] = "false";
  } else if (full == "dsr.enabled" && value == "true") {
    entries.erase("train.fixed_d");
    entries.erase("train.schedule");
  }
  entries[full] = value;
}

}  // namespace dsr
