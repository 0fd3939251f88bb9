#include "dsr/trainer.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <istream>
#include <ostream>
#include <set>
#include <sstream>

#include "dsr/error.hpp"
#include "dsr/rng.hpp"

namespace dsr {

namespace {

/// Rethrows a module-level std::invalid_argument ("section.key: why") as a
/// ConfigError carrying the key.
[[noreturn]] void RethrowAsConfigError(const std::invalid_argument& e, const std::string& fallback_key) {
  const std::string msg = e.what();
  const auto colon = msg.find(": ");
  if (colon != std::string::npos && msg.find('.') < colon) {
    throw ConfigError(msg.substr(0, colon), msg.substr(colon + 2));
  }
  throw ConfigError(fallback_key, msg);
}

}  // namespace

void EnvConfig::Validate() const {
  try {
    if (name == "lbf") {
      lbf.Validate();
    } else if (name == "rware") {
      rware.Validate();
    } else {
      throw ConfigError("env.name", "unknown environment '" + name + "' (expected lbf or rware)");
    }
  } catch (const ConfigError&) {
    throw;
  } catch (const std::invalid_argument& e) {
    RethrowAsConfigError(e, "env.name");
  }
}

std::unique_ptr<Environment> EnvConfig::Make(std::uint64_t seed) const {
  if (name == "lbf") return std::make_unique<LbfEnv>(lbf, seed);
  if (name == "rware") return std::make_unique<RwareEnv>(rware, seed);
  throw ConfigError("env.name", "unknown environment '" + name + "'");
}

SightRange EnvConfig::MaxSight() const {
  if (name == "lbf") return std::max(lbf.width, lbf.height);
  return rware.max_sight;
}

TrainConfig::Mode TrainConfig::mode() const {
  if (dsr.enabled) return Mode::kDsr;
  if (fixed_d) return Mode::kFixed;
  return Mode::kSchedule;
}

void TrainConfig::Validate() const {
  env.Validate();
  try {
    algo.Validate();
  } catch (const std::invalid_argument& e) {
    RethrowAsConfigError(e, "algo.name");
  }
  const int active = (dsr.enabled ? 1 : 0) + (fixed_d ? 1 : 0) + (schedule.empty() ? 0 : 1);
  if (active != 1) {
    throw ConfigError("dsr.enabled", "exactly one of dsr.enabled, train.fixed_d, train.schedule must be set");
  }
  const SightRange max_sight = env.MaxSight();
  if (dsr.enabled) {
    try {
      ArmSet arms(dsr.sight_set);
      if (arms.max() > max_sight) {
        throw std::invalid_argument("sight range " + std::to_string(arms.max()) + " exceeds environment maximum " +
                                    std::to_string(max_sight));
      }
    } catch (const std::invalid_argument& e) {
      throw ConfigError("dsr.sight_set", e.what());
    }
  }
  if (!std::isfinite(dsr.c) || dsr.c < 0.0) throw ConfigError("dsr.c", "must be finite and non-negative");
  if (dsr.w < 1) throw ConfigError("dsr.w", "must be >= 1");
  if (!std::isfinite(dsr.reward_divisor) || dsr.reward_divisor <= 0.0) {
    throw ConfigError("dsr.reward_divisor", "must be finite and positive");
  }
  if (fixed_d && (*fixed_d < 0 || *fixed_d > max_sight)) {
    throw ConfigError("train.fixed_d", "sight range " + std::to_string(*fixed_d) + " outside [0, " +
                                           std::to_string(max_sight) + "]");
  }
  if (!schedule.empty()) {
    if (schedule.front().start != 0.0) throw ConfigError("train.schedule", "first phase must start at 0");
    for (std::size_t i = 0; i < schedule.size(); ++i) {
      const auto& p = schedule[i];
      if (!(p.start >= 0.0 && p.start < 1.0)) throw ConfigError("train.schedule", "phase start outside [0, 1)");
      if (i > 0 && p.start <= schedule[i - 1].start) throw ConfigError("train.schedule", "phases are unordered");
      if (p.d < 0 || p.d > max_sight) throw ConfigError("train.schedule", "phase sight range out of range");
    }
  }
  if (episodes < 1) throw ConfigError("train.episodes", "must be >= 1");
  if (eval_interval < 1) throw ConfigError("train.eval_interval", "must be >= 1");
  if (eval_episodes < 1) throw ConfigError("train.eval_episodes", "must be >= 1");
}

SightRange ScheduledSight(const std::vector<SchedulePhase>& schedule, int e, int total) {
  if (schedule.empty()) throw std::invalid_argument("empty schedule");
  const int index = e - 1;  // 0-based episode
  SightRange d = schedule.front().d;
  for (const auto& p : schedule) {
    const auto first = static_cast<int>(std::llround(p.start * total));
    if (index >= first) d = p.d;
  }
  return d;
}

std::string FormatDouble(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

// ---------------------------------------------------------------------------

double Evaluate(const marl::QLearner& learner, const Environment& proto, SightRange d, int n_episodes, double eps,
                std::uint64_t seed) {
  if (n_episodes < 1) throw std::invalid_argument("evaluate: need at least one episode");
  auto env = proto.Clone();
  Rng rng(seed);
  const std::size_t n = env->n_agents();
  double total = 0.0;
  std::vector<Observation> obs(n);
  for (int k = 0; k < n_episodes; ++k) {
    env->Reset(rng.NextU64());
    double ret = 0.0;
    while (!env->done()) {
      for (std::size_t i = 0; i < n; ++i) obs[i] = env->Observe(i, d);
      const StepResult res = env->Step(learner.SelectActions(obs, eps, rng));
      ret += res.reward;
    }
    total += ret;
  }
  return total / static_cast<double>(n_episodes);
}

namespace {

enum class Policy { kBandit, kConstant, kScheduled };

struct LoopSpec {
  Policy policy;
  std::vector<SightRange> arms;  // tracker arms, increasing
  SightRange constant_d = 0;
  std::vector<SchedulePhase> schedule;
};

std::string ModeLabel(const LoopSpec& spec) {
  // A sight policy that can only ever produce one range is reported as fixed.
  if (spec.arms.size() == 1) return "fixed";
  return spec.policy == Policy::kBandit ? "dsr" : "schedule";
}

RunArtifact RunLoop(const TrainConfig& cfg, const LoopSpec& spec, const RowCallback& on_row) {
  cfg.Validate();
  const Rng root(cfg.seed);
  Rng init_rng = root.Fork("init");
  Rng env_rng = root.Fork("env");
  Rng explore_rng = root.Fork("explore");
  Rng replay_rng = root.Fork("replay");
  Rng eval_rng = root.Fork("eval");

  auto env = cfg.env.Make(0);
  const std::size_t n = env->n_agents();
  RunArtifact art;
  art.mode = ModeLabel(spec);
  art.learner = std::make_unique<marl::QLearner>(cfg.algo, n, env->obs_len(), env->action_count(), init_rng);
  marl::QLearner& learner = *art.learner;
  marl::ReplayBuffer buffer(static_cast<std::size_t>(cfg.algo.buffer_episodes));
  const marl::EpsilonSchedule eps_schedule(cfg.algo.eps_start, cfg.algo.eps_finish, cfg.algo.eps_anneal);

  // In bandit mode this is the meta-controller; otherwise it only tracks
  // windowed returns per sight range for the metrics columns.
  MetaController controller(ArmSet(spec.arms), cfg.dsr.c, cfg.dsr.w);
  const ArmSet& arms = controller.arms();
  art.metrics.arms = spec.arms;

  std::int64_t env_steps = 0;
  std::vector<Observation> obs(n);
  SightRange current_d = 0;
  for (int e = 1; e <= cfg.episodes; ++e) {
    std::size_t arm = 0;
    switch (spec.policy) {
      case Policy::kBandit: {
        const ArmChoice choice = controller.Select();
        arm = choice.arm;
        current_d = choice.d;
        break;
      }
      case Policy::kConstant:
        current_d = spec.constant_d;
        arm = arms.IndexOf(current_d);
        break;
      case Policy::kScheduled:
        current_d = ScheduledSight(spec.schedule, e, cfg.episodes);
        arm = arms.IndexOf(current_d);
        break;
    }

    env->Reset(env_rng.NextU64());
    marl::EpisodeRecord record(n, env->obs_len(), current_d);
    for (std::size_t i = 0; i < n; ++i) obs[i] = env->Observe(i, current_d);
    record.AddObservations(obs);
    double episode_return = 0.0;
    while (!env->done()) {
      const double eps = eps_schedule.Value(env_steps);
      const JointAction actions = learner.SelectActions(obs, eps, explore_rng);
      const StepResult res = env->Step(actions);
      ++env_steps;
      episode_return += res.reward;
      for (std::size_t i = 0; i < n; ++i) obs[i] = env->Observe(i, current_d);
      record.AddStep(actions, res.reward, res.terminated);
      record.AddObservations(obs);
    }
    buffer.Push(std::move(record));

    if (buffer.transitions() >= static_cast<std::size_t>(cfg.algo.batch_size)) {
      const auto batch = buffer.Sample(static_cast<std::size_t>(cfg.algo.batch_size), replay_rng);
      learner.TrainBatch(batch);
      learner.MaybeUpdateTarget();
    }

    controller.Update(arm, episode_return / cfg.dsr.reward_divisor);

    MetricsRow row;
    row.episode = e;
    row.env_steps = env_steps;
    row.mode = art.mode;
    row.selected_d = current_d;
    row.episode_return = episode_return;
    row.eps = eps_schedule.Value(env_steps);
    if (e % cfg.eval_interval == 0 || e == cfg.episodes) {
      const SightRange eval_d = spec.policy == Policy::kBandit ? controller.BestByMean().d : current_d;
      const double value = Evaluate(learner, *env, eval_d, cfg.eval_episodes, cfg.algo.eval_eps, eval_rng.NextU64());
      row.eval_return = value;
      art.final_eval_return = value;
    }
    for (std::size_t i = 0; i < arms.size(); ++i) {
      const std::size_t count = controller.WindowedCount(i);
      row.arm_counts.push_back(count);
      row.arm_means.push_back(count > 0 ? std::optional<double>(controller.WindowedMean(i)) : std::nullopt);
    }
    if (on_row) on_row(row);
    art.metrics.rows.push_back(std::move(row));
  }

  art.final_d = spec.policy == Policy::kBandit ? controller.BestByMean().d : current_d;
  art.controller = std::move(controller);
  return art;
}

}  // namespace

RunArtifact RunDsr(const TrainConfig& cfg, const RowCallback& on_row) {
  if (!cfg.dsr.enabled) throw ConfigError("dsr.enabled", "run_dsr requires dsr.enabled = true");
  cfg.Validate();
  return RunLoop(cfg, {Policy::kBandit, cfg.dsr.sight_set, 0, {}}, on_row);
}

RunArtifact RunFixed(const TrainConfig& cfg, SightRange d, const RowCallback& on_row) {
  TrainConfig c = cfg;
  c.dsr.enabled = false;
  c.schedule.clear();
  c.fixed_d = d;
  c.Validate();
  return RunLoop(c, {Policy::kConstant, {d}, d, {}}, on_row);
}

RunArtifact RunSchedule(const TrainConfig& cfg, const std::vector<SchedulePhase>& schedule,
                        const RowCallback& on_row) {
  TrainConfig c = cfg;
  c.dsr.enabled = false;
  c.fixed_d.reset();
  c.schedule = schedule;
  if (c.schedule.empty()) throw ConfigError("train.schedule", "schedule is empty");
  c.Validate();
  std::set<SightRange> distinct;
  for (const auto& p : schedule) distinct.insert(p.d);
  return RunLoop(c, {Policy::kScheduled, {distinct.begin(), distinct.end()}, 0, schedule}, on_row);
}

RunArtifact Train(const TrainConfig& cfg, const RowCallback& on_row) {
  cfg.Validate();
  switch (cfg.mode()) {
    case TrainConfig::Mode::kDsr: return RunDsr(cfg, on_row);
    case TrainConfig::Mode::kFixed: return RunFixed(cfg, *cfg.fixed_d, on_row);
    case TrainConfig::Mode::kSchedule: return RunSchedule(cfg, cfg.schedule, on_row);
  }
  throw std::logic_error("unreachable");
}

// ---------------------------------------------------------------------------

void Metrics::WriteCsv(std::ostream& out) const {
  out << "episode,env_steps,mode,selected_d,episode_return,eval_return,eps";
  for (SightRange d : arms) out << ",mean_d" << d << ",count_d" << d;
  out << '\n';
  for (const auto& r : rows) {
    out << r.episode << ',' << r.env_steps << ',' << r.mode << ',' << r.selected_d << ','
        << FormatDouble(r.episode_return) << ',' << (r.eval_return ? FormatDouble(*r.eval_return) : "") << ','
        << FormatDouble(r.eps);
    for (std::size_t i = 0; i < arms.size(); ++i) {
      out << ',' << (r.arm_means[i] ? FormatDouble(*r.arm_means[i]) : "") << ',' << r.arm_counts[i];
    }
    out << '\n';
  }
}

std::string Metrics::ToCsv() const {
  std::ostringstream out;
  WriteCsv(out);
  return out.str();
}

namespace {

std::vector<std::string> SplitCsvLine(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  for (char ch : line) {
    if (ch == ',') {
      fields.push_back(cur);
      cur.clear();
    } else if (ch != '\r') {
      cur += ch;
    }
  }
  fields.push_back(cur);
  return fields;
}

template <typename T>
T ParseNumber(const std::string& s, std::size_t line_no, const char* column) {
  T v{};
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    throw std::runtime_error("line " + std::to_string(line_no) + ": bad " + column + " value '" + s + "'");
  }
  return v;
}

}  // namespace

Metrics Metrics::ReadCsv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("line 1: missing header");
  const auto header = SplitCsvLine(line);
  static const std::vector<std::string> kFixed = {"episode",        "env_steps",   "mode", "selected_d",
                                                  "episode_return", "eval_return", "eps"};
  if (header.size() < kFixed.size() || !std::equal(kFixed.begin(), kFixed.end(), header.begin()) ||
      (header.size() - kFixed.size()) % 2 != 0) {
    throw std::runtime_error("line 1: unexpected header");
  }
  Metrics m;
  for (std::size_t i = kFixed.size(); i < header.size(); i += 2) {
    const std::string& mean_col = header[i];
    if (mean_col.rfind("mean_d", 0) != 0) throw std::runtime_error("line 1: bad arm column '" + mean_col + "'");
    const auto d = ParseNumber<int>(mean_col.substr(6), 1, "arm");
    if (header[i + 1] != "count_d" + std::to_string(d)) throw std::runtime_error("line 1: arm columns out of order");
    m.arms.push_back(d);
  }
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto f = SplitCsvLine(line);
    if (f.size() != header.size()) {
      throw std::runtime_error("line " + std::to_string(line_no) + ": expected " + std::to_string(header.size()) +
                               " fields, got " + std::to_string(f.size()));
    }
    MetricsRow r;
    r.episode = ParseNumber<int>(f[0], line_no, "episode");
    r.env_steps = ParseNumber<std::int64_t>(f[1], line_no, "env_steps");
    r.mode = f[2];
    r.selected_d = ParseNumber<int>(f[3], line_no, "selected_d");
    r.episode_return = ParseNumber<double>(f[4], line_no, "episode_return");
    if (!f[5].empty()) r.eval_return = ParseNumber<double>(f[5], line_no, "eval_return");
    r.eps = ParseNumber<double>(f[6], line_no, "eps");
    for (std::size_t i = 0; i < m.arms.size(); ++i) {
      const auto& mean = f[kFixed.size() + 2 * i];
      r.arm_means.push_back(mean.empty() ? std::nullopt : std::optional<double>(ParseNumber<double>(mean, line_no, "mean")));
      r.arm_counts.push_back(ParseNumber<std::size_t>(f[kFixed.size() + 2 * i + 1], line_no, "count"));
    }
    if (!m.rows.empty() && r.episode <= m.rows.back().episode) {
      throw std::runtime_error("line " + std::to_string(line_no) + ": episode index not increasing");
    }
    m.rows.push_back(std::move(r));
  }
  return m;
}

}  // namespace dsr
