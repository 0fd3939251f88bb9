#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "dsr/lbf.hpp"
#include "dsr/marl.hpp"
#include "dsr/rware.hpp"
#include "dsr/swucb.hpp"

namespace dsr {

struct EnvConfig {
  std::string name = "lbf";
  LbfConfig lbf;
  RwareConfig rware;

  void Validate() const;
  std::unique_ptr<Environment> Make(std::uint64_t seed) const;
  SightRange MaxSight() const;
};

struct DsrConfig {
  bool enabled = false;
  std::vector<SightRange> sight_set;
  double c = 2.0;
  std::size_t w = 5000;
  /// Episode returns are divided by this before they reach the bandit.
  double reward_divisor = 1.0;
};

/// Phase starting at `start` (fraction of the episode budget) using `d`.
struct SchedulePhase {
  double start;
  SightRange d;

  bool operator==(const SchedulePhase&) const = default;
};

struct TrainConfig {
  EnvConfig env;
  marl::LearnerConfig algo;
  DsrConfig dsr;
  std::optional<SightRange> fixed_d;
  std::vector<SchedulePhase> schedule;
  int episodes = 20000;
  int eval_interval = 500;
  int eval_episodes = 100;
  std::uint64_t seed = 0;

  enum class Mode { kDsr, kFixed, kSchedule };
  Mode mode() const;

  /// Throws ConfigError naming the offending key.
  void Validate() const;
};

struct MetricsRow {
  int episode = 0;
  std::int64_t env_steps = 0;
  std::string mode;
  SightRange selected_d = 0;
  double episode_return = 0.0;
  std::optional<double> eval_return;
  double eps = 0.0;
  std::vector<std::optional<double>> arm_means;
  std::vector<std::size_t> arm_counts;

  bool operator==(const MetricsRow&) const = default;
};

/// Metrics table: rows plus the arm values naming the per-arm columns.
struct Metrics {
  std::vector<SightRange> arms;
  std::vector<MetricsRow> rows;

  void WriteCsv(std::ostream& out) const;
  std::string ToCsv() const;
  /// Throws std::runtime_error describing the first malformed line.
  static Metrics ReadCsv(std::istream& in);
};

struct RunArtifact {
  Metrics metrics;
  SightRange final_d = 0;
  std::optional<double> final_eval_return;
  std::unique_ptr<marl::QLearner> learner;
  /// Bandit (or, for fixed/schedule runs, per-d return tracker) at the end.
  std::optional<MetaController> controller;
  std::string mode;
};

using RowCallback = std::function<void(const MetricsRow&)>;

/// Mean undiscounted return over fresh episodes on a clone of `proto`.
/// Does not modify the learner.
double Evaluate(const marl::QLearner& learner, const Environment& proto, SightRange d, int n_episodes,
                double eps, std::uint64_t seed);

/// Dispatches on cfg.mode().
RunArtifact Train(const TrainConfig& cfg, const RowCallback& on_row = {});

RunArtifact RunDsr(const TrainConfig& cfg, const RowCallback& on_row = {});
RunArtifact RunFixed(const TrainConfig& cfg, SightRange d, const RowCallback& on_row = {});
RunArtifact RunSchedule(const TrainConfig& cfg, const std::vector<SchedulePhase>& schedule,
                        const RowCallback& on_row = {});

/// Sight range of 1-based episode `e` out of `total` under `schedule`.
SightRange ScheduledSight(const std::vector<SchedulePhase>& schedule, int e, int total);

std::string FormatDouble(double v);

}  // namespace dsr
