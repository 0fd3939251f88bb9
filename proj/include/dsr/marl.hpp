#pragma once

#include <cstdint>
#include <deque>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dsr/env.hpp"
#include "dsr/neuro.hpp"
#include "dsr/rng.hpp"
#include "json.hpp"

namespace dsr::marl {

enum class Algo { kIql, kVdn, kQmix };

std::string AlgoName(Algo a);
Algo ParseAlgo(const std::string& s);

struct LearnerConfig {
  Algo algo = Algo::kQmix;
  double gamma = 0.99;
  double lr = 3e-4;
  int hidden = 128;
  int hidden_layers = 2;
  int batch_size = 32;
  int buffer_episodes = 5000;
  double eps_start = 1.0;
  double eps_finish = 0.05;
  std::int64_t eps_anneal = 200000;
  double eval_eps = 0.05;
  int target_update = 200;
  double grad_clip = 10.0;
  bool standardise_rewards = true;
  int mixing_embed = 32;
  int hypernet_embed = 64;

  void Validate() const;
};

/// Linear anneal from start to finish over `anneal` environment steps.
class EpsilonSchedule {
 public:
  EpsilonSchedule(double start, double finish, std::int64_t anneal);
  double Value(std::int64_t t) const;

 private:
  double start_;
  double finish_;
  std::int64_t anneal_;
};

/// One episode of experience at a single sight range.
///
/// Observations are stored once per tick (T + 1 snapshots) in single
/// precision; grid features are small integers, so storage is exact.
class EpisodeRecord {
 public:
  EpisodeRecord(std::size_t n_agents, std::size_t obs_len, SightRange d);

  /// Appends the observation snapshot for the current tick (all agents).
  void AddObservations(const std::vector<Observation>& obs);
  /// Records the transition out of the latest snapshot.
  void AddStep(const JointAction& actions, double reward, bool terminal);

  std::size_t n_agents() const { return n_agents_; }
  std::size_t obs_len() const { return obs_len_; }
  SightRange d() const { return d_; }
  /// Number of complete transitions.
  std::size_t length() const { return rewards_.size(); }
  bool complete() const { return snapshots() == length() + 1; }

  std::span<const double> Obs(std::size_t t, std::size_t agent) const;
  /// Concatenated observations of all agents at tick t.
  std::span<const double> State(std::size_t t) const;
  int Action(std::size_t t, std::size_t agent) const { return actions_[t * n_agents_ + agent]; }
  double Reward(std::size_t t) const { return rewards_[t]; }
  bool Terminal(std::size_t t) const { return terminal_[t] != 0; }
  double Return() const;

 private:
  std::size_t snapshots() const { return obs_.size() / (n_agents_ * obs_len_); }

  std::size_t n_agents_;
  std::size_t obs_len_;
  SightRange d_;
  std::vector<double> obs_;
  std::vector<int> actions_;
  std::vector<double> rewards_;
  std::vector<char> terminal_;
};

/// A single (o, a, r, o', done) tuple referencing an episode.
struct Transition {
  const EpisodeRecord* episode;
  std::size_t t;

  std::span<const double> Obs(std::size_t agent) const { return episode->Obs(t, agent); }
  std::span<const double> NextObs(std::size_t agent) const { return episode->Obs(t + 1, agent); }
  std::span<const double> State() const { return episode->State(t); }
  std::span<const double> NextState() const { return episode->State(t + 1); }
  int Action(std::size_t agent) const { return episode->Action(t, agent); }
  double reward() const { return episode->Reward(t); }
  /// True only for non-truncation terminations; truncated episodes bootstrap.
  bool done() const { return episode->Terminal(t); }
  SightRange d() const { return episode->d(); }
};

/// FIFO ring of episodes with uniform transition sampling.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity_episodes);

  void Push(EpisodeRecord episode);
  std::size_t capacity() const { return capacity_; }
  std::size_t episodes() const { return episodes_.size(); }
  std::size_t transitions() const { return transitions_; }
  const EpisodeRecord& episode(std::size_t i) const { return episodes_.at(i); }

  /// Transition by flat index in [0, transitions()), oldest first.
  Transition At(std::size_t index) const;

  /// k distinct transitions drawn uniformly. Throws when k exceeds the
  /// stored count.
  std::vector<Transition> Sample(std::size_t k, Rng& rng) const;

 private:
  std::size_t capacity_;
  std::deque<EpisodeRecord> episodes_;
  std::deque<std::size_t> starts_;  // running start offset of each episode
  std::size_t transitions_ = 0;
};

/// Monotonic mixing network whose weights come from state-conditioned
/// hypernetworks.
///
/// w1 = |hyper_w1(s)| (n_agents x embed), b1 = hyper_b1(s),
/// h = elu(q . w1 + b1), w2 = |hyper_w2(s)|, v = hyper_v(s),
/// Q_tot = h . w2 + v.
class QmixMixer {
 public:
  struct Cache {
    neuro::Mlp::Cache w1;
    neuro::Mlp::Cache b1;
    neuro::Mlp::Cache w2;
    neuro::Mlp::Cache v;
    neuro::Matrix q;
    neuro::Matrix pre;  // embed x batch, before elu
  };

  QmixMixer(int n_agents, int state_dim, int embed, int hyper_embed, Rng& rng);

  int n_agents() const { return n_agents_; }
  int state_dim() const { return state_dim_; }
  int embed() const { return embed_; }

  /// q: n_agents x batch, states: state_dim x batch. Returns 1 x batch.
  neuro::Matrix Forward(const neuro::Matrix& q, const neuro::Matrix& states, Cache* cache = nullptr) const;
  /// Adds parameter gradients of <dy, Q_tot> into `grads` (one span per
  /// network in nets() order) and returns dQ_tot/dq.
  neuro::Matrix BackwardInto(const Cache& cache, const neuro::Matrix& dy,
                             std::span<const std::span<double>> grads) const;

  std::vector<neuro::Mlp*> nets() { return {&hyper_w1_, &hyper_b1_, &hyper_w2_, &hyper_v_}; }
  std::vector<const neuro::Mlp*> nets() const { return {&hyper_w1_, &hyper_b1_, &hyper_w2_, &hyper_v_}; }
  void CopyFrom(const QmixMixer& other);

 private:
  int n_agents_;
  int state_dim_;
  int embed_;
  neuro::Mlp hyper_w1_;
  neuro::Mlp hyper_b1_;
  neuro::Mlp hyper_w2_;
  neuro::Mlp hyper_v_;
};

/// Running mean / population variance (Chan's parallel update).
class RunningStats {
 public:
  void Add(std::span<const double> xs);
  double mean() const { return mean_; }
  double stddev() const;
  double count() const { return count_; }

 private:
  double count_ = 0.0;
  double mean_ = 0.0;
  double m2_ = 0.0;
};

/// Parameter-shared value learner (IQL, VDN, QMIX).
///
/// One agent network maps [observation, one-hot agent id] to action values;
/// VDN sums the chosen values, QMIX mixes them with QmixMixer conditioned on
/// the concatenated observations.
class QLearner {
 public:
  QLearner(LearnerConfig cfg, std::size_t n_agents, std::size_t obs_len, std::size_t n_actions, Rng& init_rng);

  const LearnerConfig& config() const { return cfg_; }
  std::size_t n_agents() const { return n_agents_; }
  std::size_t obs_len() const { return obs_len_; }
  std::size_t n_actions() const { return n_actions_; }

  /// Action values for every agent: n_actions x n_agents.
  neuro::Matrix AgentQ(const std::vector<Observation>& obs) const;

  /// Epsilon-greedy per agent; greedy ties go to the lowest action index.
  JointAction SelectActions(const std::vector<Observation>& obs, double eps, Rng& rng) const;

  /// Team value from per-agent values. VDN sums, QMIX mixes; IQL throws.
  double Mix(std::span<const double> per_agent_q, std::span<const double> state) const;

  /// One TD step on the batch; returns the mean squared TD error.
  double TrainBatch(std::span<const Transition> batch);

  /// Mean squared TD error of `batch` with the given (already standardized)
  /// rewards. When `grads` is set it receives the loss gradient for the
  /// agent net followed by the mixer nets. Targets are held fixed.
  double TdLoss(std::span<const Transition> batch, std::span<const double> rewards,
                std::vector<std::vector<double>>* grads = nullptr) const;

  /// Hard-copies online to target once `target_update` train steps have
  /// elapsed since the last copy.
  bool MaybeUpdateTarget();

  std::uint64_t train_steps() const { return train_steps_; }
  const RunningStats& reward_stats() const { return reward_stats_; }

  neuro::Mlp& agent_net() { return agent_; }
  const neuro::Mlp& agent_net() const { return agent_; }
  const neuro::Mlp& target_agent_net() const { return target_agent_; }
  QmixMixer* mixer() { return mixer_ ? &*mixer_ : nullptr; }
  const QmixMixer* mixer() const { return mixer_ ? &*mixer_ : nullptr; }
  const QmixMixer* target_mixer() const { return target_mixer_ ? &*target_mixer_ : nullptr; }

  /// Networks in checkpoint order: agent, target agent, then (QMIX) mixer
  /// nets and target mixer nets.
  std::vector<const neuro::Mlp*> CheckpointNets() const;
  void SaveCheckpoint(std::ostream& out) const;
  void LoadCheckpoint(std::istream& in);
  nlohmann::json Manifest() const;

 private:
  neuro::Matrix AgentInputs(const std::vector<Observation>& obs) const;
  std::vector<neuro::Mlp*> MutableCheckpointNets();

  LearnerConfig cfg_;
  std::size_t n_agents_;
  std::size_t obs_len_;
  std::size_t n_actions_;
  neuro::Mlp agent_;
  neuro::Mlp target_agent_;
  std::optional<QmixMixer> mixer_;
  std::optional<QmixMixer> target_mixer_;
  neuro::Adam optimizer_;
  RunningStats reward_stats_;
  std::uint64_t train_steps_ = 0;
  std::uint64_t last_target_update_ = 0;
};

}  // namespace dsr::marl
