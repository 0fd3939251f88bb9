#include "dsr/marl.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <utility>

namespace dsr::marl {

using neuro::Matrix;
using neuro::Mlp;

std::string AlgoName(Algo a) {
  switch (a) {
    case Algo::kIql: return "iql";
    case Algo::kVdn: return "vdn";
    case Algo::kQmix: return "qmix";
  }
  return "?";
}

Algo ParseAlgo(const std::string& s) {
  if (s == "iql") return Algo::kIql;
  if (s == "vdn") return Algo::kVdn;
  if (s == "qmix") return Algo::kQmix;
  throw std::invalid_argument("algo.name: unknown algorithm '" + s + "' (expected iql, vdn or qmix)");
}

void LearnerConfig::Validate() const {
  auto fail = [](const std::string& key, const std::string& why) {
    throw std::invalid_argument("algo." + key + ": " + why);
  };
  if (!(gamma >= 0.0 && gamma < 1.0)) fail("gamma", "must be in [0, 1)");
  if (!(lr > 0.0) || !std::isfinite(lr)) fail("lr", "must be positive");
  if (hidden < 1) fail("hidden", "must be >= 1");
  if (hidden_layers < 1) fail("hidden_layers", "must be >= 1");
  if (batch_size < 1) fail("batch_size", "must be >= 1");
  if (buffer_episodes < 1) fail("buffer_episodes", "must be >= 1");
  if (!(eps_start >= 0.0 && eps_start <= 1.0)) fail("eps_start", "must be in [0, 1]");
  if (!(eps_finish >= 0.0 && eps_finish <= eps_start)) fail("eps_finish", "must be in [0, eps_start]");
  if (eps_anneal < 1) fail("eps_anneal", "must be >= 1");
  if (!(eval_eps >= 0.0 && eval_eps <= 1.0)) fail("eval_eps", "must be in [0, 1]");
  if (target_update < 1) fail("target_update", "must be >= 1");
  if (!(grad_clip > 0.0)) fail("grad_clip", "must be positive");
  if (mixing_embed < 1) fail("mixing_embed", "must be >= 1");
  if (hypernet_embed < 1) fail("hypernet_embed", "must be >= 1");
}

EpsilonSchedule::EpsilonSchedule(double start, double finish, std::int64_t anneal)
    : start_(start), finish_(finish), anneal_(anneal) {
  if (anneal_ < 1) throw std::invalid_argument("epsilon anneal must be >= 1");
}

double EpsilonSchedule::Value(std::int64_t t) const {
  if (t >= anneal_) return finish_;
  const double frac = static_cast<double>(std::max<std::int64_t>(t, 0)) / static_cast<double>(anneal_);
  return std::max(finish_, start_ - (start_ - finish_) * frac);
}

// ---------------------------------------------------------------------------

EpisodeRecord::EpisodeRecord(std::size_t n_agents, std::size_t obs_len, SightRange d)
    : n_agents_(n_agents), obs_len_(obs_len), d_(d) {
  if (n_agents_ == 0 || obs_len_ == 0) throw std::invalid_argument("episode record needs agents and features");
}

void EpisodeRecord::AddObservations(const std::vector<Observation>& obs) {
  if (snapshots() != length()) throw std::logic_error("observation snapshot out of sequence");
  if (obs.size() != n_agents_) throw std::invalid_argument("observation count mismatch");
  for (const auto& o : obs) {
    if (o.size() != obs_len_) throw std::invalid_argument("observation length mismatch");
    obs_.insert(obs_.end(), o.begin(), o.end());
  }
}

void EpisodeRecord::AddStep(const JointAction& actions, double reward, bool terminal) {
  if (snapshots() != length() + 1) throw std::logic_error("step recorded without a prior observation");
  if (actions.size() != n_agents_) throw std::invalid_argument("joint action length mismatch");
  actions_.insert(actions_.end(), actions.begin(), actions.end());
  rewards_.push_back(reward);
  terminal_.push_back(terminal ? 1 : 0);
}

std::span<const double> EpisodeRecord::Obs(std::size_t t, std::size_t agent) const {
  return std::span<const double>(obs_).subspan((t * n_agents_ + agent) * obs_len_, obs_len_);
}

std::span<const double> EpisodeRecord::State(std::size_t t) const {
  return std::span<const double>(obs_).subspan(t * n_agents_ * obs_len_, n_agents_ * obs_len_);
}

double EpisodeRecord::Return() const {
  double total = 0.0;
  for (double r : rewards_) total += r;
  return total;
}

// ---------------------------------------------------------------------------

ReplayBuffer::ReplayBuffer(std::size_t capacity_episodes) : capacity_(capacity_episodes) {
  if (capacity_ == 0) throw std::invalid_argument("replay capacity must be >= 1");
}

void ReplayBuffer::Push(EpisodeRecord episode) {
  if (!episode.complete()) throw std::invalid_argument("episode is missing its final observation");
  const std::size_t start = starts_.empty() ? 0 : starts_.back() + episodes_.back().length();
  transitions_ += episode.length();
  starts_.push_back(start);
  episodes_.push_back(std::move(episode));
  while (episodes_.size() > capacity_) {
    transitions_ -= episodes_.front().length();
    episodes_.pop_front();
    starts_.pop_front();
  }
}

Transition ReplayBuffer::At(std::size_t index) const {
  if (index >= transitions_) throw std::out_of_range("transition index out of range");
  const std::size_t global = starts_.front() + index;
  auto it = std::upper_bound(starts_.begin(), starts_.end(), global);
  const auto e = static_cast<std::size_t>(std::distance(starts_.begin(), it)) - 1;
  return {&episodes_[e], global - starts_[e]};
}

std::vector<Transition> ReplayBuffer::Sample(std::size_t k, Rng& rng) const {
  if (k == 0) return {};
  if (transitions_ == 0) throw std::logic_error("sampling from an empty replay buffer");
  if (k > transitions_) throw std::invalid_argument("sample size exceeds stored transitions");
  // Floyd's algorithm: a uniform k-subset in O(k) draws.
  std::vector<std::size_t> chosen;
  chosen.reserve(k);
  for (std::size_t j = transitions_ - k; j < transitions_; ++j) {
    const auto t = static_cast<std::size_t>(rng.UniformInt(j + 1));
    if (std::find(chosen.begin(), chosen.end(), t) == chosen.end()) {
      chosen.push_back(t);
    } else {
      chosen.push_back(j);
    }
  }
  std::vector<Transition> out;
  out.reserve(k);
  for (std::size_t idx : chosen) out.push_back(At(idx));
  return out;
}

// ---------------------------------------------------------------------------

QmixMixer::QmixMixer(int n_agents, int state_dim, int embed, int hyper_embed, Rng& rng)
    : n_agents_(n_agents),
      state_dim_(state_dim),
      embed_(embed),
      hyper_w1_({state_dim, hyper_embed, embed * n_agents}, rng),
      hyper_b1_({state_dim, embed}, rng),
      hyper_w2_({state_dim, hyper_embed, embed}, rng),
      hyper_v_({state_dim, embed, 1}, rng) {}

namespace {

double Elu(double x) { return x > 0.0 ? x : std::expm1(x); }
double EluGrad(double x) { return x > 0.0 ? 1.0 : std::exp(x); }
double Sign(double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); }

}  // namespace

Matrix QmixMixer::Forward(const Matrix& q, const Matrix& states, Cache* cache) const {
  if (q.rows() != n_agents_ || states.rows() != state_dim_ || q.cols() != states.cols()) {
    throw std::invalid_argument("mixer: input shape mismatch");
  }
  const Eigen::Index batch = q.cols();
  Cache local;
  Cache& c = cache ? *cache : local;
  const Matrix raw_w1 = hyper_w1_.Forward(states, &c.w1);
  const Matrix b1 = hyper_b1_.Forward(states, &c.b1);
  const Matrix raw_w2 = hyper_w2_.Forward(states, &c.w2);
  const Matrix v = hyper_v_.Forward(states, &c.v);
  c.q = q;
  c.pre.resize(embed_, batch);
  Matrix out(1, batch);
  for (Eigen::Index b = 0; b < batch; ++b) {
    double total = v(0, b);
    for (int k = 0; k < embed_; ++k) {
      double pre = b1(k, b);
      for (int i = 0; i < n_agents_; ++i) pre += q(i, b) * std::abs(raw_w1(i * embed_ + k, b));
      c.pre(k, b) = pre;
      total += Elu(pre) * std::abs(raw_w2(k, b));
    }
    out(0, b) = total;
  }
  return out;
}

Matrix QmixMixer::BackwardInto(const Cache& c, const Matrix& dy,
                               std::span<const std::span<double>> grads) const {
  if (grads.size() != 4) throw std::invalid_argument("mixer: expected four gradient buffers");
  const Eigen::Index batch = c.q.cols();
  if (dy.rows() != 1 || dy.cols() != batch) throw std::invalid_argument("mixer: output gradient shape mismatch");
  const Matrix& raw_w1 = c.w1.acts.back();
  const Matrix& raw_w2 = c.w2.acts.back();

  Matrix d_raw_w1(embed_ * n_agents_, batch);
  Matrix d_b1(embed_, batch);
  Matrix d_raw_w2(embed_, batch);
  Matrix dq = Matrix::Zero(n_agents_, batch);
  for (Eigen::Index b = 0; b < batch; ++b) {
    const double g = dy(0, b);
    for (int k = 0; k < embed_; ++k) {
      const double pre = c.pre(k, b);
      d_raw_w2(k, b) = g * Elu(pre) * Sign(raw_w2(k, b));
      const double d_pre = g * std::abs(raw_w2(k, b)) * EluGrad(pre);
      d_b1(k, b) = d_pre;
      for (int i = 0; i < n_agents_; ++i) {
        const double w = raw_w1(i * embed_ + k, b);
        d_raw_w1(i * embed_ + k, b) = d_pre * c.q(i, b) * Sign(w);
        dq(i, b) += d_pre * std::abs(w);
      }
    }
  }
  hyper_w1_.BackwardInto(c.w1, d_raw_w1, grads[0]);
  hyper_b1_.BackwardInto(c.b1, d_b1, grads[1]);
  hyper_w2_.BackwardInto(c.w2, d_raw_w2, grads[2]);
  hyper_v_.BackwardInto(c.v, dy, grads[3]);
  return dq;
}

void QmixMixer::CopyFrom(const QmixMixer& other) {
  hyper_w1_.CopyFrom(other.hyper_w1_);
  hyper_b1_.CopyFrom(other.hyper_b1_);
  hyper_w2_.CopyFrom(other.hyper_w2_);
  hyper_v_.CopyFrom(other.hyper_v_);
}

// ---------------------------------------------------------------------------

void RunningStats::Add(std::span<const double> xs) {
  if (xs.empty()) return;
  double batch_mean = 0.0;
  for (double x : xs) batch_mean += x;
  const auto n = static_cast<double>(xs.size());
  batch_mean /= n;
  double batch_m2 = 0.0;
  for (double x : xs) batch_m2 += (x - batch_mean) * (x - batch_mean);
  const double total = count_ + n;
  const double delta = batch_mean - mean_;
  mean_ += delta * n / total;
  m2_ += batch_m2 + delta * delta * count_ * n / total;
  count_ = total;
}

double RunningStats::stddev() const { return count_ > 0.0 ? std::sqrt(m2_ / count_) : 0.0; }

// ---------------------------------------------------------------------------

namespace {

std::vector<int> AgentSizes(const LearnerConfig& cfg, std::size_t n_agents, std::size_t obs_len,
                            std::size_t n_actions) {
  std::vector<int> sizes{static_cast<int>(obs_len + n_agents)};
  for (int l = 0; l < cfg.hidden_layers; ++l) sizes.push_back(cfg.hidden);
  sizes.push_back(static_cast<int>(n_actions));
  return sizes;
}

}  // namespace

QLearner::QLearner(LearnerConfig cfg, std::size_t n_agents, std::size_t obs_len, std::size_t n_actions,
                   Rng& init_rng)
    : cfg_((cfg.Validate(), cfg)),
      n_agents_(n_agents),
      obs_len_(obs_len),
      n_actions_(n_actions),
      agent_(AgentSizes(cfg_, n_agents, obs_len, n_actions), init_rng),
      target_agent_(agent_),
      mixer_([&]() -> std::optional<QmixMixer> {
        if (cfg_.algo != Algo::kQmix) return std::nullopt;
        return QmixMixer(static_cast<int>(n_agents), static_cast<int>(n_agents * obs_len), cfg_.mixing_embed,
                         cfg_.hypernet_embed, init_rng);
      }()),
      target_mixer_(mixer_),
      optimizer_(neuro::AdamConfig{.lr = cfg_.lr}, [&] {
        std::vector<std::size_t> sizes{agent_.param_count()};
        if (mixer_) {
          for (const auto* net : std::as_const(*mixer_).nets()) sizes.push_back(net->param_count());
        }
        return sizes;
      }()) {
  if (n_agents_ == 0 || obs_len_ == 0 || n_actions_ == 0) {
    throw std::invalid_argument("learner needs agents, features and actions");
  }
}

Matrix QLearner::AgentInputs(const std::vector<Observation>& obs) const {
  if (obs.size() != n_agents_) throw std::invalid_argument("observation count mismatch");
  Matrix x = Matrix::Zero(static_cast<Eigen::Index>(obs_len_ + n_agents_), static_cast<Eigen::Index>(n_agents_));
  for (std::size_t i = 0; i < n_agents_; ++i) {
    if (obs[i].size() != obs_len_) throw std::invalid_argument("observation length mismatch");
    for (std::size_t f = 0; f < obs_len_; ++f) x(static_cast<Eigen::Index>(f), static_cast<Eigen::Index>(i)) = obs[i][f];
    x(static_cast<Eigen::Index>(obs_len_ + i), static_cast<Eigen::Index>(i)) = 1.0;
  }
  return x;
}

Matrix QLearner::AgentQ(const std::vector<Observation>& obs) const { return agent_.Forward(AgentInputs(obs)); }

JointAction QLearner::SelectActions(const std::vector<Observation>& obs, double eps, Rng& rng) const {
  const Matrix q = AgentQ(obs);
  JointAction actions(n_agents_);
  for (std::size_t i = 0; i < n_agents_; ++i) {
    const auto col = static_cast<Eigen::Index>(i);
    if (rng.Uniform01() < eps) {
      actions[i] = static_cast<int>(rng.UniformInt(n_actions_));
      continue;
    }
    Eigen::Index best = 0;
    for (Eigen::Index a = 1; a < q.rows(); ++a) {
      if (q(a, col) > q(best, col)) best = a;
    }
    actions[i] = static_cast<int>(best);
  }
  return actions;
}

double QLearner::Mix(std::span<const double> per_agent_q, std::span<const double> state) const {
  if (per_agent_q.size() != n_agents_) throw std::invalid_argument("mix: per-agent value count mismatch");
  switch (cfg_.algo) {
    case Algo::kIql:
      throw std::logic_error("mix is undefined for independent learners");
    case Algo::kVdn: {
      double total = 0.0;
      for (double q : per_agent_q) total += q;
      return total;
    }
    case Algo::kQmix: {
      if (state.size() != n_agents_ * obs_len_) throw std::invalid_argument("mix: state length mismatch");
      Matrix q(static_cast<Eigen::Index>(n_agents_), 1);
      for (std::size_t i = 0; i < n_agents_; ++i) q(static_cast<Eigen::Index>(i), 0) = per_agent_q[i];
      Matrix s(static_cast<Eigen::Index>(state.size()), 1);
      for (std::size_t f = 0; f < state.size(); ++f) s(static_cast<Eigen::Index>(f), 0) = state[f];
      return mixer_->Forward(q, s)(0, 0);
    }
  }
  return 0.0;
}

double QLearner::TrainBatch(std::span<const Transition> batch) {
  if (batch.empty()) throw std::invalid_argument("train_batch: empty batch");
  std::vector<double> rewards(batch.size());
  for (std::size_t b = 0; b < batch.size(); ++b) rewards[b] = batch[b].reward();
  if (cfg_.standardise_rewards) {
    reward_stats_.Add(rewards);
    const double scale = std::max(reward_stats_.stddev(), 1e-6);
    for (double& r : rewards) r = (r - reward_stats_.mean()) / scale;
  }
  std::vector<std::vector<double>> grads;
  const double loss = TdLoss(batch, rewards, &grads);

  std::vector<std::span<double>> params{agent_.params()};
  if (mixer_) {
    for (auto* net : mixer_->nets()) params.push_back(net->params());
  }
  std::vector<std::span<const double>> grad_spans(grads.begin(), grads.end());
  optimizer_.Step(params, grad_spans, cfg_.grad_clip);
  ++train_steps_;
  return loss;
}

double QLearner::TdLoss(std::span<const Transition> batch, std::span<const double> rewards,
                        std::vector<std::vector<double>>* grads) const {
  if (batch.empty()) throw std::invalid_argument("td_loss: empty batch");
  if (rewards.size() != batch.size()) throw std::invalid_argument("td_loss: reward count mismatch");
  const auto n = static_cast<Eigen::Index>(n_agents_);
  const auto bsz = static_cast<Eigen::Index>(batch.size());
  const auto in = static_cast<Eigen::Index>(obs_len_ + n_agents_);
  const auto state_dim = static_cast<Eigen::Index>(n_agents_ * obs_len_);

  // Column b * n + i holds agent i of sample b.
  Matrix x = Matrix::Zero(in, n * bsz);
  Matrix x_next = Matrix::Zero(in, n * bsz);
  for (Eigen::Index b = 0; b < bsz; ++b) {
    const auto& tr = batch[static_cast<std::size_t>(b)];
    for (Eigen::Index i = 0; i < n; ++i) {
      const auto col = b * n + i;
      const auto o = tr.Obs(static_cast<std::size_t>(i));
      const auto o2 = tr.NextObs(static_cast<std::size_t>(i));
      for (std::size_t f = 0; f < obs_len_; ++f) {
        x(static_cast<Eigen::Index>(f), col) = o[f];
        x_next(static_cast<Eigen::Index>(f), col) = o2[f];
      }
      x(static_cast<Eigen::Index>(obs_len_) + i, col) = 1.0;
      x_next(static_cast<Eigen::Index>(obs_len_) + i, col) = 1.0;
    }
  }

  Mlp::Cache cache;
  const Matrix q = agent_.Forward(x, &cache);
  const Matrix q_next = target_agent_.Forward(x_next);

  Matrix chosen(n, bsz);
  Matrix next_max(n, bsz);
  for (Eigen::Index b = 0; b < bsz; ++b) {
    const auto& tr = batch[static_cast<std::size_t>(b)];
    for (Eigen::Index i = 0; i < n; ++i) {
      const auto a = tr.Action(static_cast<std::size_t>(i));
      if (a < 0 || static_cast<std::size_t>(a) >= n_actions_) throw std::invalid_argument("train_batch: bad action");
      chosen(i, b) = q(a, b * n + i);
      next_max(i, b) = q_next.col(b * n + i).maxCoeff();
    }
  }

  auto discount = [&](Eigen::Index b) {
    return batch[static_cast<std::size_t>(b)].done() ? 0.0 : cfg_.gamma;
  };

  Matrix d_chosen(n, bsz);
  double loss = 0.0;
  std::vector<std::vector<double>> mixer_grads;
  if (cfg_.algo == Algo::kIql) {
    const double denom = static_cast<double>(n * bsz);
    for (Eigen::Index b = 0; b < bsz; ++b) {
      for (Eigen::Index i = 0; i < n; ++i) {
        const double y = rewards[static_cast<std::size_t>(b)] + discount(b) * next_max(i, b);
        const double td = chosen(i, b) - y;
        loss += td * td;
        d_chosen(i, b) = 2.0 * td / denom;
      }
    }
    loss /= denom;
  } else if (cfg_.algo == Algo::kVdn) {
    const double denom = static_cast<double>(bsz);
    for (Eigen::Index b = 0; b < bsz; ++b) {
      const double y = rewards[static_cast<std::size_t>(b)] + discount(b) * next_max.col(b).sum();
      const double td = chosen.col(b).sum() - y;
      loss += td * td;
      d_chosen.col(b).setConstant(2.0 * td / denom);
    }
    loss /= denom;
  } else {
    Matrix states(state_dim, bsz);
    Matrix next_states(state_dim, bsz);
    for (Eigen::Index b = 0; b < bsz; ++b) {
      const auto& tr = batch[static_cast<std::size_t>(b)];
      const auto s = tr.State();
      const auto s2 = tr.NextState();
      for (Eigen::Index f = 0; f < state_dim; ++f) {
        states(f, b) = s[static_cast<std::size_t>(f)];
        next_states(f, b) = s2[static_cast<std::size_t>(f)];
      }
    }
    QmixMixer::Cache mc;
    const Matrix q_tot = mixer_->Forward(chosen, states, &mc);
    const Matrix q_tot_next = target_mixer_->Forward(next_max, next_states);
    const double denom = static_cast<double>(bsz);
    Matrix d_tot(1, bsz);
    for (Eigen::Index b = 0; b < bsz; ++b) {
      const double y = rewards[static_cast<std::size_t>(b)] + discount(b) * q_tot_next(0, b);
      const double td = q_tot(0, b) - y;
      loss += td * td;
      d_tot(0, b) = 2.0 * td / denom;
    }
    loss /= denom;
    if (grads) {
      for (const auto* net : mixer_->nets()) mixer_grads.emplace_back(net->param_count(), 0.0);
      std::vector<std::span<double>> spans(mixer_grads.begin(), mixer_grads.end());
      d_chosen = mixer_->BackwardInto(mc, d_tot, spans);
    }
  }
  if (!grads) return loss;

  Matrix dq = Matrix::Zero(q.rows(), q.cols());
  for (Eigen::Index b = 0; b < bsz; ++b) {
    const auto& tr = batch[static_cast<std::size_t>(b)];
    for (Eigen::Index i = 0; i < n; ++i) dq(tr.Action(static_cast<std::size_t>(i)), b * n + i) = d_chosen(i, b);
  }
  grads->clear();
  grads->emplace_back(agent_.param_count(), 0.0);
  agent_.BackwardInto(cache, dq, grads->front());
  for (auto& g : mixer_grads) grads->push_back(std::move(g));
  return loss;
}

bool QLearner::MaybeUpdateTarget() {
  if (train_steps_ - last_target_update_ < static_cast<std::uint64_t>(cfg_.target_update)) return false;
  target_agent_.CopyFrom(agent_);
  if (mixer_) target_mixer_->CopyFrom(*mixer_);
  last_target_update_ = train_steps_;
  return true;
}

std::vector<const Mlp*> QLearner::CheckpointNets() const {
  std::vector<const Mlp*> nets{&agent_, &target_agent_};
  if (mixer_) {
    for (const auto* net : std::as_const(*mixer_).nets()) nets.push_back(net);
    for (const auto* net : std::as_const(*target_mixer_).nets()) nets.push_back(net);
  }
  return nets;
}

std::vector<Mlp*> QLearner::MutableCheckpointNets() {
  std::vector<Mlp*> nets{&agent_, &target_agent_};
  if (mixer_) {
    for (auto* net : mixer_->nets()) nets.push_back(net);
    for (auto* net : target_mixer_->nets()) nets.push_back(net);
  }
  return nets;
}

void QLearner::SaveCheckpoint(std::ostream& out) const {
  for (const auto* net : CheckpointNets()) neuro::WriteMlp(out, *net);
}

void QLearner::LoadCheckpoint(std::istream& in) {
  for (auto* net : MutableCheckpointNets()) {
    const Mlp loaded = neuro::ReadMlp(in);
    if (loaded.sizes() != net->sizes()) throw std::runtime_error("checkpoint: architecture mismatch");
    net->CopyFrom(loaded);
  }
}

nlohmann::json QLearner::Manifest() const {
  return {{"algo", AlgoName(cfg_.algo)},
          {"gamma", cfg_.gamma},
          {"lr", cfg_.lr},
          {"agent_layers", agent_.sizes()},
          {"eps_start", cfg_.eps_start},
          {"eps_finish", cfg_.eps_finish},
          {"eps_anneal", cfg_.eps_anneal},
          {"train_steps", train_steps_},
          {"last_target_update", last_target_update_},
          {"optimizer_steps", optimizer_.steps()},
          {"reward_mean", reward_stats_.mean()},
          {"reward_std", reward_stats_.stddev()}};
}

}  // namespace dsr::marl
