#pragma once

#include <algorithm>
#include <cstdint>
#include <memory>
#include <vector>

#include "gcpn/algos/updates.hpp"
#include "gcpn/envs/pomg.hpp"
#include "gcpn/replay/replay_buffer.hpp"

namespace gcpn::algos {

/// Deterministic child seed for a numbered stream (splitmix64 finalizer).
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

struct TrainConfig {
  LearnerKind kind = LearnerKind::maddpg;
  double gamma = 0.95;
  std::size_t batch_size = 256;
  std::size_t warmup = 1024;
  std::size_t update_period = 1;  // environment steps between update rounds
  std::size_t buffer_capacity = 1'000'000;
  double tau = 0.01;
  NetSizes nets;
  std::size_t n_sub = 2;  // K
  double noise_sigma0 = 0.3;
  double noise_sigma_min = 0.05;
  std::size_t noise_decay_steps = 0;  // 0: constant sigma0
  Matrix consensus;                   // FDMARL; empty means uniform
  std::size_t consensus_period = 10;  // in update rounds
  bool shared_reward = false;
  bool terminal_masking = false;
  double grad_clip = 0.0;

  void validate(std::size_t n_agents) const {
    if (!(gamma > 0.0 && gamma < 1.0)) throw ConfigError("train: gamma must lie in (0,1)");
    if (n_sub < 1) throw ConfigError("train: K must be >= 1");
    if (batch_size < 1 || update_period < 1 || buffer_capacity < batch_size) {
      throw ConfigError("train: batch, period and capacity must be positive, capacity >= batch");
    }
    if (!(tau > 0.0 && tau <= 1.0)) throw ConfigError("train: tau must lie in (0,1]");
    if (noise_sigma0 < 0.0 || noise_sigma_min < 0.0) throw ConfigError("train: noise must be >= 0");
    if (kind == LearnerKind::cf && !shared_reward) {
      throw ConfigError("CF applies only to the shared reward case");
    }
    if (is_gcpn(kind) && n_agents < 2) throw ConfigError("GCPN learners need at least two agents");
    if (kind == LearnerKind::fdmarl) {
      if (consensus.size() != 0) {
        if (static_cast<std::size_t>(consensus.rows()) != n_agents) {
          throw ConfigError("FDMARL consensus matrix must be N x N");
        }
        if (!doubly_stochastic(consensus)) throw ConfigError("FDMARL consensus matrix must be doubly stochastic");
      }
      if (consensus_period < 1) throw ConfigError("FDMARL consensus period must be >= 1");
    }
  }

  UpdateHyper hyper() const { return {gamma, terminal_masking, grad_clip}; }

  /// Linear decay from sigma0 to sigma_min over noise_decay_steps.
  double sigma_at(std::size_t step) const {
    if (noise_decay_steps == 0) return noise_sigma0;
    const double f = std::min(1.0, static_cast<double>(step) / static_cast<double>(noise_decay_steps));
    return noise_sigma0 + (noise_sigma_min - noise_sigma0) * f;
  }
};

struct UpdateStats {
  double critic_loss = 0.0;
  double actor_objective = 0.0;
  double gcpn_objective = 0.0;
  double infer_loss = 0.0;
};

/// DDPG step for agent i: critic regression then actor ascent. Targets are
/// soft-updated by the caller once per round.
inline std::pair<double, double> ddpg_update(PolicySet& ps, std::size_t i, std::size_t k, const Batch& batch,
                                             const UpdateHyper& h, Rng& rng) {
  const double loss = ddpg_critic_update(ps, i, k, batch, h, rng);
  const double obj = greedy_actor_update(ps.agents[i].actors[k], ps.maps[i], ps.critic(i), ps.layout(i), i,
                                         batch, h.grad_clip);
  return {loss, obj};
}

/// One learner driving a team of agents with its own buffers and rng streams.
class TeamLearner {
 public:
  TeamLearner(TrainConfig cfg, const std::vector<Eigen::Index>& obs_dims,
              const std::vector<Eigen::Index>& action_dims, const std::vector<envs::Box>& boxes,
              std::uint64_t seed)
      : cfg_(std::move(cfg)),
        init_rng_(derive_seed(seed, 0)),
        act_rng_(derive_seed(seed, 1)),
        sample_rng_(derive_seed(seed, 2)) {
    cfg_.validate(obs_dims.size());
    ps_ = make_policy_set(cfg_.kind, cfg_.n_sub, obs_dims, action_dims, boxes, cfg_.nets, init_rng_);
    if (cfg_.kind == LearnerKind::fdmarl && cfg_.consensus.size() == 0) {
      cfg_.consensus = uniform_consensus(obs_dims.size());
    }
    for (std::size_t k = 0; k < cfg_.n_sub; ++k) {
      buffers_.emplace_back(replay::Spaces{obs_dims, action_dims}, cfg_.buffer_capacity);
    }
  }

  const TrainConfig& config() const { return cfg_; }
  PolicySet& policies() { return ps_; }
  const PolicySet& policies() const { return ps_; }
  std::size_t n_agents() const { return ps_.n_agents(); }
  std::size_t active() const { return k_; }
  std::size_t updates_done() const { return updates_; }
  const replay::ReplayBuffer& buffer(std::size_t k) const { return buffers_.at(k); }

  /// Resamples the active sub-policy (no draw when K = 1).
  void begin_episode() {
    k_ = cfg_.n_sub > 1 ? std::uniform_int_distribution<std::size_t>(0, cfg_.n_sub - 1)(act_rng_) : 0;
  }

  std::vector<Vector> act(const std::vector<Vector>& obs, double sigma) {
    std::vector<Vector> out;
    for (std::size_t i = 0; i < n_agents(); ++i) {
      out.push_back(select_behavior_action(ps_, i, obs[i], k_, act_rng_, sigma));
    }
    return out;
  }

  void record(const replay::Transition& t) { buffers_[k_].push(t); }

  std::size_t stored() const {
    std::size_t s = 0;
    for (const auto& b : buffers_) s += b.size();
    return s;
  }

  bool ready() const { return stored() >= cfg_.warmup && buffers_[k_].size() >= cfg_.batch_size; }

  /// One update round on the active sub-policy's buffer.
  UpdateStats update() {
    UpdateStats st;
    const UpdateHyper h = cfg_.hyper();
    const auto& buf = buffers_[k_];
    const std::size_t n = n_agents();
    const double clip = cfg_.grad_clip;
    if (cfg_.kind == LearnerKind::cf) {
      const Batch batch = buf.sample_batch(cfg_.batch_size, sample_rng_);
      st.critic_loss = cf_critic_update(ps_, k_, batch, h);
      for (std::size_t i = 0; i < n; ++i) {
        st.actor_objective += greedy_actor_update(ps_.agents[i].actors[k_], ps_.maps[i], ps_.critic(0),
                                                  ps_.layout(i), i, batch, clip);
      }
    } else {
      for (std::size_t i = 0; i < n; ++i) {
        const Batch batch = buf.sample_batch(cfg_.batch_size, sample_rng_);
        st.critic_loss += maddpg_critic_update(ps_, i, k_, batch, h, sample_rng_);
        st.actor_objective += greedy_actor_update(ps_.agents[i].actors[k_], ps_.maps[i], ps_.critic(i),
                                                  ps_.layout(i), i, batch, clip);
        if (is_gcpn(cfg_.kind)) {
          for (std::size_t j : ps_.peers(i)) st.gcpn_objective += gcpn_update(ps_, i, j, k_, batch, clip);
        }
        if (uses_inferring(cfg_.kind)) {
          for (std::size_t j : ps_.peers(i)) st.infer_loss += infer_policy_update(ps_, i, j, batch, clip);
        }
      }
      st.critic_loss /= static_cast<double>(n);
    }
    st.actor_objective /= static_cast<double>(n);
    soft_update_all(ps_, cfg_.tau);
    ++updates_;
    if (cfg_.kind == LearnerKind::fdmarl && updates_ % cfg_.consensus_period == 0) {
      std::vector<ParamVector*> critics;
      for (auto& c : ps_.critics) critics.push_back(&c.online);
      consensus_share(critics, cfg_.consensus);
    }
    return st;
  }

  /// Greedy noise-free actions of sub-policy k.
  std::vector<Vector> greedy(const std::vector<Vector>& obs, std::size_t k) const {
    std::vector<Vector> out;
    for (std::size_t i = 0; i < n_agents(); ++i) out.push_back(greedy_action(ps_, i, obs[i], k));
    return out;
  }

 private:
  TrainConfig cfg_;
  Rng init_rng_, act_rng_, sample_rng_;
  PolicySet ps_;
  std::vector<replay::ReplayBuffer> buffers_;
  std::size_t k_ = 0;
  std::size_t updates_ = 0;
};

/// A learner plus the environment agent indices it controls.
struct Team {
  std::vector<std::size_t> members;
  TeamLearner learner;
};

template <class T>
std::vector<T> pick(const std::vector<T>& all, const std::vector<std::size_t>& idx) {
  std::vector<T> out;
  for (std::size_t i : idx) out.push_back(all.at(i));
  return out;
}

/// Mutable state of one training run.
struct RunState {
  std::unique_ptr<envs::MultiAgentEnv> env;
  std::vector<Team> teams;
  envs::Rng env_rng;
  std::vector<Vector> obs;
  std::size_t step = 0;
  std::size_t episodes = 0;
  bool need_reset = true;
  std::vector<double> episode_return;  // per environment agent, current episode
};

inline RunState make_run_state(std::unique_ptr<envs::MultiAgentEnv> env, std::vector<Team> teams,
                               std::uint64_t seed) {
  RunState s;
  const std::size_t n = env->spec().n_agents;
  std::vector<int> owner(n, -1);
  for (std::size_t t = 0; t < teams.size(); ++t) {
    for (std::size_t m : teams[t].members) {
      if (m >= n || owner[m] >= 0) throw ConfigError("teams must partition the environment agents");
      owner[m] = static_cast<int>(t);
    }
  }
  if (std::find(owner.begin(), owner.end(), -1) != owner.end()) {
    throw ConfigError("every environment agent needs a team");
  }
  s.env = std::move(env);
  s.teams = std::move(teams);
  s.env_rng.seed(derive_seed(seed, 1000));
  s.episode_return.assign(n, 0.0);
  return s;
}

/// One environment step with behavior actions, transition storage and any
/// due update rounds. Returns the environment's step result.
inline envs::StepResult training_iteration(RunState& s) {
  if (s.need_reset) {
    s.obs = s.env->reset(s.env_rng);
    for (auto& t : s.teams) t.learner.begin_episode();
    std::fill(s.episode_return.begin(), s.episode_return.end(), 0.0);
    s.need_reset = false;
  }
  std::vector<Vector> joint(s.env->spec().n_agents);
  for (auto& t : s.teams) {
    const double sigma = t.learner.config().sigma_at(s.step);
    const auto a = t.learner.act(pick(s.obs, t.members), sigma);
    for (std::size_t m = 0; m < t.members.size(); ++m) joint[t.members[m]] = a[m];
  }
  envs::StepResult r = s.env->step(joint);
  ++s.step;
  for (std::size_t i = 0; i < r.rewards.size(); ++i) s.episode_return[i] += r.rewards[i];
  for (auto& t : s.teams) {
    replay::Transition tr{pick(s.obs, t.members), pick(joint, t.members), pick(r.rewards, t.members),
                          pick(r.obs, t.members), r.terminal};
    t.learner.record(tr);
    if (s.step % t.learner.config().update_period == 0 && t.learner.ready()) t.learner.update();
  }
  s.obs = r.obs;
  if (r.terminal) {
    s.need_reset = true;
    ++s.episodes;
  }
  return r;
}

}  // namespace gcpn::algos
