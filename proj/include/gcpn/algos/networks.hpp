#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <random>
#include <string>
#include <vector>

#include "gcpn/envs/pomg.hpp"
#include "gcpn/ndgrad.hpp"

namespace gcpn::algos {

using ndgrad::Matrix;
using ndgrad::ParamVector;
using Vector = Eigen::VectorXd;
using Rng = std::mt19937_64;

enum class LearnerKind { ddpg, maddpg, cf, fdmarl, gcpn1, gcpn2 };

inline const char* to_string(LearnerKind k) {
  switch (k) {
    case LearnerKind::ddpg: return "ddpg";
    case LearnerKind::maddpg: return "maddpg";
    case LearnerKind::cf: return "cf";
    case LearnerKind::fdmarl: return "fdmarl";
    case LearnerKind::gcpn1: return "gcpn1";
    case LearnerKind::gcpn2: return "gcpn2";
  }
  return "?";
}

inline LearnerKind learner_kind_from_string(const std::string& s) {
  for (auto k : {LearnerKind::ddpg, LearnerKind::maddpg, LearnerKind::cf, LearnerKind::fdmarl,
                 LearnerKind::gcpn1, LearnerKind::gcpn2}) {
    if (s == to_string(k)) return k;
  }
  throw ConfigError("unknown learner kind '" + s + "'");
}

inline bool is_gcpn(LearnerKind k) { return k == LearnerKind::gcpn1 || k == LearnerKind::gcpn2; }
inline bool uses_inferring(LearnerKind k) {
  return k == LearnerKind::maddpg || k == LearnerKind::fdmarl || is_gcpn(k);
}

/// A network with its slowly tracking target copy and optimizer state.
struct Net {
  ndgrad::MlpSpec spec;
  ParamVector online;
  ParamVector target;
  ndgrad::AdamState opt;

  Matrix forward(const Matrix& x, ndgrad::Tape* tape = nullptr) const {
    return ndgrad::forward_batch(spec, online, x, tape);
  }
  Matrix forward_target(const Matrix& x) const { return ndgrad::forward_batch(spec, target, x); }
};

template <class R>
Net make_net(const ndgrad::MlpSpec& spec, double lr, R& rng, double final_scale = 0.0) {
  Net n;
  n.spec = spec;
  n.online = ndgrad::init_params(spec, rng, final_scale);
  n.target = n.online;
  n.opt = ndgrad::AdamState(n.online.size(), ndgrad::AdamHyper{lr});
  return n;
}

/// Affine map from the tanh output range [-1,1] onto an action box.
struct ActionMap {
  Vector scale;   // (high - low) / 2
  Vector offset;  // (high + low) / 2

  static ActionMap from_box(const envs::Box& b) {
    return {(b.high - b.low) / 2.0, (b.high + b.low) / 2.0};
  }
  Matrix apply(const Matrix& y) const {
    Matrix a = scale.asDiagonal() * y;
    a.colwise() += offset;
    return a;
  }
  /// Chain rule through the map: d/dy given d/da.
  Matrix pullback(const Matrix& grad_a) const { return scale.asDiagonal() * grad_a; }
};

/// Row layout of a critic input: observations of the listed agents, then
/// their actions, both in listed order.
class CriticLayout {
 public:
  CriticLayout() = default;
  CriticLayout(std::vector<std::size_t> agents, const std::vector<Eigen::Index>& obs_dims,
               const std::vector<Eigen::Index>& action_dims)
      : agents_(std::move(agents)) {
    const std::size_t n = obs_dims.size();
    obs_row_.assign(n, -1);
    act_row_.assign(n, -1);
    obs_dims_ = obs_dims;
    act_dims_ = action_dims;
    Eigen::Index r = 0;
    for (std::size_t j : agents_) {
      obs_row_[j] = r;
      r += obs_dims[j];
    }
    for (std::size_t j : agents_) {
      act_row_[j] = r;
      r += action_dims[j];
    }
    input_dim_ = r;
  }

  Eigen::Index input_dim() const { return input_dim_; }
  const std::vector<std::size_t>& agents() const { return agents_; }
  bool contains(std::size_t j) const { return j < act_row_.size() && act_row_[j] >= 0; }
  Eigen::Index action_row(std::size_t j) const {
    if (!contains(j)) throw ContractViolation("critic input has no slot for agent " + std::to_string(j));
    return act_row_[j];
  }
  Eigen::Index action_dim(std::size_t j) const { return act_dims_[j]; }

  /// Stacks per-agent observation and action matrices (indexed by agent).
  Matrix build(const std::vector<Matrix>& obs, const std::vector<Matrix>& acts) const {
    const Eigen::Index b = obs[agents_.front()].cols();
    Matrix x(input_dim_, b);
    for (std::size_t j : agents_) {
      x.middleRows(obs_row_[j], obs_dims_[j]) = obs[j];
      x.middleRows(act_row_[j], act_dims_[j]) = acts[j];
    }
    return x;
  }

  bool operator==(const CriticLayout&) const = default;

 private:
  std::vector<std::size_t> agents_;
  std::vector<Eigen::Index> obs_row_, act_row_, obs_dims_, act_dims_;
  Eigen::Index input_dim_ = 0;
};

struct NetSizes {
  Eigen::Index hidden = 64;
  double critic_lr = 1e-3;
  double actor_lr = 1e-4;
  double infer_lr = 1e-3;
  double actor_final_scale = 3e-3;
};

/// Networks owned by one agent.
struct AgentNets {
  std::vector<Net> actors;              // greedy actor per sub-policy
  std::vector<std::vector<Net>> gcpns;  // [sub-policy][peer slot]
  std::vector<Net> infer;               // [peer slot]: predicts that peer's action
};

/// Everything a team of learners owns. Peer slots enumerate the other agents
/// in increasing index order.
struct PolicySet {
  LearnerKind kind = LearnerKind::maddpg;
  std::size_t n_sub = 1;
  std::vector<Eigen::Index> obs_dims;
  std::vector<Eigen::Index> action_dims;
  std::vector<ActionMap> maps;
  std::vector<AgentNets> agents;
  std::vector<Net> critics;  // one per agent, or a single global critic (CF)
  std::vector<CriticLayout> layouts;

  std::size_t n_agents() const { return obs_dims.size(); }
  bool global_critic() const { return critics.size() == 1 && n_agents() > 1; }
  Net& critic(std::size_t i) { return critics[global_critic() ? 0 : i]; }
  const Net& critic(std::size_t i) const { return critics[global_critic() ? 0 : i]; }
  const CriticLayout& layout(std::size_t i) const { return layouts[i]; }

  std::vector<std::size_t> peers(std::size_t i) const {
    std::vector<std::size_t> p;
    for (std::size_t j = 0; j < n_agents(); ++j) {
      if (j != i) p.push_back(j);
    }
    return p;
  }
  static std::size_t slot(std::size_t i, std::size_t j) {
    if (i == j) throw ContractViolation("peer slot requested for the agent itself");
    return j < i ? j : j - 1;
  }

  /// Visits every network with a stable name, e.g. "agent_0/actor_k1".
  template <class F>
  void for_each_net(F&& f) {
    for (std::size_t c = 0; c < critics.size(); ++c) {
      f(global_critic() ? std::string("global_critic") : "agent_" + std::to_string(c) + "/critic",
        critics[c]);
    }
    for (std::size_t i = 0; i < agents.size(); ++i) {
      const std::string base = "agent_" + std::to_string(i) + "/";
      for (std::size_t k = 0; k < agents[i].actors.size(); ++k) {
        f(base + "actor_k" + std::to_string(k), agents[i].actors[k]);
      }
      for (std::size_t k = 0; k < agents[i].gcpns.size(); ++k) {
        for (std::size_t s = 0; s < agents[i].gcpns[k].size(); ++s) {
          f(base + "gcpn_k" + std::to_string(k) + "_to" + std::to_string(peers(i)[s]),
            agents[i].gcpns[k][s]);
        }
      }
      for (std::size_t s = 0; s < agents[i].infer.size(); ++s) {
        f(base + "infer_" + std::to_string(peers(i)[s]), agents[i].infer[s]);
      }
    }
  }
};

/// Builds a freshly initialized policy set. Initialization order is fixed:
/// (global critic), then per agent: critic, actors, GCPNs, inferring nets.
/// A one-agent MADDPG set therefore consumes `rng` exactly like a DDPG set.
template <class R>
PolicySet make_policy_set(LearnerKind kind, std::size_t n_sub, const std::vector<Eigen::Index>& obs_dims,
                          const std::vector<Eigen::Index>& action_dims,
                          const std::vector<envs::Box>& boxes, const NetSizes& sz, R& rng) {
  const std::size_t n = obs_dims.size();
  if (n == 0 || action_dims.size() != n || boxes.size() != n) {
    throw ConfigError("policy set: per-agent lists must agree");
  }
  if (n_sub < 1) throw ConfigError("policy set: need at least one sub-policy");
  if (is_gcpn(kind) && n < 2) throw ConfigError("GCPN learners need at least two agents");
  PolicySet ps;
  ps.kind = kind;
  ps.n_sub = n_sub;
  ps.obs_dims = obs_dims;
  ps.action_dims = action_dims;
  std::vector<std::size_t> all(n);
  for (std::size_t j = 0; j < n; ++j) all[j] = j;
  for (std::size_t i = 0; i < n; ++i) {
    ps.maps.push_back(ActionMap::from_box(boxes[i]));
    ps.layouts.emplace_back(kind == LearnerKind::ddpg ? std::vector<std::size_t>{i} : all, obs_dims,
                            action_dims);
  }
  auto critic_spec = [&](std::size_t i) {
    return ndgrad::default_mlp(ps.layouts[i].input_dim(), 1, ndgrad::Activation::identity, sz.hidden);
  };
  auto policy_spec = [&](Eigen::Index in, Eigen::Index out) {
    return ndgrad::default_mlp(in, out, ndgrad::Activation::tanh, sz.hidden);
  };
  const bool global = kind == LearnerKind::cf && n > 1;
  if (global) ps.critics.push_back(make_net(critic_spec(0), sz.critic_lr, rng));
  ps.agents.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (!global) ps.critics.push_back(make_net(critic_spec(i), sz.critic_lr, rng));
    AgentNets& a = ps.agents[i];
    for (std::size_t k = 0; k < n_sub; ++k) {
      a.actors.push_back(make_net(policy_spec(obs_dims[i], action_dims[i]), sz.actor_lr, rng,
                                  sz.actor_final_scale));
    }
    if (is_gcpn(kind)) {
      a.gcpns.resize(n_sub);
      for (std::size_t k = 0; k < n_sub; ++k) {
        for (std::size_t s = 0; s + 1 < n; ++s) {
          a.gcpns[k].push_back(make_net(policy_spec(obs_dims[i], action_dims[i]), sz.actor_lr, rng,
                                        sz.actor_final_scale));
        }
      }
    }
    if (uses_inferring(kind)) {
      for (std::size_t j : ps.peers(i)) {
        a.infer.push_back(make_net(policy_spec(obs_dims[j], action_dims[j]), sz.infer_lr, rng,
                                   sz.actor_final_scale));
      }
    }
  }
  return ps;
}

/// Deterministic action of a policy network for a batch of observations.
inline Matrix policy_action(const Net& net, const ActionMap& map, const Matrix& obs, bool target = false) {
  return map.apply(target ? net.forward_target(obs) : net.forward(obs));
}

inline bool all_finite(const PolicySet& ps) {
  bool ok = true;
  const_cast<PolicySet&>(ps).for_each_net([&](const std::string&, const Net& n) {
    ok = ok && n.online.all_finite() && n.target.all_finite();
  });
  return ok;
}

}  // namespace gcpn::algos
