#pragma once

#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include "gcpn/algos/networks.hpp"
#include "gcpn/replay/replay_buffer.hpp"

namespace gcpn::algos {

using replay::Batch;

struct UpdateHyper {
  double gamma = 0.95;
  bool terminal_masking = false;  // off: bootstrap through time-limit ends
  double grad_clip = 0.0;         // global-norm clip, 0 disables
};

namespace detail {

inline void clip_norm(ParamVector& g, double max_norm) {
  if (max_norm <= 0.0) return;
  const double n = g.flat().norm();
  if (n > max_norm) {
    for (std::size_t i = 0; i < g.size(); ++i) g[i] *= max_norm / n;
  }
}

inline void optimize(Net& net, const ndgrad::Tape& tape, const Matrix& seed, ndgrad::Direction dir,
                     double clip) {
  ndgrad::Gradient g = ndgrad::backward(tape, seed);
  clip_norm(g.params, clip);
  ndgrad::adam_step(net.online, g.params, net.opt, dir);
}

/// Mean-squared regression of a scalar network onto y; one optimizer step.
inline double regress(Net& net, const Matrix& input, const Matrix& y, double clip) {
  ndgrad::Tape tape;
  const Matrix out = net.forward(input, &tape);
  const Matrix diff = out - y;
  const double count = static_cast<double>(diff.size());
  const double loss = diff.squaredNorm() / count;
  optimize(net, tape, (2.0 / count) * diff, ndgrad::Direction::minimize, clip);
  return loss;
}

/// Per-sample gradient of a critic with respect to one action slot.
inline Matrix action_gradient(const Net& critic, const Matrix& input, Eigen::Index row, Eigen::Index dim) {
  ndgrad::Tape tape;
  const Matrix q = critic.forward(input, &tape);
  const ndgrad::Gradient g =
      ndgrad::backward(tape, Matrix::Ones(1, q.cols()), ndgrad::BackwardMode::inputs_only);
  return g.input.middleRows(row, dim);
}

/// Ascends sum_b <grad_a(:,b), a(:,b)> through the policy; returns its mean.
inline double ascend_policy(Net& policy, const ActionMap& map, const Matrix& obs,
                            const std::function<Matrix(const Matrix&)>& grad_at, double clip) {
  ndgrad::Tape tape;
  const Matrix y = policy.forward(obs, &tape);
  const Matrix a = map.apply(y);
  const Matrix ga = grad_at(a);
  const double b = static_cast<double>(obs.cols());
  optimize(policy, tape, map.pullback(ga) / b, ndgrad::Direction::maximize, clip);
  return (ga.array() * a.array()).sum() / b;
}

}  // namespace detail

/// Own next action for critic targets: target actor for the MADDPG family,
/// target GCPNs for GCPN learners (mean over peers for GCPN2, a random peer's
/// GCPN per sample for GCPN1; no draw when there is a single peer).
inline Matrix own_next_action(const PolicySet& ps, std::size_t i, std::size_t k, const Matrix& next_obs,
                              Rng& rng) {
  const ActionMap& map = ps.maps[i];
  if (!is_gcpn(ps.kind)) return policy_action(ps.agents[i].actors[k], map, next_obs, true);
  const auto& bank = ps.agents[i].gcpns[k];
  if (ps.kind == LearnerKind::gcpn2 || bank.size() == 1) {
    Matrix acc = policy_action(bank[0], map, next_obs, true);
    for (std::size_t s = 1; s < bank.size(); ++s) acc += policy_action(bank[s], map, next_obs, true);
    return acc / static_cast<double>(bank.size());
  }
  std::vector<Matrix> outs;
  for (const Net& g : bank) outs.push_back(policy_action(g, map, next_obs, true));
  std::uniform_int_distribution<std::size_t> pick(0, bank.size() - 1);
  Matrix a(outs[0].rows(), outs[0].cols());
  for (Eigen::Index c = 0; c < a.cols(); ++c) a.col(c) = outs[pick(rng)].col(c);
  return a;
}

inline Matrix td_target(const Matrix& next_q, const Eigen::RowVectorXd& reward,
                        const Eigen::RowVectorXd& terminal, const UpdateHyper& h) {
  Matrix y = reward;
  if (h.terminal_masking) {
    y.array() += h.gamma * (1.0 - terminal.array()) * next_q.array();
  } else {
    y.array() += h.gamma * next_q.array();
  }
  return y;
}

/// Critic step of agent i for DDPG (local view) and the MADDPG family.
/// Peers' next actions come from agent i's inferring networks; its own from
/// own_next_action. Returns the mean squared TD error before the step.
inline double maddpg_critic_update(PolicySet& ps, std::size_t i, std::size_t k, const Batch& batch,
                                   const UpdateHyper& h, Rng& rng) {
  if (ps.global_critic()) throw ContractViolation("maddpg_critic_update on a global-critic set");
  const CriticLayout& lay = ps.layout(i);
  std::vector<Matrix> next_act(ps.n_agents());
  for (std::size_t j : lay.agents()) {
    if (j == i) {
      next_act[j] = own_next_action(ps, i, k, batch.next_obs[i], rng);
    } else {
      next_act[j] = policy_action(ps.agents[i].infer[PolicySet::slot(i, j)], ps.maps[j],
                                  batch.next_obs[j], true);
    }
  }
  Net& critic = ps.critic(i);
  const Matrix next_q = critic.forward_target(lay.build(batch.next_obs, next_act));
  const Matrix y = td_target(next_q, batch.rewards.row(static_cast<Eigen::Index>(i)), batch.terminal, h);
  return detail::regress(critic, lay.build(batch.obs, batch.actions), y, h.grad_clip);
}

/// Critic step of a DDPG agent: own observation and action only.
inline double ddpg_critic_update(PolicySet& ps, std::size_t i, std::size_t k, const Batch& batch,
                                 const UpdateHyper& h, Rng& rng) {
  if (ps.kind != LearnerKind::ddpg && ps.n_agents() != 1) {
    throw ContractViolation("ddpg_critic_update needs a DDPG policy set");
  }
  return maddpg_critic_update(ps, i, k, batch, h, rng);
}

/// Single global critic trained on the shared team reward; next actions from
/// every agent's target actor.
inline double cf_critic_update(PolicySet& ps, std::size_t k, const Batch& batch, const UpdateHyper& h) {
  if (ps.kind != LearnerKind::cf) throw ContractViolation("cf_critic_update needs a CF policy set");
  for (Eigen::Index r = 1; r < batch.rewards.rows(); ++r) {
    if (batch.rewards.row(r) != batch.rewards.row(0)) {
      throw ConfigError("CF applies only to the shared reward case; batch rewards differ across agents");
    }
  }
  const CriticLayout& lay = ps.layout(0);
  std::vector<Matrix> next_act(ps.n_agents());
  for (std::size_t j = 0; j < ps.n_agents(); ++j) {
    next_act[j] = policy_action(ps.agents[j].actors[k], ps.maps[j], batch.next_obs[j], true);
  }
  Net& critic = ps.critic(0);
  const Matrix next_q = critic.forward_target(lay.build(batch.next_obs, next_act));
  const Matrix y = td_target(next_q, batch.rewards.row(0), batch.terminal, h);
  return detail::regress(critic, lay.build(batch.obs, batch.actions), y, h.grad_clip);
}

/// Greedy actor step of agent i against its OWN critic: the stored actions
/// fill the peers' slots and the live actor fills agent i's. There is no way
/// to pass a peer critic in here. Returns the mean critic value at the new
/// actions, measured before the step.
inline double greedy_actor_update(Net& actor, const ActionMap& map, const Net& own_critic,
                                  const CriticLayout& layout, std::size_t i, const Batch& batch,
                                  double grad_clip = 0.0) {
  double value = 0.0;
  auto grad_at = [&](const Matrix& a) {
    std::vector<Matrix> acts = batch.actions;
    acts[i] = a;
    const Matrix x = layout.build(batch.obs, acts);
    value = own_critic.forward(x).mean();
    return detail::action_gradient(own_critic, x, layout.action_row(i), layout.action_dim(i));
  };
  detail::ascend_policy(actor, map, batch.obs[i], grad_at, grad_clip);
  return value;
}

/// What agent i may see of peer j's critic: gradients with respect to agent
/// i's own action slot, evaluated on shared-buffer data. Nothing else.
class PeerCriticView {
 public:
  PeerCriticView(const Net& critic, const CriticLayout& layout, std::size_t owner)
      : critic_(&critic), layout_(&layout), owner_(owner) {}

  std::size_t owner() const { return owner_; }

  /// d Q_owner / d a_i at (o, a with agent i's slot replaced by a_i).
  Matrix action_gradient(const Batch& batch, std::size_t i, const Matrix& a_i) const {
    std::vector<Matrix> acts = batch.actions;
    acts[i] = a_i;
    return detail::action_gradient(*critic_, layout_->build(batch.obs, acts), layout_->action_row(i),
                                   layout_->action_dim(i));
  }

 private:
  const Net* critic_;
  const CriticLayout* layout_;
  std::size_t owner_;
};

inline PeerCriticView peer_view(const PolicySet& ps, std::size_t j) {
  return PeerCriticView(ps.critic(j), ps.layout(j), j);
}

/// Moves agent i's GCPN aimed at peer j up peer j's critic. Returns the mean
/// first-order surrogate <dQ_j/da_i, a_i> before the step.
inline double gcpn_update(Net& gcpn, const ActionMap& map, std::size_t i, const PeerCriticView& peer,
                          const Batch& batch, double grad_clip = 0.0) {
  if (peer.owner() == i) throw ContractViolation("gcpn_update: peer critic must belong to another agent");
  auto grad_at = [&](const Matrix& a) { return peer.action_gradient(batch, i, a); };
  return detail::ascend_policy(gcpn, map, batch.obs[i], grad_at, grad_clip);
}

inline double gcpn_update(PolicySet& ps, std::size_t i, std::size_t j, std::size_t k, const Batch& batch,
                          double grad_clip = 0.0) {
  if (i == j) throw ContractViolation("gcpn_update: i == j");
  if (!is_gcpn(ps.kind)) throw ContractViolation("gcpn_update: policy set has no GCPNs");
  return gcpn_update(ps.agents[i].gcpns[k][PolicySet::slot(i, j)], ps.maps[i], i, peer_view(ps, j),
                     batch, grad_clip);
}

/// Regresses agent i's model of peer j onto j's stored actions.
inline double infer_policy_update(PolicySet& ps, std::size_t i, std::size_t j, const Batch& batch,
                                  double grad_clip = 0.0) {
  Net& net = ps.agents[i].infer[PolicySet::slot(i, j)];
  const ActionMap& map = ps.maps[j];
  ndgrad::Tape tape;
  const Matrix pred = map.apply(net.forward(batch.obs[j], &tape));
  const Matrix diff = pred - batch.actions[j];
  const double count = static_cast<double>(diff.size());
  detail::optimize(net, tape, map.pullback((2.0 / count) * diff), ndgrad::Direction::minimize, grad_clip);
  return diff.squaredNorm() / count;
}

/// True if C is square, nonnegative and every row and column sums to 1.
inline bool doubly_stochastic(const Matrix& c, double tol = 1e-12) {
  if (c.rows() != c.cols() || c.rows() == 0) return false;
  if ((c.array() < 0.0).any() || !c.allFinite()) return false;
  for (Eigen::Index r = 0; r < c.rows(); ++r) {
    if (std::abs(c.row(r).sum() - 1.0) > tol || std::abs(c.col(r).sum() - 1.0) > tol) return false;
  }
  return true;
}

inline Matrix uniform_consensus(std::size_t n) {
  const auto m = static_cast<Eigen::Index>(n);
  return Matrix::Constant(m, m, 1.0 / static_cast<double>(n));
}

/// Synchronous mixing phi_i <- sum_j C(i,j) phi_j.
inline void consensus_share(std::vector<ParamVector*> params, const Matrix& c) {
  if (!doubly_stochastic(c)) throw ConfigError("consensus_share: C must be doubly stochastic");
  if (static_cast<std::size_t>(c.rows()) != params.size()) {
    throw DimensionError("consensus_share: C size differs from the number of parameter sets");
  }
  for (auto* p : params) ndgrad::require_same_layout(*params[0], *p, "consensus_share");
  const auto n = params.size();
  const auto len = static_cast<Eigen::Index>(params[0]->size());
  Matrix stacked(len, static_cast<Eigen::Index>(n));
  for (std::size_t j = 0; j < n; ++j) stacked.col(static_cast<Eigen::Index>(j)) = params[j]->flat();
  const Matrix mixed = stacked * c.transpose();
  for (std::size_t i = 0; i < n; ++i) {
    for (Eigen::Index r = 0; r < len; ++r) (*params[i])[static_cast<std::size_t>(r)] =
        mixed(r, static_cast<Eigen::Index>(i));
  }
}

inline void consensus_share(std::vector<ParamVector>& params, const Matrix& c) {
  std::vector<ParamVector*> ptrs;
  for (auto& p : params) ptrs.push_back(&p);
  consensus_share(ptrs, c);
}

/// Exploration action of agent i under sub-policy k. GCPN learners act
/// through their GCPNs; everyone else through the greedy actor. Gaussian noise
/// is scaled by the box half-width and the result clamped to the box.
inline Vector select_behavior_action(const PolicySet& ps, std::size_t i, const Vector& obs, std::size_t k,
                                     Rng& rng, double sigma) {
  const ActionMap& map = ps.maps[i];
  const Matrix o = obs;
  Vector a;
  if (is_gcpn(ps.kind)) {
    const auto& bank = ps.agents[i].gcpns[k];
    if (ps.kind == LearnerKind::gcpn1) {
      std::size_t s = 0;
      if (bank.size() > 1) s = std::uniform_int_distribution<std::size_t>(0, bank.size() - 1)(rng);
      a = policy_action(bank[s], map, o).col(0);
    } else {
      a = Vector::Zero(ps.action_dims[i]);
      for (const Net& g : bank) a += policy_action(g, map, o).col(0);
      a /= static_cast<double>(bank.size());
    }
  } else {
    a = policy_action(ps.agents[i].actors[k], map, o).col(0);
  }
  if (sigma > 0.0) {
    std::normal_distribution<double> z(0.0, 1.0);
    for (Eigen::Index d = 0; d < a.size(); ++d) a(d) += sigma * map.scale(d) * z(rng);
  }
  const Vector lo = map.offset - map.scale, hi = map.offset + map.scale;
  return a.cwiseMax(lo).cwiseMin(hi);
}

/// Noise-free execution action: greedy actor only.
inline Vector greedy_action(const PolicySet& ps, std::size_t i, const Vector& obs, std::size_t k) {
  const Matrix o = obs;
  return policy_action(ps.agents[i].actors[k], ps.maps[i], o).col(0);
}

inline void soft_update_all(PolicySet& ps, double tau) {
  ps.for_each_net([&](const std::string&, Net& n) { ndgrad::soft_update(n.target, n.online, tau); });
}

}  // namespace gcpn::algos
