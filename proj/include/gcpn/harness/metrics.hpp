#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>
#include <vector>

#include "gcpn/algos.hpp"
#include "gcpn/envs/particle_world.hpp"
#include "gcpn/envs/pomg.hpp"

namespace gcpn::harness {

using algos::Matrix;
using algos::Vector;
using Rng = std::mt19937_64;

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

/// Execution-time view of a team: greedy actors and action maps, nothing else.
struct ExecTeam {
  std::vector<std::size_t> members;
  std::size_t n_sub = 1;
  std::vector<std::vector<ndgrad::MlpSpec>> specs;  // [agent][k]
  std::vector<std::vector<ndgrad::ParamVector>> params;
  std::vector<algos::ActionMap> maps;

  Vector act(std::size_t agent, const Vector& obs, std::size_t k) const {
    const Matrix o = obs;
    return maps[agent].apply(ndgrad::forward_batch(specs[agent][k], params[agent][k], o)).col(0);
  }
};

inline ExecTeam exec_team(const algos::Team& t) {
  const algos::PolicySet& ps = t.learner.policies();
  ExecTeam e;
  e.members = t.members;
  e.n_sub = ps.n_sub;
  e.maps = ps.maps;
  for (const auto& a : ps.agents) {
    e.specs.emplace_back();
    e.params.emplace_back();
    for (const auto& net : a.actors) {
      e.specs.back().push_back(net.spec);
      e.params.back().push_back(net.online);
    }
  }
  return e;
}

/// Joint execution policy over all environment agents.
class JointPolicy {
 public:
  virtual ~JointPolicy() = default;
  virtual void begin_episode(Rng&) {}
  virtual std::vector<Vector> act(const std::vector<Vector>& obs) const = 0;
};

/// Greedy actors of every team; each team draws its sub-policy per episode.
class ExecPolicy : public JointPolicy {
 public:
  explicit ExecPolicy(std::vector<ExecTeam> teams) : teams_(std::move(teams)), ks_(teams_.size(), 0) {
    for (const auto& t : teams_) n_ += t.members.size();
  }

  void begin_episode(Rng& rng) override {
    for (std::size_t t = 0; t < teams_.size(); ++t) {
      const std::size_t k = teams_[t].n_sub;
      ks_[t] = k > 1 ? std::uniform_int_distribution<std::size_t>(0, k - 1)(rng) : 0;
    }
  }

  std::vector<Vector> act(const std::vector<Vector>& obs) const override {
    std::vector<Vector> joint(n_);
    for (std::size_t t = 0; t < teams_.size(); ++t) {
      const auto& team = teams_[t];
      for (std::size_t m = 0; m < team.members.size(); ++m) {
        joint[team.members[m]] = team.act(m, obs[team.members[m]], ks_[t]);
      }
    }
    return joint;
  }

  const std::vector<ExecTeam>& teams() const { return teams_; }

 private:
  std::vector<ExecTeam> teams_;
  std::vector<std::size_t> ks_;
  std::size_t n_ = 0;
};

inline ExecPolicy exec_policy(const std::vector<algos::Team>& teams) {
  std::vector<ExecTeam> out;
  for (const auto& t : teams) out.push_back(exec_team(t));
  return ExecPolicy(std::move(out));
}

/// Peak-to-average ratio; nullopt for an empty or non-positive-mean series.
inline std::optional<double> compute_par(const std::vector<double>& series) {
  if (series.empty()) return std::nullopt;
  const double mean = std::accumulate(series.begin(), series.end(), 0.0) / static_cast<double>(series.size());
  if (!(mean > 0.0)) return std::nullopt;
  return *std::max_element(series.begin(), series.end()) / mean;
}

struct EvalResult {
  std::size_t episodes = 0;
  std::vector<double> mean_return;  // per environment agent, undiscounted
  double score = 0.0;               // sum of scored agents' mean returns
  double catch_rate = kNaN;         // particle worlds
  double cost = kNaN;               // microgrid: mean episode energy cost
  double par = kNaN;                // microgrid: mean episode PAR of total purchase
  std::vector<double> total_purchase;  // microgrid: last episode's C_t series
  double final_distance = kNaN;        // reach task: mean distance to the origin at episode end
};

/// Noise-free rollouts, undiscounted. `proto` is cloned, never stepped.
inline EvalResult evaluate(JointPolicy& policy, const envs::MultiAgentEnv& proto, std::size_t episodes, Rng& rng,
                           const std::vector<std::size_t>& scored) {
  if (episodes < 1) throw ConfigError("evaluate: need at least one episode");
  const std::size_t n = proto.spec().n_agents;
  const bool particle = dynamic_cast<const envs::ParticleWorld*>(&proto) != nullptr;
  EvalResult r;
  r.episodes = episodes;
  r.mean_return.assign(n, 0.0);
  std::size_t caught = 0, par_count = 0;
  double cost = 0.0, par = 0.0;
  bool grid = false;
  double distance = 0.0;
  for (std::size_t ep = 0; ep < episodes; ++ep) {
    auto env = proto.clone();
    std::vector<Vector> obs = env->reset(rng);
    policy.begin_episode(rng);
    bool any_catch = false;
    std::vector<double> purchase;
    for (;;) {
      const envs::StepResult s = env->step(policy.act(obs));
      for (std::size_t i = 0; i < n; ++i) r.mean_return[i] += s.rewards[i];
      if (!s.info.catchers.empty()) any_catch = true;
      if (!s.info.purchases.empty()) {
        grid = true;
        purchase.push_back(s.info.total_purchase);
        for (double c : s.info.costs) cost += c;
      }
      obs = s.obs;
      if (s.terminal) break;
    }
    if (const auto* reach = dynamic_cast<const envs::ReachOriginWorld*>(env.get())) distance += reach->distance_to_origin();
    caught += any_catch ? 1 : 0;
    if (auto p = compute_par(purchase)) {
      par += *p;
      ++par_count;
    }
    if (ep + 1 == episodes) r.total_purchase = purchase;
  }
  const auto e = static_cast<double>(episodes);
  for (double& v : r.mean_return) v /= e;
  for (std::size_t i : scored) r.score += r.mean_return.at(i);
  if (particle) r.catch_rate = static_cast<double>(caught) / e;
  if (dynamic_cast<const envs::ReachOriginWorld*>(&proto)) r.final_distance = distance / e;
  if (grid) {
    r.cost = cost / e;
    r.par = par_count ? par / static_cast<double>(par_count) : kNaN;
  }
  return r;
}

/// Mean over probe points of the population std, across agents, of the
/// agents' critic values. Every critic must share one network shape.
inline double critic_spread(const std::vector<const algos::Net*>& critics, const std::vector<Matrix>& inputs) {
  if (critics.size() < 2 || inputs.size() != critics.size()) {
    throw ContractViolation("critic_spread: need two or more critics with one input each");
  }
  for (const auto* c : critics) {
    if (!(c->spec == critics[0]->spec)) throw DimensionError("critic_spread: heterogeneous critic layouts");
  }
  Matrix q(static_cast<Eigen::Index>(critics.size()), inputs[0].cols());
  for (std::size_t i = 0; i < critics.size(); ++i) {
    q.row(static_cast<Eigen::Index>(i)) = critics[i]->forward(inputs[i]);
  }
  const Eigen::RowVectorXd mean = q.colwise().mean();
  const Eigen::RowVectorXd var = (q.rowwise() - mean).array().square().colwise().mean();
  return var.array().sqrt().mean();
}

/// Spread of a team's critics at a joint probe batch (each agent's critic
/// sees the probe through its own input layout).
inline double critic_spread(const algos::PolicySet& ps, const replay::Batch& probe) {
  std::vector<const algos::Net*> critics;
  std::vector<Matrix> inputs;
  for (std::size_t i = 0; i < ps.n_agents(); ++i) {
    critics.push_back(&ps.critic(i));
    inputs.push_back(ps.layout(i).build(probe.obs, probe.actions));
  }
  return critic_spread(critics, inputs);
}

/// Joint (o, a) samples for a team, from uniform random actions in a fresh
/// copy of the environment seeded by `seed`.
inline replay::Batch make_probe(const envs::MultiAgentEnv& proto, const std::vector<std::size_t>& members,
                                std::size_t size, std::uint64_t seed) {
  Rng rng(seed);
  auto env = proto.clone();
  const auto& sp = env->spec();
  replay::ReplayBuffer buf(replay::Spaces{algos::pick(sp.obs_dims, members), algos::pick(sp.action_dims, members)},
                           size);
  std::vector<Vector> obs = env->reset(rng);
  while (buf.size() < size) {
    std::vector<Vector> joint;
    for (std::size_t i = 0; i < sp.n_agents; ++i) {
      const auto& box = sp.action_boxes[i];
      Vector a(box.dim());
      for (Eigen::Index d = 0; d < a.size(); ++d) {
        a(d) = std::uniform_real_distribution<double>(box.low(d), box.high(d))(rng);
      }
      joint.push_back(a);
    }
    const auto s = env->step(joint);
    buf.push({algos::pick(obs, members), algos::pick(joint, members), algos::pick(s.rewards, members),
              algos::pick(s.obs, members), s.terminal});
    obs = s.terminal ? env->reset(rng) : s.obs;
  }
  std::vector<std::size_t> all(size);
  std::iota(all.begin(), all.end(), std::size_t{0});
  return buf.gather(all);
}

struct Normalized {
  std::vector<double> values;
  bool flagged = false;  // baseline mean was zero; values are raw
};

inline Normalized normalize(const std::vector<double>& values, const std::vector<double>& baseline) {
  if (baseline.empty()) return {values, true};
  const double mean = std::accumulate(baseline.begin(), baseline.end(), 0.0) / static_cast<double>(baseline.size());
  if (mean == 0.0 || !std::isfinite(mean)) return {values, true};
  Normalized out;
  for (double v : values) out.values.push_back(v / mean);
  return out;
}

}  // namespace gcpn::harness
