#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "gcpn/envs/pomg.hpp"

namespace gcpn::envs {

using Vec2 = Eigen::Vector2d;

enum class RewardMode { shared, individual };

inline const char* to_string(RewardMode m) { return m == RewardMode::shared ? "shared" : "individual"; }

inline RewardMode reward_mode_from_string(const std::string& s) {
  if (s == "shared") return RewardMode::shared;
  if (s == "individual") return RewardMode::individual;
  throw ConfigError("unknown reward mode '" + s + "'");
}

/// Damped point-mass physics shared by the particle tasks.
struct ParticlePhysics {
  double damping = 0.5;
  double dt = 0.1;
  double arena = 1.0;  // positions live in [-arena, arena]^2
};

struct ParticleConfig {
  std::size_t n_predators = 3;
  std::size_t n_landmarks = 2;
  bool prey_present = true;
  ParticlePhysics physics;
  double predator_accel = 3.0;
  double prey_accel = 4.0;
  double predator_max_speed = 1.0;
  double prey_max_speed = 1.3;
  double predator_radius = 0.075;
  double prey_radius = 0.05;
  double landmark_radius = 0.2;
  double catch_reward = 10.0;
  double boundary_margin = 0.9;   // prey penalty starts beyond this |coordinate|
  double boundary_penalty = 10.0;  // per unit beyond the margin
  RewardMode reward_mode = RewardMode::individual;
  int horizon = 25;
  double gamma = 0.95;

  void validate() const {
    if (n_predators < 1) throw ConfigError("particle: need at least one predator");
    if (!(prey_max_speed > predator_max_speed)) {
      throw ConfigError("particle: prey max speed must exceed predator max speed");
    }
    if (!(physics.damping >= 0.0 && physics.damping < 1.0) || physics.dt <= 0.0) {
      throw ConfigError("particle: damping must lie in [0,1) and dt > 0");
    }
  }
};

struct Particle {
  Vec2 pos = Vec2::Zero();
  Vec2 vel = Vec2::Zero();
  double radius = 0.05;
  double accel = 1.0;
  double max_speed = 1.0;
};

namespace detail {

// v' = damping * v + accel * a * dt, capped at max_speed; p' = p + v' dt.
inline void integrate(Particle& p, const Vec2& action, const ParticlePhysics& ph) {
  p.vel = ph.damping * p.vel + p.accel * action * ph.dt;
  const double speed = p.vel.norm();
  if (speed > p.max_speed) p.vel *= p.max_speed / speed;
  p.pos += p.vel * ph.dt;
}

inline void clamp_to_arena(Particle& p, double arena) {
  p.pos = p.pos.cwiseMax(-arena).cwiseMin(arena);
}

/// Landmarks are impassable: overlapping particles are pushed out radially.
inline void push_out(Particle& p, const Vec2& center, double landmark_radius) {
  const double min_dist = p.radius + landmark_radius;
  Vec2 d = p.pos - center;
  const double dist = d.norm();
  if (dist >= min_dist) return;
  if (dist == 0.0) d = Vec2(1.0, 0.0);
  else d /= dist;
  p.pos = center + d * min_dist;
}

inline Vec2 action2(const Vector& a) { return {a(0), a(1)}; }

}  // namespace detail

/// Predators chase a faster prey around landmark obstacles. Agents are the
/// predators 0..n-1 followed by the prey.
class ParticleWorld : public MultiAgentEnv {
 public:
  explicit ParticleWorld(ParticleConfig cfg) : cfg_(std::move(cfg)) {
    cfg_.validate();
    spec_.n_agents = cfg_.n_predators + 1;
    for (std::size_t i = 0; i < cfg_.n_predators; ++i) spec_.obs_dims.push_back(predator_obs_dim());
    spec_.obs_dims.push_back(prey_obs_dim());
    spec_.action_dims.assign(spec_.n_agents, 2);
    spec_.action_boxes.assign(spec_.n_agents, Box::uniform(2, -1.0, 1.0));
    spec_.horizon = cfg_.horizon;
    spec_.gamma = cfg_.gamma;
    spec_.validate();
    predators_.resize(cfg_.n_predators);
    for (auto& p : predators_) {
      p.radius = cfg_.predator_radius;
      p.accel = cfg_.predator_accel;
      p.max_speed = cfg_.predator_max_speed;
    }
    prey_.radius = cfg_.prey_radius;
    prey_.accel = cfg_.prey_accel;
    prey_.max_speed = cfg_.prey_max_speed;
    landmarks_.assign(cfg_.n_landmarks, Vec2::Zero());
  }

  const PomgSpec& spec() const override { return spec_; }
  const ParticleConfig& config() const { return cfg_; }
  int steps_taken() const override { return step_; }
  std::size_t prey_index() const { return cfg_.n_predators; }

  Eigen::Index predator_obs_dim() const {
    return static_cast<Eigen::Index>(4 + 2 * cfg_.n_landmarks + 2 * (cfg_.n_predators - 1) + 4);
  }
  Eigen::Index prey_obs_dim() const {
    return static_cast<Eigen::Index>(4 + 2 * cfg_.n_landmarks + 2 * cfg_.n_predators);
  }

  std::vector<Vector> reset(Rng& rng) override {
    const double a = cfg_.physics.arena;
    std::uniform_real_distribution<double> u(-a, a);
    std::uniform_real_distribution<double> ul(-0.9 * a, 0.9 * a);
    for (auto& p : predators_) {
      p.pos = Vec2(u(rng), u(rng));
      p.vel.setZero();
    }
    prey_.pos = Vec2(u(rng), u(rng));
    prey_.vel.setZero();
    for (auto& l : landmarks_) l = Vec2(ul(rng), ul(rng));
    resolve_positions();
    if (!cfg_.prey_present) prey_.pos = Vec2(1e3, 1e3);
    step_ = 0;
    done_ = false;
    return observe_all();
  }

  StepResult step(const std::vector<Vector>& joint_action) override {
    if (done_) throw ContractViolation("ParticleWorld::step called after terminal without reset");
    StepResult r;
    const auto acts = checked_actions(joint_action, r.info.action_clamped);
    for (std::size_t i = 0; i < predators_.size(); ++i) {
      detail::integrate(predators_[i], detail::action2(acts[i]), cfg_.physics);
    }
    if (cfg_.prey_present) detail::integrate(prey_, detail::action2(acts.back()), cfg_.physics);
    resolve_positions();
    ++step_;
    r.info.catchers = catch_test();
    r.rewards = predator_rewards(cfg_.reward_mode);
    r.rewards.push_back(prey_reward(r.rewards));
    r.obs = observe_all();
    r.terminal = step_ >= cfg_.horizon;
    done_ = r.terminal;
    return r;
  }

  std::unique_ptr<MultiAgentEnv> clone() const override {
    return std::make_unique<ParticleWorld>(*this);
  }

  /// Predators within touching distance of the prey (boundary inclusive).
  std::vector<std::size_t> catch_test() const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < predators_.size(); ++i) {
      const double reach = predators_[i].radius + prey_.radius;
      if ((predators_[i].pos - prey_.pos).norm() <= reach) out.push_back(i);
    }
    return out;
  }

  std::vector<double> predator_rewards(RewardMode mode) const {
    const auto catchers = catch_test();
    std::vector<double> r(predators_.size(), 0.0);
    if (mode == RewardMode::shared) {
      if (!catchers.empty()) std::fill(r.begin(), r.end(), cfg_.catch_reward);
    } else {
      for (std::size_t i : catchers) r[i] = cfg_.catch_reward;
    }
    return r;
  }

  /// Negative mean predator reward minus a soft penalty near the arena edge.
  double prey_reward(const std::vector<double>& predator_rewards) const {
    double mean = 0.0;
    for (std::size_t i = 0; i < predators_.size(); ++i) mean += predator_rewards[i];
    mean /= static_cast<double>(predators_.size());
    double penalty = 0.0;
    if (cfg_.prey_present) {
      for (int k = 0; k < 2; ++k) {
        const double x = std::abs(prey_.pos(k)) / cfg_.physics.arena;
        if (x > cfg_.boundary_margin) penalty += cfg_.boundary_penalty * (x - cfg_.boundary_margin);
      }
    }
    return -mean - penalty;
  }

  Vector observe(std::size_t agent) const {
    if (agent >= spec_.n_agents) throw std::out_of_range("ParticleWorld::observe");
    Vector o(spec_.obs_dims[agent]);
    Eigen::Index k = 0;
    auto put = [&](const Vec2& v) {
      o(k++) = v(0);
      o(k++) = v(1);
    };
    if (agent < predators_.size()) {
      const Particle& me = predators_[agent];
      put(me.vel);
      put(me.pos);
      for (const auto& l : landmarks_) put(l - me.pos);
      for (std::size_t j = 0; j < predators_.size(); ++j) {
        if (j != agent) put(predators_[j].pos - me.pos);
      }
      put(prey_.pos - me.pos);
      put(prey_.vel);
    } else {
      put(prey_.vel);
      put(prey_.pos);
      for (const auto& l : landmarks_) put(l - prey_.pos);
      for (const auto& p : predators_) put(p.pos - prey_.pos);
    }
    return o;
  }

  std::vector<Vector> observe_all() const {
    std::vector<Vector> out;
    for (std::size_t i = 0; i < spec_.n_agents; ++i) out.push_back(observe(i));
    return out;
  }

  // State access for tests and scripted scenarios.
  std::vector<Particle>& predators() { return predators_; }
  const std::vector<Particle>& predators() const { return predators_; }
  Particle& prey() { return prey_; }
  const Particle& prey() const { return prey_; }
  std::vector<Vec2>& landmarks() { return landmarks_; }

 private:
  void resolve_positions() {
    auto fix = [&](Particle& p) {
      for (const auto& l : landmarks_) detail::push_out(p, l, cfg_.landmark_radius);
      detail::clamp_to_arena(p, cfg_.physics.arena);
    };
    for (auto& p : predators_) fix(p);
    if (cfg_.prey_present) fix(prey_);
  }

  ParticleConfig cfg_;
  PomgSpec spec_;
  std::vector<Particle> predators_;
  Particle prey_;
  std::vector<Vec2> landmarks_;
  int step_ = 0;
  bool done_ = false;
};

struct ReachConfig {
  ParticlePhysics physics;
  double accel = 3.0;
  double max_speed = 1.0;
  double radius = 0.075;
  int horizon = 25;
  double gamma = 0.95;
};

/// Single particle rewarded by -|pos|^2; a sanity task for the DDPG learner.
class ReachOriginWorld : public MultiAgentEnv {
 public:
  explicit ReachOriginWorld(ReachConfig cfg = {}) : cfg_(cfg) {
    spec_.n_agents = 1;
    spec_.obs_dims = {4};
    spec_.action_dims = {2};
    spec_.action_boxes = {Box::uniform(2, -1.0, 1.0)};
    spec_.horizon = cfg_.horizon;
    spec_.gamma = cfg_.gamma;
    spec_.validate();
    p_.accel = cfg_.accel;
    p_.max_speed = cfg_.max_speed;
    p_.radius = cfg_.radius;
  }

  const PomgSpec& spec() const override { return spec_; }
  int steps_taken() const override { return step_; }

  std::vector<Vector> reset(Rng& rng) override {
    std::uniform_real_distribution<double> u(-cfg_.physics.arena, cfg_.physics.arena);
    p_.pos = Vec2(u(rng), u(rng));
    p_.vel.setZero();
    step_ = 0;
    done_ = false;
    return {observe()};
  }

  StepResult step(const std::vector<Vector>& joint_action) override {
    if (done_) throw ContractViolation("ReachOriginWorld::step called after terminal without reset");
    StepResult r;
    const auto acts = checked_actions(joint_action, r.info.action_clamped);
    detail::integrate(p_, detail::action2(acts[0]), cfg_.physics);
    detail::clamp_to_arena(p_, cfg_.physics.arena);
    ++step_;
    r.rewards = {-p_.pos.squaredNorm()};
    r.obs = {observe()};
    r.terminal = step_ >= cfg_.horizon;
    done_ = r.terminal;
    return r;
  }

  std::unique_ptr<MultiAgentEnv> clone() const override {
    return std::make_unique<ReachOriginWorld>(*this);
  }

  double distance_to_origin() const { return p_.pos.norm(); }
  Particle& particle() { return p_; }

 private:
  Vector observe() const {
    Vector o(4);
    o << p_.vel(0), p_.vel(1), p_.pos(0), p_.pos(1);
    return o;
  }

  ReachConfig cfg_;
  PomgSpec spec_;
  Particle p_;
  int step_ = 0;
  bool done_ = false;
};

}  // namespace gcpn::envs
