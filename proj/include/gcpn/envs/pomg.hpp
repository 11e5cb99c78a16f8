#pragma once

#include <Eigen/Dense>

#include <memory>
#include <random>
#include <string>
#include <vector>

#include "gcpn/error.hpp"

namespace gcpn::envs {

using Vector = Eigen::VectorXd;
using Rng = std::mt19937_64;

/// Per-dimension [low, high] action bounds.
struct Box {
  Vector low;
  Vector high;

  static Box uniform(Eigen::Index dim, double lo, double hi) {
    return {Vector::Constant(dim, lo), Vector::Constant(dim, hi)};
  }
  Eigen::Index dim() const { return low.size(); }

  /// Clamps in place; returns true if anything moved.
  bool clamp(Vector& a) const {
    bool moved = false;
    for (Eigen::Index k = 0; k < a.size(); ++k) {
      const double c = std::min(std::max(a(k), low(k)), high(k));
      if (c != a(k) || std::isnan(a(k))) moved = true;
      a(k) = std::isnan(a(k)) ? low(k) : c;
    }
    return moved;
  }
};

struct PomgSpec {
  std::size_t n_agents = 0;
  std::vector<Eigen::Index> obs_dims;
  std::vector<Eigen::Index> action_dims;
  std::vector<Box> action_boxes;
  int horizon = 1;
  double gamma = 0.95;

  void validate() const {
    if (n_agents == 0 || obs_dims.size() != n_agents || action_dims.size() != n_agents ||
        action_boxes.size() != n_agents) {
      throw ConfigError("PomgSpec: per-agent lists must have n_agents entries");
    }
    for (std::size_t i = 0; i < n_agents; ++i) {
      if (obs_dims[i] < 1 || action_dims[i] < 1) throw ConfigError("PomgSpec: dims must be positive");
      if (action_boxes[i].dim() != action_dims[i]) throw ConfigError("PomgSpec: box dim mismatch");
    }
    if (!(gamma > 0.0 && gamma < 1.0)) throw ConfigError("PomgSpec: gamma must lie in (0,1)");
    if (horizon < 1) throw ConfigError("PomgSpec: horizon must be >= 1");
  }
};

/// Side information from one step. Fields irrelevant to an environment stay at defaults.
struct StepInfo {
  bool action_clamped = false;
  // particle worlds
  std::vector<std::size_t> catchers;
  // microgrid
  bool flows_projected = false;
  bool soc_clamped = false;
  double total_purchase = 0.0;
  std::vector<double> purchases;
  std::vector<double> costs;
};

struct StepResult {
  std::vector<Vector> obs;
  std::vector<double> rewards;
  bool terminal = false;
  StepInfo info;
};

/// Partially observable Markov game: private observations, joint action,
/// per-agent rewards, time-limited episodes.
class MultiAgentEnv {
 public:
  virtual ~MultiAgentEnv() = default;
  virtual const PomgSpec& spec() const = 0;
  virtual std::vector<Vector> reset(Rng& rng) = 0;
  virtual StepResult step(const std::vector<Vector>& joint_action) = 0;
  virtual std::unique_ptr<MultiAgentEnv> clone() const = 0;
  virtual int steps_taken() const = 0;

 protected:
  /// Copies and clamps the joint action against the declared boxes.
  std::vector<Vector> checked_actions(const std::vector<Vector>& joint_action, bool& clamped) const {
    const PomgSpec& s = spec();
    if (joint_action.size() != s.n_agents) {
      throw DimensionError("step: expected " + std::to_string(s.n_agents) + " actions, got " +
                           std::to_string(joint_action.size()));
    }
    std::vector<Vector> out = joint_action;
    clamped = false;
    for (std::size_t i = 0; i < s.n_agents; ++i) {
      if (out[i].size() != s.action_dims[i]) {
        throw DimensionError("step: action " + std::to_string(i) + " has wrong dimension");
      }
      clamped = s.action_boxes[i].clamp(out[i]) || clamped;
    }
    return out;
  }
};

}  // namespace gcpn::envs
