#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "gcpn/algos.hpp"
#include "gcpn/envs/config.hpp"

namespace gcpn::harness {

using envs::Json;

struct EvalSchedule {
  std::size_t every = 1000;   // environment steps between evaluation windows
  std::size_t episodes = 50;  // noise-free episodes per window
};

struct ProbeSpec {
  std::size_t size = 512;
  std::uint64_t seed = 20240601;  // pinned per run family
};

/// One experiment: an environment, a learner for the main team, and (for
/// predator-prey) a DDPG learner for the prey.
struct ExperimentConfig {
  std::string name = "experiment";
  Json env;                      // environment config object
  std::string base_dir = ".";    // relative data paths resolve against this
  algos::TrainConfig learner;
  algos::TrainConfig adversary;  // prey learner
  envs::RewardMode reward_mode = envs::RewardMode::individual;
  std::size_t train_steps = 0;
  EvalSchedule eval;
  ProbeSpec probe;
  double score_tail = 0.1;  // final fraction of windows averaged into a run score
  std::vector<std::uint64_t> seeds = {1};
  Json source;  // the parsed document, echoed into run directories

  std::string env_kind() const { return env.at("kind").get<std::string>(); }
  bool has_adversary() const { return env_kind() == "predator_prey"; }

  void validate() const {
    if (learner.kind == algos::LearnerKind::cf && reward_mode != envs::RewardMode::shared) {
      throw ConfigError("CF applies only to the shared reward case; set reward_mode to \"shared\"");
    }
    if (env_kind() == "microgrid" && reward_mode == envs::RewardMode::shared) {
      throw ConfigError("microgrid rewards are per-agent costs; reward_mode must be individual");
    }
    if (eval.every < 1 || eval.episodes < 1) throw ConfigError("eval cadence and episodes must be positive");
    if (!(score_tail > 0.0 && score_tail <= 1.0)) throw ConfigError("score_tail must lie in (0,1]");
    if (probe.size < 1) throw ConfigError("probe size must be positive");
  }
};

namespace detail {

inline algos::TrainConfig parse_learner(const Json& j, std::size_t train_steps, double env_gamma) {
  algos::TrainConfig c;
  using envs::detail::maybe;
  if (j.contains("kind")) c.kind = algos::learner_kind_from_string(j.at("kind"));
  c.gamma = env_gamma;
  maybe(j, "gamma", c.gamma);
  maybe(j, "batch_size", c.batch_size);
  maybe(j, "warmup", c.warmup);
  maybe(j, "update_period", c.update_period);
  maybe(j, "buffer_capacity", c.buffer_capacity);
  maybe(j, "tau", c.tau);
  maybe(j, "K", c.n_sub);
  maybe(j, "hidden", c.nets.hidden);
  maybe(j, "critic_lr", c.nets.critic_lr);
  maybe(j, "actor_lr", c.nets.actor_lr);
  maybe(j, "infer_lr", c.nets.infer_lr);
  maybe(j, "actor_final_scale", c.nets.actor_final_scale);
  maybe(j, "consensus_period", c.consensus_period);
  maybe(j, "terminal_masking", c.terminal_masking);
  maybe(j, "grad_clip", c.grad_clip);
  double decay_fraction = 0.5;
  if (j.contains("noise")) {
    const Json& n = j.at("noise");
    maybe(n, "sigma0", c.noise_sigma0);
    maybe(n, "sigma_min", c.noise_sigma_min);
    maybe(n, "decay_fraction", decay_fraction);
  }
  c.noise_decay_steps = static_cast<std::size_t>(decay_fraction * static_cast<double>(train_steps));
  if (j.contains("consensus")) {
    const auto rows = j.at("consensus").get<std::vector<std::vector<double>>>();
    c.consensus.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.size()));
    for (std::size_t r = 0; r < rows.size(); ++r) {
      if (rows[r].size() != rows.size()) throw ConfigError("consensus matrix must be square");
      for (std::size_t q = 0; q < rows.size(); ++q) {
        c.consensus(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(q)) = rows[r][q];
      }
    }
  }
  return c;
}

}  // namespace detail

inline ExperimentConfig experiment_from_json(const Json& j, const std::string& base_dir = ".") {
  ExperimentConfig c;
  c.source = j;
  c.base_dir = base_dir;
  c.name = j.value("name", std::string("experiment"));
  if (!j.contains("env")) throw ConfigError("experiment config needs an 'env' object");
  c.env = j.at("env");
  if (j.contains("reward_mode")) c.reward_mode = envs::reward_mode_from_string(j.at("reward_mode"));
  if (c.env_kind() == "predator_prey") c.env["reward_mode"] = envs::to_string(c.reward_mode);
  c.train_steps = j.value("train_steps", std::size_t{0});
  if (j.contains("eval")) {
    c.eval.every = j.at("eval").value("every", c.eval.every);
    c.eval.episodes = j.at("eval").value("episodes", c.eval.episodes);
  }
  if (j.contains("probe")) {
    c.probe.size = j.at("probe").value("size", c.probe.size);
    c.probe.seed = j.at("probe").value("seed", c.probe.seed);
  }
  c.score_tail = j.value("score_tail", c.score_tail);
  if (j.contains("seeds")) c.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
  const double gamma = c.env.value("gamma", 0.95);
  c.learner = detail::parse_learner(j.value("learner", Json::object()), c.train_steps, gamma);
  c.learner.shared_reward = c.reward_mode == envs::RewardMode::shared;
  Json adv = j.value("adversary", Json::object());
  if (!adv.contains("kind")) adv["kind"] = "ddpg";
  if (!adv.contains("K")) adv["K"] = 1;
  // The prey shares the main learner's optimizer settings unless told otherwise.
  for (const char* key : {"batch_size", "warmup", "update_period", "buffer_capacity", "tau", "hidden",
                          "critic_lr", "actor_lr", "noise", "grad_clip", "terminal_masking"}) {
    if (!adv.contains(key) && j.value("learner", Json::object()).contains(key)) adv[key] = j["learner"][key];
  }
  c.adversary = detail::parse_learner(adv, c.train_steps, gamma);
  if (c.adversary.kind != algos::LearnerKind::ddpg) throw ConfigError("the prey learns with DDPG");
  c.validate();
  return c;
}

/// Environment for evaluation: held-out data when the config has it.
inline std::unique_ptr<envs::MultiAgentEnv> make_eval_env(const Json& env, const std::string& base_dir) {
  return envs::make_env(env, env.contains("test_data") ? "test_data" : "train_data", base_dir);
}

/// Microgrid config stretched to one episode over the whole held-out series.
inline Json full_series_env(const Json& env, std::size_t length) {
  Json j = env;
  j["horizon"] = length;
  j["start_day"] = 0;
  return j;
}

inline ExperimentConfig load_experiment(const std::string& path) {
  const Json j = envs::load_json(path);
  const auto dir = std::filesystem::absolute(std::filesystem::path(path)).parent_path();
  return experiment_from_json(j, dir.string());
}

}  // namespace gcpn::harness
