#pragma once

#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <memory>
#include <string>

#include "gcpn/envs/microgrid_world.hpp"
#include "gcpn/envs/particle_world.hpp"

namespace gcpn::envs {

using Json = nlohmann::json;

// Environment config files are JSON objects with a "kind" of
// "predator_prey", "reach_origin" or "microgrid". Missing keys keep defaults.

namespace detail {

template <class T>
void maybe(const Json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

inline void read_physics(const Json& j, ParticlePhysics& ph) {
  maybe(j, "damping", ph.damping);
  maybe(j, "dt", ph.dt);
  maybe(j, "arena", ph.arena);
}

inline EssParams read_ess(const Json& j, EssParams e = {}) {
  maybe(j, "capacity", e.capacity);
  maybe(j, "charge_limit", e.charge_limit);
  maybe(j, "discharge_limit", e.discharge_limit);
  maybe(j, "eta_charge", e.eta_charge);
  maybe(j, "eta_discharge", e.eta_discharge);
  return e;
}

inline data::SynthParams read_synth(const Json& j, data::SynthParams p = {}) {
  maybe(j, "demand_base", p.demand_base);
  maybe(j, "demand_amplitude", p.demand_amplitude);
  maybe(j, "demand_noise", p.demand_noise);
  maybe(j, "wind_mean", p.wind_mean);
  maybe(j, "wind_phi", p.wind_phi);
  maybe(j, "wind_sigma", p.wind_sigma);
  return p;
}

}  // namespace detail

inline ParticleConfig particle_config_from_json(const Json& j) {
  ParticleConfig c;
  using detail::maybe;
  maybe(j, "n_predators", c.n_predators);
  maybe(j, "n_landmarks", c.n_landmarks);
  maybe(j, "prey_present", c.prey_present);
  detail::read_physics(j, c.physics);
  maybe(j, "predator_accel", c.predator_accel);
  maybe(j, "prey_accel", c.prey_accel);
  maybe(j, "predator_max_speed", c.predator_max_speed);
  maybe(j, "prey_max_speed", c.prey_max_speed);
  maybe(j, "predator_radius", c.predator_radius);
  maybe(j, "prey_radius", c.prey_radius);
  maybe(j, "landmark_radius", c.landmark_radius);
  maybe(j, "catch_reward", c.catch_reward);
  maybe(j, "boundary_margin", c.boundary_margin);
  maybe(j, "boundary_penalty", c.boundary_penalty);
  if (j.contains("reward_mode")) c.reward_mode = reward_mode_from_string(j.at("reward_mode"));
  maybe(j, "horizon", c.horizon);
  maybe(j, "gamma", c.gamma);
  c.validate();
  return c;
}

inline ReachConfig reach_config_from_json(const Json& j) {
  ReachConfig c;
  using detail::maybe;
  detail::read_physics(j, c.physics);
  maybe(j, "accel", c.accel);
  maybe(j, "max_speed", c.max_speed);
  maybe(j, "horizon", c.horizon);
  maybe(j, "gamma", c.gamma);
  return c;
}

inline MicrogridConfig microgrid_config_from_json(const Json& j) {
  MicrogridConfig c;
  using detail::maybe;
  std::size_t n = 3;
  maybe(j, "n_microgrids", n);
  c.ess.assign(n, EssParams{});
  if (j.contains("ess")) {
    const Json& e = j.at("ess");
    if (e.is_array()) {
      if (e.size() != n) throw ConfigError("microgrid: 'ess' list must have n_microgrids entries");
      for (std::size_t i = 0; i < n; ++i) c.ess[i] = detail::read_ess(e[i]);
    } else {
      c.ess.assign(n, detail::read_ess(e));
    }
  }
  maybe(j, "history", c.history);
  maybe(j, "horizon", c.horizon);
  maybe(j, "gamma", c.gamma);
  maybe(j, "price_coefficient", c.price_coefficient);
  maybe(j, "initial_soc_fraction", c.initial_soc_fraction);
  maybe(j, "start_day", c.start_day);
  if (j.contains("scales")) {
    maybe(j.at("scales"), "demand", c.scales.demand);
    maybe(j.at("scales"), "wind", c.scales.wind);
    maybe(j.at("scales"), "price", c.scales.price);
  }
  c.validate();
  return c;
}

/// Site data block: {"dir": path} or {"synthetic": {"seed", "days", "sites": [...]}}.
/// Relative directories resolve against `base_dir`.
inline std::vector<data::SitePair> sites_from_json(const Json& j, std::size_t n,
                                                   const std::string& base_dir = ".") {
  if (j.contains("dir")) {
    std::filesystem::path p = j.at("dir").get<std::string>();
    if (p.is_relative()) p = std::filesystem::path(base_dir) / p;
    return data::load_sites(p.string(), n);
  }
  if (!j.contains("synthetic")) throw ConfigError("microgrid data needs 'dir' or 'synthetic'");
  const Json& s = j.at("synthetic");
  const std::uint64_t seed = s.value("seed", 1ULL);
  const std::size_t days = s.value("days", std::size_t{365});
  std::vector<data::SynthParams> params(n);
  if (s.contains("sites")) {
    const Json& list = s.at("sites");
    if (list.size() != n) throw ConfigError("synthetic 'sites' must have n_microgrids entries");
    for (std::size_t i = 0; i < n; ++i) params[i] = detail::read_synth(list[i]);
  }
  return data::synth_sites(seed, days, params);
}

/// Builds an environment. `data_key` picks which data block a microgrid uses
/// ("train_data" while learning, "test_data" for held-out evaluation).
inline std::unique_ptr<MultiAgentEnv> make_env(const Json& j, const std::string& data_key = "train_data",
                                               const std::string& base_dir = ".") {
  const std::string kind = j.at("kind");
  if (kind == "predator_prey") return std::make_unique<ParticleWorld>(particle_config_from_json(j));
  if (kind == "reach_origin") return std::make_unique<ReachOriginWorld>(reach_config_from_json(j));
  if (kind == "microgrid") {
    MicrogridConfig c = microgrid_config_from_json(j);
    if (!j.contains(data_key)) throw ConfigError("microgrid config lacks '" + data_key + "'");
    return std::make_unique<MicrogridWorld>(c, sites_from_json(j.at(data_key), c.n_microgrids(), base_dir));
  }
  throw ConfigError("unknown environment kind '" + kind + "'");
}

inline Json load_json(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open config " + path);
  try {
    return Json::parse(is, nullptr, true, true);
  } catch (const Json::parse_error& e) {
    throw ParseError(path, e.what());
  }
}

}  // namespace gcpn::envs
