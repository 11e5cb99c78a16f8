#pragma once

#include <string>

#include "gcpn/harness/config.hpp"
#include "gcpn/qp/oracle.hpp"

namespace gcpn::harness {

/// Scheduling instance matching a microgrid environment config over given sites.
inline qp::ScheduleProblem oracle_problem(const Json& env, const std::vector<data::SitePair>& sites,
                                          std::size_t start, std::size_t horizon) {
  const envs::MicrogridConfig cfg = envs::microgrid_config_from_json(env);
  return qp::problem_from_sites(sites, cfg.ess, cfg.initial_soc_fraction, start, horizon, cfg.price_coefficient);
}

/// Instance over the whole evaluation series of a microgrid experiment.
inline qp::ScheduleProblem oracle_problem(const Json& env, const std::string& base_dir) {
  const envs::MicrogridConfig cfg = envs::microgrid_config_from_json(env);
  const std::string key = env.contains("test_data") ? "test_data" : "train_data";
  const auto sites = envs::sites_from_json(env.at(key), cfg.n_microgrids(), base_dir);
  const std::size_t days = sites.at(0).demand.length() / data::kHoursPerDay;
  return oracle_problem(env, sites, 0, days * data::kHoursPerDay);
}

}  // namespace gcpn::harness
