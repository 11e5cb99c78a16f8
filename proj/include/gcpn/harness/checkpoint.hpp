#pragma once

#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "gcpn/harness/config.hpp"
#include "gcpn/harness/metrics.hpp"

namespace gcpn::harness {

namespace fs = std::filesystem;

inline Json spec_to_json(const ndgrad::MlpSpec& s) {
  Json h = Json::array();
  for (const auto& l : s.hidden) h.push_back({{"width", l.width}, {"activation", ndgrad::to_string(l.activation)}});
  return {{"input_dim", s.input_dim},
          {"hidden", h},
          {"output_dim", s.output_dim},
          {"output_activation", ndgrad::to_string(s.output_activation)}};
}

inline ndgrad::MlpSpec spec_from_json(const Json& j) {
  ndgrad::MlpSpec s;
  s.input_dim = j.at("input_dim").get<Eigen::Index>();
  s.output_dim = j.at("output_dim").get<Eigen::Index>();
  s.output_activation = ndgrad::activation_from_string(j.at("output_activation").get<std::string>());
  for (const auto& h : j.at("hidden")) {
    s.hidden.push_back({h.at("width").get<Eigen::Index>(),
                        ndgrad::activation_from_string(h.at("activation").get<std::string>())});
  }
  s.validate();
  return s;
}

inline void write_text(const fs::path& p, const std::string& text) {
  fs::create_directories(p.parent_path());
  std::ofstream os(p, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write " + p.string());
  os << text;
}

/// Everything evaluation needs besides the actors themselves.
struct CheckpointInfo {
  Json env;
  std::string base_dir;
  std::vector<std::size_t> scored;
  std::uint64_t eval_seed = 0;
  std::size_t step = 0;
};

/// Layout: manifest.json, then team<t>/<net name>.{online,target}.params for
/// every network. Only actor files are needed to evaluate.
inline void save_checkpoint(const fs::path& dir, const std::vector<algos::Team>& teams, const CheckpointInfo& info) {
  fs::create_directories(dir);
  Json m;
  m["format"] = "gcpn-checkpoint";
  m["version"] = 1;
  m["step"] = info.step;
  m["env"] = info.env;
  m["base_dir"] = info.base_dir;
  m["scored"] = info.scored;
  m["eval_seed"] = info.eval_seed;
  m["teams"] = Json::array();
  for (std::size_t t = 0; t < teams.size(); ++t) {
    auto& ps = const_cast<algos::PolicySet&>(teams[t].learner.policies());
    const std::string tdir = "team" + std::to_string(t) + "/";
    Json jt;
    jt["members"] = teams[t].members;
    jt["kind"] = algos::to_string(ps.kind);
    jt["K"] = ps.n_sub;
    jt["nets"] = Json::array();
    ps.for_each_net([&](const std::string& name, const algos::Net& net) {
      const std::string base = tdir + name;
      fs::create_directories((dir / base).parent_path());
      ndgrad::save_params((dir / (base + ".online.params")).string(), net.online);
      ndgrad::save_params((dir / (base + ".target.params")).string(), net.target);
      jt["nets"].push_back({{"name", name}, {"spec", spec_to_json(net.spec)}, {"file", base}});
    });
    Json actors = Json::array();
    for (std::size_t i = 0; i < ps.agents.size(); ++i) {
      Json per_k = Json::array();
      for (std::size_t k = 0; k < ps.agents[i].actors.size(); ++k) {
        per_k.push_back(tdir + "agent_" + std::to_string(i) + "/actor_k" + std::to_string(k));
      }
      actors.push_back(per_k);
    }
    jt["actors"] = actors;
    m["teams"].push_back(jt);
  }
  write_text(dir / "manifest.json", m.dump(2) + "\n");
}

struct LoadedPolicy {
  CheckpointInfo info;
  ExecPolicy policy;
};

/// Reads the manifest and the actor files, nothing else.
inline LoadedPolicy load_exec_policy(const fs::path& dir) {
  const Json m = envs::load_json((dir / "manifest.json").string());
  if (m.value("format", std::string()) != "gcpn-checkpoint" || m.value("version", 0) != 1) {
    throw ParseError((dir / "manifest.json").string(), "not a version-1 checkpoint manifest");
  }
  CheckpointInfo info;
  info.env = m.at("env");
  info.base_dir = m.at("base_dir").get<std::string>();
  info.scored = m.at("scored").get<std::vector<std::size_t>>();
  info.eval_seed = m.at("eval_seed").get<std::uint64_t>();
  info.step = m.at("step").get<std::size_t>();
  const auto proto = make_eval_env(info.env, info.base_dir);
  const auto& sp = proto->spec();
  std::vector<ExecTeam> teams;
  for (const Json& jt : m.at("teams")) {
    ExecTeam e;
    e.members = jt.at("members").get<std::vector<std::size_t>>();
    e.n_sub = jt.at("K").get<std::size_t>();
    std::map<std::string, ndgrad::MlpSpec> specs;
    for (const Json& n : jt.at("nets")) specs[n.at("file").get<std::string>()] = spec_from_json(n.at("spec"));
    for (std::size_t a = 0; a < e.members.size(); ++a) {
      e.maps.push_back(algos::ActionMap::from_box(sp.action_boxes.at(e.members[a])));
      e.specs.emplace_back();
      e.params.emplace_back();
      for (const Json& f : jt.at("actors").at(a)) {
        const std::string file = f.get<std::string>();
        ndgrad::ParamVector p = ndgrad::load_params((dir / (file + ".online.params")).string());
        const auto& spec = specs.at(file);
        if (!ndgrad::layout_matches(spec, p)) throw ParseError(file, "actor parameters do not match spec");
        e.specs.back().push_back(spec);
        e.params.back().push_back(std::move(p));
      }
      if (e.specs.back().size() != e.n_sub) throw ParseError(dir.string(), "actor count differs from K");
    }
    teams.push_back(std::move(e));
  }
  return {info, ExecPolicy(std::move(teams))};
}

}  // namespace gcpn::harness
