#pragma once

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "gcpn/harness/checkpoint.hpp"
#include "gcpn/harness/config.hpp"
#include "gcpn/harness/metrics.hpp"

namespace gcpn::harness {

/// One evaluation window of a run.
struct WindowMetrics {
  std::size_t step = 0;
  std::size_t episodes = 0;  // training episodes finished so far
  std::size_t updates = 0;   // main-team update rounds so far
  EvalResult eval;
  double critic_spread = kNaN;
};

inline std::string fmt(double v) {
  if (std::isnan(v)) return "nan";
  std::ostringstream os;
  os << std::setprecision(10) << v;
  return os.str();
}

/// Append-only tab-separated metric stream. Columns:
/// step episodes updates score catch_rate critic_spread cost par return_0..return_{n-1}
class MetricsWriter {
 public:
  MetricsWriter(const fs::path& path, std::size_t n_agents) : os_(path, std::ios::binary) {
    if (!os_) throw std::runtime_error("cannot write " + path.string());
    os_ << "step\tepisodes\tupdates\tscore\tcatch_rate\tcritic_spread\tcost\tpar";
    for (std::size_t i = 0; i < n_agents; ++i) os_ << "\treturn_" << i;
    os_ << '\n';
    os_.flush();
  }

  void write(const WindowMetrics& w) {
    os_ << w.step << '\t' << w.episodes << '\t' << w.updates << '\t' << fmt(w.eval.score) << '\t'
        << fmt(w.eval.catch_rate) << '\t' << fmt(w.critic_spread) << '\t' << fmt(w.eval.cost) << '\t'
        << fmt(w.eval.par);
    for (double r : w.eval.mean_return) os_ << '\t' << fmt(r);
    os_ << '\n';
    os_.flush();
  }

 private:
  std::ofstream os_;
};

inline Json num(double v) { return std::isnan(v) ? Json(nullptr) : Json(v); }
inline double num(const Json& j) { return j.is_null() ? kNaN : j.get<double>(); }

/// Mean of the last `fraction` of the values (at least one); NaN entries skipped.
inline double tail_mean(const std::vector<double>& v, double fraction) {
  if (v.empty()) return kNaN;
  const auto n = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(v.size()))));
  double s = 0.0;
  std::size_t c = 0;
  for (std::size_t i = v.size() - std::min(n, v.size()); i < v.size(); ++i) {
    if (!std::isnan(v[i])) {
      s += v[i];
      ++c;
    }
  }
  return c ? s / static_cast<double>(c) : kNaN;
}

struct RunSummary {
  std::string name, env_kind, learner, reward_mode;
  std::uint64_t seed = 0;
  std::size_t train_steps = 0, windows = 0;
  double score = kNaN, catch_rate = kNaN, critic_spread = kNaN;
  double cost = kNaN, par = kNaN;  // microgrid: one episode over the whole held-out series
  double final_distance = kNaN;    // reach task, last window

  Json to_json() const {
    return {{"name", name},         {"env", env_kind},           {"learner", learner},
            {"reward_mode", reward_mode}, {"seed", seed},        {"train_steps", train_steps},
            {"windows", windows},   {"score", num(score)},       {"catch_rate", num(catch_rate)},
            {"critic_spread", num(critic_spread)}, {"cost", num(cost)}, {"par", num(par)},
            {"final_distance", num(final_distance)}};
  }

  static RunSummary from_json(const Json& j) {
    RunSummary s;
    s.name = j.at("name");
    s.env_kind = j.at("env");
    s.learner = j.at("learner");
    s.reward_mode = j.at("reward_mode");
    s.seed = j.at("seed");
    s.train_steps = j.at("train_steps");
    s.windows = j.at("windows");
    s.score = num(j.at("score"));
    s.catch_rate = num(j.at("catch_rate"));
    s.critic_spread = num(j.at("critic_spread"));
    s.cost = num(j.at("cost"));
    s.par = num(j.at("par"));
    s.final_distance = num(j.value("final_distance", Json(nullptr)));
    return s;
  }
};

/// Agent indices of each team: predators then prey for predator-prey, one
/// team otherwise.
inline std::vector<std::vector<std::size_t>> team_members(const ExperimentConfig& cfg,
                                                          const envs::MultiAgentEnv& env) {
  const std::size_t n = env.spec().n_agents;
  std::vector<std::size_t> all(n);
  std::iota(all.begin(), all.end(), std::size_t{0});
  if (!cfg.has_adversary()) return {all};
  std::vector<std::size_t> predators(all.begin(), all.end() - 1);
  return {predators, {n - 1}};
}

inline std::vector<algos::Team> build_teams(const ExperimentConfig& cfg, const envs::MultiAgentEnv& env,
                                            std::uint64_t seed) {
  const auto& sp = env.spec();
  std::vector<algos::Team> teams;
  const auto groups = team_members(cfg, env);
  for (std::size_t t = 0; t < groups.size(); ++t) {
    const auto& m = groups[t];
    teams.push_back({m, algos::TeamLearner(t == 0 ? cfg.learner : cfg.adversary, algos::pick(sp.obs_dims, m),
                                           algos::pick(sp.action_dims, m), algos::pick(sp.action_boxes, m),
                                           algos::derive_seed(seed, 10 + t))});
  }
  return teams;
}

/// Team-0 critic spread; NaN when undefined (one agent or one shared critic).
inline double team_spread(const algos::PolicySet& ps, const replay::Batch& probe) {
  if (ps.n_agents() < 2 || ps.global_critic()) return kNaN;
  return critic_spread(ps, probe);
}

struct TrainOptions {
  std::ostream* log = nullptr;  // progress lines, one per window
};

/// Full-series microgrid evaluation of a policy; {cost, PAR}.
inline std::pair<double, double> full_series_eval(JointPolicy& policy, const Json& env, const std::string& base_dir,
                                                  std::uint64_t seed) {
  const auto probe = make_eval_env(env, base_dir);
  const auto* mg = dynamic_cast<const envs::MicrogridWorld*>(probe.get());
  if (!mg) return {kNaN, kNaN};
  const std::size_t days = mg->series_length() / data::kHoursPerDay;
  const auto full = make_eval_env(full_series_env(env, days * data::kHoursPerDay), base_dir);
  Rng rng(seed);
  const EvalResult r = evaluate(policy, *full, 1, rng, {});
  return {r.cost, r.par};
}

/// Seeded training run writing config.json, metrics.tsv, timing.tsv,
/// checkpoint/ and summary.json under `out`.
inline RunSummary train(const ExperimentConfig& cfg, std::uint64_t seed, const fs::path& out,
                        const TrainOptions& opt = {}) {
  cfg.validate();
  auto env = envs::make_env(cfg.env, "train_data", cfg.base_dir);
  const auto eval_env = make_eval_env(cfg.env, cfg.base_dir);
  auto teams = build_teams(cfg, *env, seed);
  const std::vector<std::size_t> scored = teams[0].members;
  const std::size_t n = env->spec().n_agents;

  fs::create_directories(out);
  Json echo = cfg.source;
  echo["seed"] = seed;
  echo["base_dir"] = cfg.base_dir;
  write_text(out / "config.json", echo.dump(2) + "\n");

  const replay::Batch probe = make_probe(*env, teams[0].members, cfg.probe.size, cfg.probe.seed);
  algos::RunState rs = algos::make_run_state(std::move(env), std::move(teams), seed);
  Rng eval_rng(algos::derive_seed(seed, 2000));
  MetricsWriter metrics(out / "metrics.tsv", n);
  std::ofstream timing(out / "timing.tsv", std::ios::binary);
  timing << "step\tseconds\n";
  const auto t0 = std::chrono::steady_clock::now();

  std::vector<double> scores, catches, spreads;
  double last_distance = kNaN;
  while (rs.step < cfg.train_steps) {
    algos::training_iteration(rs);
    if (rs.step % cfg.eval.every != 0) continue;
    WindowMetrics w;
    w.step = rs.step;
    w.episodes = rs.episodes;
    w.updates = rs.teams[0].learner.updates_done();
    ExecPolicy policy = exec_policy(rs.teams);
    w.eval = evaluate(policy, *eval_env, cfg.eval.episodes, eval_rng, scored);
    w.critic_spread = team_spread(rs.teams[0].learner.policies(), probe);
    metrics.write(w);
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    timing << w.step << '\t' << fmt(secs) << '\n';
    timing.flush();
    scores.push_back(w.eval.score);
    catches.push_back(w.eval.catch_rate);
    spreads.push_back(w.critic_spread);
    last_distance = w.eval.final_distance;
    if (opt.log) {
      *opt.log << cfg.name << " seed " << seed << " step " << w.step << " score " << fmt(w.eval.score)
               << " catch " << fmt(w.eval.catch_rate) << " spread " << fmt(w.critic_spread) << " cost "
               << fmt(w.eval.cost) << " (" << fmt(secs) << " s)\n";
      opt.log->flush();
    }
    if (!algos::all_finite(rs.teams[0].learner.policies())) throw NumericError("training diverged: non-finite parameters");
  }

  CheckpointInfo info{cfg.env, cfg.base_dir, scored, algos::derive_seed(seed, 3000), rs.step};
  save_checkpoint(out / "checkpoint", rs.teams, info);

  RunSummary s;
  s.name = cfg.name;
  s.env_kind = cfg.env_kind();
  s.learner = algos::to_string(cfg.learner.kind);
  s.reward_mode = envs::to_string(cfg.reward_mode);
  s.seed = seed;
  s.train_steps = cfg.train_steps;
  s.windows = scores.size();
  s.score = tail_mean(scores, cfg.score_tail);
  s.catch_rate = tail_mean(catches, cfg.score_tail);
  s.critic_spread = tail_mean(spreads, cfg.score_tail);
  s.final_distance = last_distance;
  if (cfg.env_kind() == "microgrid") {
    ExecPolicy policy = exec_policy(rs.teams);
    std::tie(s.cost, s.par) = full_series_eval(policy, cfg.env, cfg.base_dir, algos::derive_seed(seed, 4000));
  }
  write_text(out / "summary.json", s.to_json().dump(2) + "\n");
  return s;
}

inline RunSummary read_summary(const fs::path& run_dir) {
  return RunSummary::from_json(envs::load_json((run_dir / "summary.json").string()));
}

}  // namespace gcpn::harness
