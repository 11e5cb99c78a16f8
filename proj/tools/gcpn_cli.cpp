#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>

#include "gcpn/harness.hpp"

namespace fs = std::filesystem;
using namespace gcpn;
using namespace gcpn::harness;

namespace {

int run_train(const std::string& config, std::uint64_t seed, const std::string& out, bool quiet) {
  const ExperimentConfig cfg = load_experiment(config);
  TrainOptions opt;
  if (!quiet) opt.log = &std::cerr;
  const RunSummary s = train(cfg, seed, out, opt);
  std::cout << s.to_json().dump(2) << '\n';
  return 0;
}

int run_eval(const std::string& checkpoint, std::size_t episodes, std::optional<std::uint64_t> seed) {
  LoadedPolicy lp = load_exec_policy(checkpoint);
  const auto env = make_eval_env(lp.info.env, lp.info.base_dir);
  Rng rng(seed ? *seed : lp.info.eval_seed);
  const EvalResult r = evaluate(lp.policy, *env, episodes, rng, lp.info.scored);
  Json j = {{"episodes", r.episodes},          {"step", lp.info.step},
            {"score", num(r.score)},           {"catch_rate", num(r.catch_rate)},
            {"cost", num(r.cost)},             {"par", num(r.par)},
            {"mean_return", r.mean_return}};
  if (lp.info.env.at("kind") == "microgrid") {
    const auto [cost, par] = full_series_eval(lp.policy, lp.info.env, lp.info.base_dir, lp.info.eval_seed);
    j["full_series"] = {{"cost", num(cost)}, {"par", num(par)}};
  }
  std::cout << j.dump(2) << '\n';
  return 0;
}

int run_oracle(const std::string& data_dir, std::size_t horizon, std::size_t start, const std::string& config,
               std::size_t microgrids, const std::string& out, std::size_t iterations) {
  Json env = {{"kind", "microgrid"}, {"n_microgrids", microgrids}};
  if (!config.empty()) {
    const Json j = envs::load_json(config);
    env = j.contains("env") ? j.at("env") : j;
  }
  const std::size_t n = envs::microgrid_config_from_json(env).n_microgrids();
  const auto sites = data::load_sites(data_dir, n);
  const qp::ScheduleProblem p = oracle_problem(env, sites, start, horizon);
  qp::SolverOptions opt;
  opt.iterations = iterations;
  const qp::Schedule s = qp::solve_centralized(p, opt);
  const qp::Schedule zero = qp::zero_flow_schedule(p);
  if (!out.empty()) {
    fs::path path(out);
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot write " + out);
    qp::write_schedule(os, s);
  }
  const Json j = {{"horizon", horizon},
                  {"cost", s.cost},
                  {"zero_flow_cost", zero.cost},
                  {"par", num(compute_par(s.total).value_or(kNaN))},
                  {"zero_flow_par", num(compute_par(zero.total).value_or(kNaN))},
                  {"converged", s.converged},
                  {"iterations", s.iterations}};
  if (!s.converged) std::cerr << "warning: oracle stopped at the iteration budget; reporting the best feasible schedule\n";
  std::cout << j.dump(2) << '\n';
  return 0;
}

int run_synth(std::uint64_t seed, std::size_t days, std::size_t microgrids, const std::string& out) {
  data::save_sites(out, data::synth_sites(seed, days, std::vector<data::SynthParams>(microgrids)));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-agent actor-critic experiments: train, evaluate, schedule, report"};
  app.require_subcommand(1);

  std::string config, out, checkpoint, data_dir, oracle_config, oracle_out;
  std::uint64_t seed = 1;
  std::size_t episodes = 50, horizon = 24, start = 0, microgrids = 3, iterations = 10000, days = 365;
  std::optional<std::uint64_t> eval_seed;
  std::vector<std::string> runs;
  bool quiet = false;

  auto* train_cmd = app.add_subcommand("train", "Run one seeded training run");
  train_cmd->add_option("--config", config, "Experiment config (JSON)")->required()->check(CLI::ExistingFile);
  train_cmd->add_option("--seed", seed, "Run seed");
  train_cmd->add_option("--out", out, "Run directory")->required();
  train_cmd->add_flag("--quiet", quiet, "No progress lines on stderr");

  auto* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint with its greedy actors only");
  eval_cmd->add_option("--checkpoint", checkpoint, "Checkpoint directory")->required()->check(CLI::ExistingDirectory);
  eval_cmd->add_option("--episodes", episodes, "Noise-free episodes")->check(CLI::PositiveNumber);
  eval_cmd->add_option("--seed", eval_seed, "Evaluation seed (default: the checkpoint's)");

  auto* oracle_cmd = app.add_subcommand("oracle", "Centralized full-knowledge microgrid schedule");
  oracle_cmd->add_option("--data", data_dir, "Site data directory")->required()->check(CLI::ExistingDirectory);
  oracle_cmd->add_option("--horizon", horizon, "Steps to schedule")->required()->check(CLI::PositiveNumber);
  oracle_cmd->add_option("--start", start, "First step of the data to use");
  oracle_cmd->add_option("--config", oracle_config, "Experiment or microgrid env config for ESS parameters");
  oracle_cmd->add_option("--microgrids", microgrids, "Microgrid count when no config is given");
  oracle_cmd->add_option("--iterations", iterations, "Solver iteration budget");
  oracle_cmd->add_option("--out", oracle_out, "Write the schedule table here");

  auto* report_cmd = app.add_subcommand("report", "Summarize run directories into tables and plots");
  report_cmd->add_option("--runs", runs, "Run directories")->required();
  report_cmd->add_option("--out", out, "Report directory")->required();

  auto* synth_cmd = app.add_subcommand("synth", "Write a synthetic demand/wind data directory");
  synth_cmd->add_option("--seed", seed, "Generator seed");
  synth_cmd->add_option("--days", days, "Days of hourly data");
  synth_cmd->add_option("--microgrids", microgrids, "Number of sites");
  synth_cmd->add_option("--out", out, "Output directory")->required();

  CLI11_PARSE(app, argc, argv);
  try {
    if (*train_cmd) return run_train(config, seed, out, quiet);
    if (*eval_cmd) return run_eval(checkpoint, episodes, eval_seed);
    if (*oracle_cmd) return run_oracle(data_dir, horizon, start, oracle_config, microgrids, oracle_out, iterations);
    if (*report_cmd) {
      std::vector<fs::path> dirs(runs.begin(), runs.end());
      const Report rep = emit_report(dirs, out);
      std::cout << summary_tsv(rep);
      for (const auto& g : rep.gaps) std::cerr << "missing: " << g << '\n';
      return 0;
    }
    if (*synth_cmd) return run_synth(seed, days, microgrids, out);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
