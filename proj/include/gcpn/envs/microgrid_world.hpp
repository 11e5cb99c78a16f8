#pragma once

#include <algorithm>
#include <cmath>
#include <deque>
#include <numbers>
#include <vector>

#include "gcpn/data/time_series.hpp"
#include "gcpn/envs/pomg.hpp"

namespace gcpn::envs {

struct EssParams {
  double capacity = 4.0;
  double charge_limit = 1.0;     // max energy into the ESS per step
  double discharge_limit = 1.0;  // max energy out of the ESS per step
  double eta_charge = 0.95;
  double eta_discharge = 0.95;

  void validate() const {
    if (!(capacity > 0 && charge_limit > 0 && discharge_limit > 0)) {
      throw ConfigError("ESS: capacity and power limits must be positive");
    }
    if (!(eta_charge > 0 && eta_charge <= 1 && eta_discharge > 0 && eta_discharge <= 1)) {
      throw ConfigError("ESS: efficiencies must lie in (0,1]");
    }
  }
};

/// Energy flows touching one ESS during a step (all nonnegative).
struct Flow {
  double grid_to_ess = 0.0;
  double wind_to_ess = 0.0;
  double ess_to_load = 0.0;
  bool operator==(const Flow&) const = default;
};

/// Result of pushing a requested flow through one microgrid for one step.
struct FlowOutcome {
  Flow applied;
  double wind_to_load = 0.0;
  double grid_to_load = 0.0;
  double purchase = 0.0;  // C_t^i = grid_to_load + grid_to_ess
  double soc_next = 0.0;
  bool projected = false;
  bool soc_clamped = false;
};

/// Projects a requested flow onto the feasible set for this step and applies it.
/// Surplus wind serves the load first; discharge never exceeds the residual
/// demand, so the load is covered exactly by wind, ESS and grid.
inline FlowOutcome apply_flow(const EssParams& ess, double soc, double load, double wind,
                              Flow req) {
  FlowOutcome out;
  Flow f = req;
  auto cap = [&](double& v, double hi) {
    if (v > hi) {
      v = hi;
      out.projected = true;
    }
  };
  for (double* v : {&f.grid_to_ess, &f.wind_to_ess, &f.ess_to_load}) {
    if (!(*v >= 0.0)) {
      *v = 0.0;
      out.projected = true;
    }
  }
  cap(f.wind_to_ess, wind);
  auto residual = [&] { return load - std::min(load, std::max(0.0, wind - f.wind_to_ess)); };
  cap(f.ess_to_load, std::min({ess.discharge_limit, ess.eta_discharge * soc, residual()}));

  // Charge limits: shave grid charge first, then wind charge. Cutting wind
  // charge can only lower the discharge below, so headroom assumes the
  // lowest discharge still possible.
  const double d_lo = std::min(f.ess_to_load, load - std::min(load, wind));
  const double headroom = std::max(0.0, (ess.capacity - (soc - d_lo / ess.eta_discharge)) / ess.eta_charge);
  const double charge_cap = std::min(ess.charge_limit, headroom);
  if (f.grid_to_ess + f.wind_to_ess > charge_cap) {
    out.projected = true;
    const double over = f.grid_to_ess + f.wind_to_ess - charge_cap;
    const double cut_grid = std::min(f.grid_to_ess, over);
    f.grid_to_ess -= cut_grid;
    f.wind_to_ess = std::max(0.0, f.wind_to_ess - (over - cut_grid));
  }
  // Less wind into storage can only shrink the residual demand.
  cap(f.ess_to_load, residual());

  out.applied = f;
  out.wind_to_load = std::min(load, std::max(0.0, wind - f.wind_to_ess));
  const double d = load - out.wind_to_load;
  out.grid_to_load = d - f.ess_to_load;
  out.purchase = out.grid_to_load + f.grid_to_ess;
  double next = soc + ess.eta_charge * (f.grid_to_ess + f.wind_to_ess) - f.ess_to_load / ess.eta_discharge;
  if (next < 0.0 || next > ess.capacity) {
    out.soc_clamped = true;
    next = std::clamp(next, 0.0, ess.capacity);
  }
  out.soc_next = next;
  return out;
}

struct FeatureScales {
  double demand = 2.0;
  double wind = 2.0;
  double price = 6.0;  // total system purchase C_t
};

struct MicrogridConfig {
  std::vector<EssParams> ess = std::vector<EssParams>(3);
  std::size_t history = 24;
  int horizon = 24;
  double gamma = 0.95;
  double price_coefficient = 1.0;
  double initial_soc_fraction = 0.5;
  FeatureScales scales;
  int start_day = -1;  // < 0: random day boundary at each reset

  std::size_t n_microgrids() const { return ess.size(); }

  void validate() const {
    if (ess.empty()) throw ConfigError("microgrid: need at least one microgrid");
    for (const auto& e : ess) e.validate();
    if (history < 1) throw ConfigError("microgrid: history must be >= 1");
    if (!(initial_soc_fraction >= 0 && initial_soc_fraction <= 1)) {
      throw ConfigError("microgrid: initial SoC fraction must lie in [0,1]");
    }
  }
};

/// Several microgrids, each with an ESS agent, buying from a shared energy
/// company whose price grows with the total load. Agent i pays
/// price_coefficient * C_t * C_t^i.
class MicrogridWorld : public MultiAgentEnv {
 public:
  MicrogridWorld(MicrogridConfig cfg, std::vector<data::SitePair> sites)
      : cfg_(std::move(cfg)), sites_(std::move(sites)) {
    cfg_.validate();
    if (sites_.size() != cfg_.n_microgrids()) {
      throw ConfigError("microgrid: need one demand/wind pair per microgrid");
    }
    for (const auto& s : sites_) {
      if (s.demand.length() != sites_[0].demand.length() || s.wind.length() != s.demand.length()) {
        throw ConfigError("microgrid: all series must share one length");
      }
    }
    if (static_cast<std::size_t>(cfg_.horizon) > series_length()) {
      throw ConfigError("microgrid: horizon longer than the data");
    }
    const std::size_t n = cfg_.n_microgrids();
    spec_.n_agents = n;
    spec_.obs_dims.assign(n, static_cast<Eigen::Index>(3 * cfg_.history + 3));
    spec_.action_dims.assign(n, 3);
    spec_.action_boxes.assign(n, Box::uniform(3, 0.0, 1.0));
    spec_.horizon = cfg_.horizon;
    spec_.gamma = cfg_.gamma;
    spec_.validate();
    soc_.assign(n, 0.0);
  }

  const PomgSpec& spec() const override { return spec_; }
  const MicrogridConfig& config() const { return cfg_; }
  int steps_taken() const override { return step_; }
  std::size_t series_length() const { return sites_[0].demand.length(); }
  std::size_t cursor() const { return cursor_; }
  const std::vector<double>& soc() const { return soc_; }
  std::vector<double>& soc() { return soc_; }
  const std::vector<data::SitePair>& sites() const { return sites_; }

  std::vector<Vector> reset(Rng& rng) override {
    const std::size_t days = series_length() / data::kHoursPerDay;
    const std::size_t span = (static_cast<std::size_t>(cfg_.horizon) + data::kHoursPerDay - 1) /
                             data::kHoursPerDay;
    if (cfg_.start_day >= 0) {
      cursor_ = static_cast<std::size_t>(cfg_.start_day) * data::kHoursPerDay;
    } else {
      const std::size_t last = days >= span ? days - span : 0;
      std::uniform_int_distribution<std::size_t> pick(0, last);
      cursor_ = pick(rng) * data::kHoursPerDay;
    }
    if (cursor_ + static_cast<std::size_t>(cfg_.horizon) > series_length()) {
      throw ConfigError("microgrid: episode runs past the end of the data");
    }
    for (std::size_t i = 0; i < soc_.size(); ++i) {
      soc_[i] = cfg_.initial_soc_fraction * cfg_.ess[i].capacity;
    }
    demand_hist_.assign(soc_.size(), std::deque<double>(cfg_.history, 0.0));
    wind_hist_.assign(soc_.size(), std::deque<double>(cfg_.history, 0.0));
    price_hist_.assign(cfg_.history, 0.0);
    step_ = 0;
    done_ = false;
    return observe_all();
  }

  /// Maps a box action in [0,1]^3 to requested flows scaled by the power limits.
  Flow action_to_flow(std::size_t i, const Vector& a) const {
    const EssParams& e = cfg_.ess[i];
    return {a(0) * e.charge_limit, a(1) * e.charge_limit, a(2) * e.discharge_limit};
  }

  StepResult step(const std::vector<Vector>& joint_action) override {
    if (done_) throw ContractViolation("MicrogridWorld::step called after terminal without reset");
    StepResult r;
    const auto acts = checked_actions(joint_action, r.info.action_clamped);
    std::vector<Flow> flows;
    for (std::size_t i = 0; i < acts.size(); ++i) flows.push_back(action_to_flow(i, acts[i]));
    microgrid_step(flows, r);
    return r;
  }

  /// Applies energy flows directly (after feasibility projection).
  StepResult step_flows(const std::vector<Flow>& flows) {
    if (done_) throw ContractViolation("MicrogridWorld::step called after terminal without reset");
    if (flows.size() != soc_.size()) throw DimensionError("step_flows: one flow per microgrid");
    StepResult r;
    microgrid_step(flows, r);
    return r;
  }

  /// Last applied outcomes, one per microgrid.
  const std::vector<FlowOutcome>& last_outcomes() const { return last_; }

  Vector observe(std::size_t agent) const {
    if (agent >= soc_.size()) throw std::out_of_range("MicrogridWorld::observe");
    const std::size_t h = cfg_.history;
    Vector o(static_cast<Eigen::Index>(3 * h + 3));
    for (std::size_t k = 0; k < h; ++k) {
      o(static_cast<Eigen::Index>(3 * k)) = demand_hist_[agent][k] / cfg_.scales.demand;
      o(static_cast<Eigen::Index>(3 * k + 1)) = wind_hist_[agent][k] / cfg_.scales.wind;
      o(static_cast<Eigen::Index>(3 * k + 2)) = price_hist_[k] / cfg_.scales.price;
    }
    const double hour = static_cast<double>(cursor_ % data::kHoursPerDay);
    const double angle = 2.0 * std::numbers::pi * hour / 24.0;
    o(static_cast<Eigen::Index>(3 * h)) = soc_[agent] / cfg_.ess[agent].capacity;
    o(static_cast<Eigen::Index>(3 * h + 1)) = std::sin(angle);
    o(static_cast<Eigen::Index>(3 * h + 2)) = std::cos(angle);
    return o;
  }

  std::vector<Vector> observe_all() const {
    std::vector<Vector> out;
    for (std::size_t i = 0; i < soc_.size(); ++i) out.push_back(observe(i));
    return out;
  }

  std::unique_ptr<MultiAgentEnv> clone() const override {
    return std::make_unique<MicrogridWorld>(*this);
  }

 private:
  void microgrid_step(const std::vector<Flow>& flows, StepResult& r) {
    const std::size_t n = soc_.size();
    last_.clear();
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double load = sites_[i].demand[cursor_];
      const double wind = sites_[i].wind[cursor_];
      FlowOutcome o = apply_flow(cfg_.ess[i], soc_[i], load, wind, flows[i]);
      r.info.flows_projected = r.info.flows_projected || o.projected;
      r.info.soc_clamped = r.info.soc_clamped || o.soc_clamped;
      soc_[i] = o.soc_next;
      total += o.purchase;
      last_.push_back(o);
    }
    r.info.total_purchase = total;
    for (std::size_t i = 0; i < n; ++i) {
      const double cost = cfg_.price_coefficient * total * last_[i].purchase;
      r.info.purchases.push_back(last_[i].purchase);
      r.info.costs.push_back(cost);
      r.rewards.push_back(-cost);
      demand_hist_[i].pop_front();
      demand_hist_[i].push_back(sites_[i].demand[cursor_]);
      wind_hist_[i].pop_front();
      wind_hist_[i].push_back(sites_[i].wind[cursor_]);
    }
    price_hist_.pop_front();
    price_hist_.push_back(total);
    ++cursor_;
    ++step_;
    r.terminal = step_ >= cfg_.horizon;
    done_ = r.terminal;
    r.obs = observe_all();
  }

  MicrogridConfig cfg_;
  std::vector<data::SitePair> sites_;
  PomgSpec spec_;
  std::vector<double> soc_;
  std::vector<std::deque<double>> demand_hist_, wind_hist_;
  std::deque<double> price_hist_;
  std::vector<FlowOutcome> last_;
  std::size_t cursor_ = 0;
  int step_ = 0;
  bool done_ = false;
};

}  // namespace gcpn::envs
