#pragma once

#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>
#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <vector>

#include "gcpn/data/time_series.hpp"
#include "gcpn/envs/microgrid_world.hpp"
#include "gcpn/error.hpp"

namespace gcpn::qp {

using envs::EssParams;
using envs::Flow;

/// Full-horizon scheduling instance with perfect foresight.
struct ScheduleProblem {
  std::vector<EssParams> ess;
  std::vector<std::vector<double>> load;  // [microgrid][t]
  std::vector<std::vector<double>> wind;
  std::vector<double> soc0;
  double price_coefficient = 1.0;

  std::size_t n() const { return ess.size(); }
  std::size_t horizon() const { return load.empty() ? 0 : load[0].size(); }

  void validate() const {
    if (ess.empty()) throw ConfigError("schedule: need at least one microgrid");
    if (load.size() != n() || wind.size() != n() || soc0.size() != n()) {
      throw DimensionError("schedule: one load, wind and initial SoC per microgrid");
    }
    for (std::size_t i = 0; i < n(); ++i) {
      ess[i].validate();
      if (load[i].size() != horizon() || wind[i].size() != horizon()) {
        throw DimensionError("schedule: all series must have length T");
      }
      if (soc0[i] < 0.0 || soc0[i] > ess[i].capacity) throw ConfigError("schedule: initial SoC out of bounds");
      for (std::size_t t = 0; t < horizon(); ++t) {
        if (!(load[i][t] >= 0.0 && wind[i][t] >= 0.0)) throw ConfigError("schedule: series must be >= 0");
      }
    }
    if (horizon() < 1) throw ConfigError("schedule: horizon must be >= 1");
    if (!(price_coefficient > 0.0)) throw ConfigError("schedule: price coefficient must be positive");
  }
};

using Flows = std::vector<std::vector<Flow>>;  // [microgrid][t]

struct Schedule {
  Flows flows;
  std::vector<std::vector<double>> purchase;  // C_t^i
  std::vector<double> total;                  // C_t
  std::vector<std::vector<double>> soc;       // SoC after each step
  double cost = 0.0;                          // sum_t sum_i coef * C_t * C_t^i
  bool converged = true;                      // false: best-so-far after the iteration budget
  std::size_t iterations = 0;
  std::vector<double> accepted;               // objective of each accepted iterate
};

/// Applies flows step by step with the environment's semantics: clipping to
/// each limit, then the forward SoC sweep. Returns the flows actually applied.
inline Flows project_feasible(const ScheduleProblem& p, const Flows& flows) {
  if (flows.size() != p.n()) throw DimensionError("project_feasible: one flow series per microgrid");
  Flows out(p.n());
  for (std::size_t i = 0; i < p.n(); ++i) {
    if (flows[i].size() != p.horizon()) throw DimensionError("project_feasible: flow series must have length T");
    double soc = p.soc0[i];
    for (std::size_t t = 0; t < p.horizon(); ++t) {
      const auto o = envs::apply_flow(p.ess[i], soc, p.load[i][t], p.wind[i][t], flows[i][t]);
      out[i].push_back(o.applied);
      soc = o.soc_next;
    }
  }
  return out;
}

/// Projects, then rolls the flows forward and prices them exactly.
inline Schedule evaluate_schedule(const ScheduleProblem& p, const Flows& flows) {
  Schedule s;
  s.flows = project_feasible(p, flows);
  const std::size_t T = p.horizon();
  s.purchase.assign(p.n(), std::vector<double>(T, 0.0));
  s.soc.assign(p.n(), std::vector<double>(T, 0.0));
  s.total.assign(T, 0.0);
  for (std::size_t i = 0; i < p.n(); ++i) {
    double soc = p.soc0[i];
    for (std::size_t t = 0; t < T; ++t) {
      const auto o = envs::apply_flow(p.ess[i], soc, p.load[i][t], p.wind[i][t], s.flows[i][t]);
      s.purchase[i][t] = o.purchase;
      s.total[t] += o.purchase;
      soc = o.soc_next;
      s.soc[i][t] = soc;
    }
  }
  for (std::size_t t = 0; t < T; ++t) {
    for (std::size_t i = 0; i < p.n(); ++i) s.cost += p.price_coefficient * s.total[t] * s.purchase[i][t];
  }
  return s;
}

inline Schedule zero_flow_schedule(const ScheduleProblem& p) {
  return evaluate_schedule(p, Flows(p.n(), std::vector<Flow>(p.horizon())));
}

struct SolverOptions {
  std::size_t iterations = 10000;
  double rho = 0.1;
  double sigma = 1e-6;
  double alpha = 1.6;  // over-relaxation
  double eps_abs = 1e-7;
  double eps_rel = 1e-7;
  std::size_t check_every = 25;
};

namespace detail {

// Variables per (t, i): g (grid->ESS), w (wind->ESS), d (ESS->load), s (SoC after t).
// Wind charging is limited to the surplus and discharge to the deficit; any
// other split buys the same energy at the same price.
struct QpForm {
  Eigen::SparseMatrix<double> P, A;
  Eigen::VectorXd q, l, u;
  std::vector<bool> equality;
  std::size_t n = 0, T = 0;
  Eigen::Index var(std::size_t t, std::size_t i, int k) const {
    return static_cast<Eigen::Index>(4 * (t * n + i) + static_cast<std::size_t>(k));
  }
};

inline QpForm build(const ScheduleProblem& p) {
  QpForm f;
  f.n = p.n();
  f.T = p.horizon();
  const auto nv = static_cast<Eigen::Index>(4 * f.n * f.T);
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<Eigen::Triplet<double>> pt, at;
  std::vector<double> lo, hi;
  f.q = Eigen::VectorXd::Zero(nv);
  const double c2 = 2.0 * p.price_coefficient;
  auto row = [&](double l, double u, bool eq, std::initializer_list<std::pair<Eigen::Index, double>> terms) {
    const auto r = static_cast<Eigen::Index>(lo.size());
    for (const auto& [c, v] : terms) at.emplace_back(r, c, v);
    lo.push_back(l);
    hi.push_back(u);
    f.equality.push_back(eq);
  };
  for (std::size_t t = 0; t < f.T; ++t) {
    double base = 0.0;  // deficit bought regardless of storage
    for (std::size_t i = 0; i < f.n; ++i) base += std::max(0.0, p.load[i][t] - p.wind[i][t]);
    // f = coef * (base + sum_i (g_i - d_i))^2
    for (std::size_t i = 0; i < f.n; ++i) {
      for (std::size_t j = 0; j < f.n; ++j) {
        pt.emplace_back(f.var(t, i, 0), f.var(t, j, 0), c2);
        pt.emplace_back(f.var(t, i, 0), f.var(t, j, 2), -c2);
        pt.emplace_back(f.var(t, i, 2), f.var(t, j, 0), -c2);
        pt.emplace_back(f.var(t, i, 2), f.var(t, j, 2), c2);
      }
      f.q(f.var(t, i, 0)) = c2 * base;
      f.q(f.var(t, i, 2)) = -c2 * base;
    }
    for (std::size_t i = 0; i < f.n; ++i) {
      const EssParams& e = p.ess[i];
      const double surplus = std::max(0.0, p.wind[i][t] - p.load[i][t]);
      const double deficit = std::max(0.0, p.load[i][t] - p.wind[i][t]);
      const auto g = f.var(t, i, 0), w = f.var(t, i, 1), d = f.var(t, i, 2), s = f.var(t, i, 3);
      row(0.0, e.charge_limit, false, {{g, 1.0}});
      row(0.0, std::min(surplus, e.charge_limit), false, {{w, 1.0}});
      row(0.0, std::min(e.discharge_limit, deficit), false, {{d, 1.0}});
      row(-inf, e.charge_limit, false, {{g, 1.0}, {w, 1.0}});
      row(0.0, e.capacity, false, {{s, 1.0}});
      // s_t - s_{t-1} - eta_c (g + w) + d / eta_d = 0
      if (t == 0) {
        row(p.soc0[i], p.soc0[i], true, {{s, 1.0}, {g, -e.eta_charge}, {w, -e.eta_charge}, {d, 1.0 / e.eta_discharge}});
        row(-inf, e.eta_discharge * p.soc0[i], false, {{d, 1.0}});
      } else {
        const auto sp = f.var(t - 1, i, 3);
        row(0.0, 0.0, true,
            {{s, 1.0}, {sp, -1.0}, {g, -e.eta_charge}, {w, -e.eta_charge}, {d, 1.0 / e.eta_discharge}});
        row(-inf, 0.0, false, {{d, 1.0}, {sp, -e.eta_discharge}});
      }
    }
  }
  f.P.resize(nv, nv);
  f.P.setFromTriplets(pt.begin(), pt.end());
  f.A.resize(static_cast<Eigen::Index>(lo.size()), nv);
  f.A.setFromTriplets(at.begin(), at.end());
  f.l = Eigen::Map<Eigen::VectorXd>(lo.data(), static_cast<Eigen::Index>(lo.size()));
  f.u = Eigen::Map<Eigen::VectorXd>(hi.data(), static_cast<Eigen::Index>(hi.size()));
  return f;
}

inline Flows to_flows(const QpForm& f, const Eigen::VectorXd& x) {
  Flows out(f.n, std::vector<Flow>(f.T));
  for (std::size_t t = 0; t < f.T; ++t) {
    for (std::size_t i = 0; i < f.n; ++i) {
      out[i][t] = {std::max(0.0, x(f.var(t, i, 0))), std::max(0.0, x(f.var(t, i, 1))),
                   std::max(0.0, x(f.var(t, i, 2)))};
    }
  }
  return out;
}

}  // namespace detail

/// Centralized schedule minimizing sum_t sum_i coef * C_t * C_t^i. ADMM on
/// the sparse QP (SoC kept as explicit variables), with every `check_every`
/// iterates projected and priced exactly; the best feasible one is returned.
/// The all-zero schedule is the first accepted iterate.
inline Schedule solve_centralized(const ScheduleProblem& p, const SolverOptions& opt = {}) {
  p.validate();
  const detail::QpForm f = detail::build(p);
  const Eigen::Index nv = f.P.rows(), m = f.A.rows();
  Schedule best = zero_flow_schedule(p);
  best.accepted.push_back(best.cost);
  best.converged = false;

  double rho = opt.rho;
  Eigen::VectorXd rho_vec(m);
  auto set_rho = [&] {
    for (Eigen::Index r = 0; r < m; ++r) rho_vec(r) = f.equality[static_cast<std::size_t>(r)] ? 1e3 * rho : rho;
  };
  set_rho();
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt;
  auto factor = [&] {
    Eigen::SparseMatrix<double> I(nv, nv);
    I.setIdentity();
    const Eigen::SparseMatrix<double> K =
        Eigen::SparseMatrix<double>(f.P + opt.sigma * I + Eigen::SparseMatrix<double>(f.A.transpose() * rho_vec.asDiagonal() * f.A));
    ldlt.compute(K);
    if (ldlt.info() != Eigen::Success) throw NumericError("solve_centralized: factorization failed");
  };
  factor();

  Eigen::VectorXd x = Eigen::VectorXd::Zero(nv), z = Eigen::VectorXd::Zero(m), y = Eigen::VectorXd::Zero(m);
  std::size_t k = 0;
  bool converged = false;
  for (k = 1; k <= opt.iterations; ++k) {
    const Eigen::VectorXd rhs = opt.sigma * x - f.q + f.A.transpose() * (rho_vec.cwiseProduct(z) - y);
    const Eigen::VectorXd xt = ldlt.solve(rhs);
    const Eigen::VectorXd zt = f.A * xt;
    const Eigen::VectorXd x_new = opt.alpha * xt + (1.0 - opt.alpha) * x;
    const Eigen::VectorXd zr = opt.alpha * zt + (1.0 - opt.alpha) * z;
    const Eigen::VectorXd z_new = (zr + y.cwiseQuotient(rho_vec)).cwiseMax(f.l).cwiseMin(f.u);
    y += rho_vec.cwiseProduct(zr - z_new);
    x = x_new;
    z = z_new;
    if (k % opt.check_every != 0 && k != opt.iterations) continue;

    Schedule s = evaluate_schedule(p, detail::to_flows(f, x));
    if (s.cost < best.cost) {
      best.flows = std::move(s.flows);
      best.purchase = std::move(s.purchase);
      best.total = std::move(s.total);
      best.soc = std::move(s.soc);
      best.cost = s.cost;
      best.accepted.push_back(s.cost);
    }
    const Eigen::VectorXd Ax = f.A * x, Px = f.P * x, Aty = f.A.transpose() * y;
    const double r_prim = (Ax - z).lpNorm<Eigen::Infinity>();
    const double r_dual = (Px + f.q + Aty).lpNorm<Eigen::Infinity>();
    const double e_prim = opt.eps_abs + opt.eps_rel * std::max(Ax.lpNorm<Eigen::Infinity>(), z.lpNorm<Eigen::Infinity>());
    const double e_dual = opt.eps_abs + opt.eps_rel * std::max({Px.lpNorm<Eigen::Infinity>(),
                                                                Aty.lpNorm<Eigen::Infinity>(),
                                                                f.q.lpNorm<Eigen::Infinity>()});
    if (r_prim <= e_prim && r_dual <= e_dual) {
      converged = true;
      break;
    }
    // Residual balancing, as in OSQP.
    const double np = r_prim / std::max(e_prim, 1e-300), nd = r_dual / std::max(e_dual, 1e-300);
    const double ratio = std::sqrt(np / std::max(nd, 1e-300));
    if (ratio > 5.0 || ratio < 0.2) {
      rho = std::clamp(rho * ratio, 1e-6, 1e6);
      set_rho();
      factor();
    }
  }
  best.iterations = std::min(k, opt.iterations);
  best.converged = converged;
  return best;
}

/// Instance over `horizon` steps from `start` of the given site series.
inline ScheduleProblem problem_from_sites(const std::vector<data::SitePair>& sites, const std::vector<EssParams>& ess,
                                          double initial_soc_fraction, std::size_t start, std::size_t horizon,
                                          double price_coefficient = 1.0) {
  if (sites.size() != ess.size()) throw ConfigError("schedule: one site per ESS");
  ScheduleProblem p;
  p.ess = ess;
  p.price_coefficient = price_coefficient;
  for (std::size_t i = 0; i < sites.size(); ++i) {
    if (start + horizon > sites[i].demand.length()) throw ConfigError("schedule: horizon runs past the data");
    p.load.emplace_back();
    p.wind.emplace_back();
    for (std::size_t t = start; t < start + horizon; ++t) {
      p.load.back().push_back(sites[i].demand[t]);
      p.wind.back().push_back(sites[i].wind[t]);
    }
    p.soc0.push_back(initial_soc_fraction * ess[i].capacity);
  }
  p.validate();
  return p;
}

/// Tab-separated schedule: one row per (t, microgrid).
inline void write_schedule(std::ostream& os, const Schedule& s) {
  os << "t\tmicrogrid\tgrid_to_ess\twind_to_ess\tess_to_load\tsoc\tpurchase\ttotal_purchase\n";
  os.precision(10);
  for (std::size_t t = 0; t < s.total.size(); ++t) {
    for (std::size_t i = 0; i < s.flows.size(); ++i) {
      const Flow& f = s.flows[i][t];
      os << t << '\t' << i << '\t' << f.grid_to_ess << '\t' << f.wind_to_ess << '\t' << f.ess_to_load << '\t'
         << s.soc[i][t] << '\t' << s.purchase[i][t] << '\t' << s.total[t] << '\n';
    }
  }
}

}  // namespace gcpn::qp
