#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <utility>

#include "gcpn/ndgrad/param_vector.hpp"

namespace gcpn::ndgrad {

struct AdamHyper {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  std::vector<double> m;
  std::vector<double> v;
  std::int64_t t = 0;
  AdamHyper hyper;

  AdamState() = default;
  AdamState(std::size_t n, AdamHyper h) : m(n, 0.0), v(n, 0.0), hyper(h) {}
};

enum class Direction { minimize, maximize };

/// One Adam step in place. Non-finite gradients are refused before anything
/// is touched; the error names the offending parameter.
inline void adam_step(ParamVector& params, const ParamVector& grads, AdamState& state,
                      Direction direction) {
  if (grads.size() != params.size() || state.m.size() != params.size() ||
      state.v.size() != params.size()) {
    throw DimensionError("adam_step: parameter, gradient and state lengths differ");
  }
  const AdamHyper& h = state.hyper;
  if (!std::isfinite(h.lr) || !std::isfinite(h.beta1) || !std::isfinite(h.beta2) ||
      !std::isfinite(h.eps)) {
    throw ConfigError("adam_step: non-finite hyperparameter");
  }
  for (std::size_t i = 0; i < grads.size(); ++i) {
    if (!std::isfinite(grads[i])) {
      throw NumericError("adam_step: non-finite gradient at " + grads.label(i));
    }
  }
  const double sign = direction == Direction::minimize ? 1.0 : -1.0;
  state.t += 1;
  const double c1 = 1.0 - std::pow(h.beta1, static_cast<double>(state.t));
  const double c2 = 1.0 - std::pow(h.beta2, static_cast<double>(state.t));
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double g = sign * grads[i];
    state.m[i] = h.beta1 * state.m[i] + (1.0 - h.beta1) * g;
    state.v[i] = h.beta2 * state.v[i] + (1.0 - h.beta2) * g * g;
    const double mhat = state.m[i] / c1;
    const double vhat = state.v[i] / c2;
    params[i] -= h.lr * mhat / (std::sqrt(vhat) + h.eps);
  }
}

/// Value-returning form of adam_step.
inline std::pair<ParamVector, AdamState> adam_stepped(ParamVector params, const ParamVector& grads,
                                                      AdamState state, Direction direction) {
  adam_step(params, grads, state, direction);
  return {std::move(params), std::move(state)};
}

/// target <- tau * online + (1 - tau) * target
inline void soft_update(ParamVector& target, const ParamVector& online, double tau) {
  if (!(tau >= 0.0 && tau <= 1.0)) throw ConfigError("soft_update: tau must lie in [0,1]");
  if (target.size() != online.size()) throw DimensionError("soft_update: length mismatch");
  require_same_layout(target, online, "soft_update");
  for (std::size_t i = 0; i < target.size(); ++i) {
    target[i] = tau * online[i] + (1.0 - tau) * target[i];
  }
}

inline ParamVector soft_updated(ParamVector target, const ParamVector& online, double tau) {
  soft_update(target, online, tau);
  return target;
}

}  // namespace gcpn::ndgrad
