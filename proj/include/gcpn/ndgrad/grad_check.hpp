#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <string>

#include "gcpn/ndgrad/mlp.hpp"

namespace gcpn::ndgrad {

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::size_t worst_index = 0;
  bool finite = true;
  std::string message;  // names the offending parameter when !finite

  bool passed(double tolerance) const { return finite && max_rel_error <= tolerance; }
};

using BackwardFn = std::function<Gradient(const Tape&, const Matrix&)>;

/// Compares backward() against central finite differences of
/// sum(output) at the probe input(s), over every parameter.
/// Error per parameter is |analytic - numeric| / max(1, |numeric|).
inline GradCheckResult grad_check(const MlpSpec& spec, const ParamVector& params,
                                  const Matrix& probe, double eps,
                                  const BackwardFn& backward_fn = {}) {
  if (!(eps > 0.0 && eps <= 1e-2)) throw ConfigError("grad_check: eps must lie in (0, 1e-2]");
  GradCheckResult result;

  Tape tape;
  const Matrix out = forward_batch(spec, params, probe, &tape);
  const Matrix seed = Matrix::Ones(out.rows(), out.cols());
  const Gradient analytic =
      backward_fn ? backward_fn(tape, seed) : backward(tape, seed, BackwardMode::full);

  ParamVector work = params;
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double orig = work[i];
    work[i] = orig + eps;
    const double up = forward_batch(spec, work, probe).sum();
    work[i] = orig - eps;
    const double down = forward_batch(spec, work, probe).sum();
    work[i] = orig;
    const double numeric = (up - down) / (2.0 * eps);
    const double a = analytic.params[i];
    if (!std::isfinite(numeric) || !std::isfinite(a)) {
      result.finite = false;
      result.worst_index = i;
      result.max_rel_error = std::numeric_limits<double>::infinity();
      result.message = "non-finite gradient at " + params.label(i);
      return result;
    }
    const double err = std::abs(a - numeric) / std::max(1.0, std::abs(numeric));
    if (err > result.max_rel_error) {
      result.max_rel_error = err;
      result.worst_index = i;
    }
  }
  return result;
}

}  // namespace gcpn::ndgrad
