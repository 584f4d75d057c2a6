#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "optlab/core/param_vector.hpp"
#include "optlab/core/rng.hpp"
#include "optlab/error.hpp"
#include "optlab/problems.hpp"

namespace optlab {

enum class Method { GeneralizedSignSgd, Adam, SgdMomentum, SgdMomentumNormalized, SgdClip };

/// Which squared quantity feeds the second moment of generalized SignSGD.
/// `Momentum` is the published algorithm; `Gradient` gives Adam without
/// bias correction.
enum class SecondMomentSource { Momentum, Gradient };

constexpr std::string_view to_string(Method m) {
  switch (m) {
    case Method::GeneralizedSignSgd: return "generalized_signsgd";
    case Method::Adam: return "adam";
    case Method::SgdMomentum: return "sgd_momentum";
    case Method::SgdMomentumNormalized: return "sgd_momentum_normalized";
    case Method::SgdClip: return "sgd_clip";
  }
  return "unknown";
}

inline std::optional<Method> parse_method(std::string_view name) {
  for (Method m : {Method::GeneralizedSignSgd, Method::Adam, Method::SgdMomentum,
                   Method::SgdMomentumNormalized, Method::SgdClip}) {
    if (to_string(m) == name) return m;
  }
  return std::nullopt;
}

constexpr std::string_view to_string(SecondMomentSource s) {
  return s == SecondMomentSource::Momentum ? "momentum" : "gradient";
}

struct HyperParams {
  Method method = Method::GeneralizedSignSgd;
  double eta = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.0;
  /// Clipping threshold gamma; sgd_clip only.
  std::optional<double> clip_gamma;
  /// 0 clips the gradient, 1 clips the momentum.
  int clip_nu = 0;
  double adam_eps = 1e-8;
  bool bias_correction = true;
  SecondMomentSource second_moment_source = SecondMomentSource::Momentum;

  void validate() const {
    auto bad = [](const std::string& what) { fail(ErrorCode::InvalidHyperParams, what); };
    if (!(std::isfinite(eta) && eta > 0.0)) bad("eta must be positive and finite");
    if (!(beta1 >= 0.0 && beta1 < 1.0)) bad("beta1 must lie in [0, 1)");
    if (!(beta2 >= 0.0 && beta2 < 1.0)) bad("beta2 must lie in [0, 1)");
    if (clip_gamma && !(std::isfinite(*clip_gamma) && *clip_gamma > 0.0)) {
      bad("clip_gamma must be positive");
    }
    if (clip_nu != 0 && clip_nu != 1) bad("clip_nu must be 0 or 1");
    if (!(adam_eps >= 0.0 && std::isfinite(adam_eps))) bad("adam_eps must be nonnegative");
    if (method == Method::SgdClip && !clip_gamma) {
      fail(ErrorCode::MissingClipGamma, "sgd_clip requires clip_gamma");
    }
  }

  /// The regime covered by the convergence analysis: sqrt(beta2) < beta1,
  /// or plain SignSGD with beta1 = beta2 = 0.
  bool in_theory_regime() const {
    return (beta1 == 0.0 && beta2 == 0.0) || std::sqrt(beta2) < beta1;
  }

  void validate_theory_regime() const {
    validate();
    if (method == Method::GeneralizedSignSgd && !in_theory_regime()) {
      fail(ErrorCode::InvalidBeta2, "theory regime requires sqrt(beta2) < beta1");
    }
  }
};

struct OptimizerState {
  ParamVector x;
  ParamVector m;
  ParamVector v;
  /// Number of steps taken; 0 before the first step.
  std::size_t t = 0;
  /// Displacement subtracted from x by the last step (x_t - x_{t+1} before
  /// rounding of the subtraction).
  ParamVector update;
};

inline OptimizerState init_state(const ParamVector& x1) {
  require_nonempty(x1, "x1");
  require_finite(x1, "x1");
  const std::size_t d = x1.size();
  return {x1, ParamVector::zeros(d), ParamVector::zeros(d), 0, ParamVector::zeros(d)};
}

namespace detail {

inline void check_step_inputs(const OptimizerState& s, const ParamVector& g) {
  require_same_length(s.x, g, "gradient");
  require_same_length(s.x, s.m, "first moment");
  require_same_length(s.x, s.v, "second moment");
  require_finite(g, "gradient");
}

inline void require_method(const HyperParams& hp, Method expected) {
  if (hp.method != expected) {
    fail(ErrorCode::WrongMethod,
         "expected method " + std::string(to_string(expected)) + ", got " +
             std::string(to_string(hp.method)));
  }
}

inline OptimizerState apply_update(const OptimizerState& s, ParamVector m, ParamVector v,
                                   ParamVector update) {
  ParamVector x = s.x - update;
  return {std::move(x), std::move(m), std::move(v), s.t + 1, std::move(update)};
}

inline ParamVector ema(const ParamVector& prev, const ParamVector& g, double beta) {
  return zip_with(prev, g, [beta](double p, double gj) { return beta * p + (1.0 - beta) * gj; });
}

}  // namespace detail

/// One step of generalized SignSGD:
///   m' = b1 m + (1 - b1) g
///   v' = b2 v + (1 - b2) m'^2      (or g^2 with SecondMomentSource::Gradient)
///   x' = x - eta m' / sqrt(v')
/// A coordinate with v'_j = 0 does not move. With b2 = 0 this is SIGNUM and
/// every nonzero update is exactly +-eta.
inline OptimizerState step_generalized_signsgd(const OptimizerState& s, const ParamVector& g,
                                               const HyperParams& hp) {
  detail::require_method(hp, Method::GeneralizedSignSgd);
  hp.validate();
  detail::check_step_inputs(s, g);

  const std::size_t d = g.size();
  ParamVector m = detail::ema(s.m, g, hp.beta1);
  ParamVector v(d);
  ParamVector update(d);
  const bool from_momentum = hp.second_moment_source == SecondMomentSource::Momentum;
  for (std::size_t j = 0; j < d; ++j) {
    const double sq = from_momentum ? m[j] * m[j] : g[j] * g[j];
    v[j] = hp.beta2 * s.v[j] + (1.0 - hp.beta2) * sq;
    update[j] = v[j] > 0.0 ? hp.eta * (m[j] / std::sqrt(v[j])) : 0.0;
  }
  return detail::apply_update(s, std::move(m), std::move(v), std::move(update));
}

/// Adam with optional bias correction; the guard eps is added to sqrt(v_hat).
inline OptimizerState step_adam(const OptimizerState& s, const ParamVector& g,
                                const HyperParams& hp) {
  detail::require_method(hp, Method::Adam);
  hp.validate();
  detail::check_step_inputs(s, g);

  const std::size_t d = g.size();
  const double t_next = static_cast<double>(s.t + 1);
  const double m_scale = hp.bias_correction ? 1.0 / (1.0 - std::pow(hp.beta1, t_next)) : 1.0;
  const double v_scale = hp.bias_correction ? 1.0 / (1.0 - std::pow(hp.beta2, t_next)) : 1.0;

  ParamVector m = detail::ema(s.m, g, hp.beta1);
  ParamVector v(d);
  ParamVector update(d);
  for (std::size_t j = 0; j < d; ++j) {
    v[j] = hp.beta2 * s.v[j] + (1.0 - hp.beta2) * g[j] * g[j];
    const double m_hat = m[j] * m_scale;
    const double denom = std::sqrt(v[j] * v_scale) + hp.adam_eps;
    update[j] = denom > 0.0 ? hp.eta * (m_hat / denom) : 0.0;
  }
  return detail::apply_update(s, std::move(m), std::move(v), std::move(update));
}

/// SGD with EMA momentum, its normalized variant, and gradient/momentum
/// clipping (clip_nu selects which direction is clipped, in the l2 norm).
inline OptimizerState step_sgd_family(const OptimizerState& s, const ParamVector& g,
                                      const HyperParams& hp) {
  if (hp.method != Method::SgdMomentum && hp.method != Method::SgdMomentumNormalized &&
      hp.method != Method::SgdClip) {
    fail(ErrorCode::WrongMethod, "step_sgd_family called with " + std::string(to_string(hp.method)));
  }
  hp.validate();
  detail::check_step_inputs(s, g);

  ParamVector m = detail::ema(s.m, g, hp.beta1);
  ParamVector update(g.size());
  switch (hp.method) {
    case Method::SgdMomentum:
      update = hp.eta * m;
      break;
    case Method::SgdMomentumNormalized: {
      const double n = norm(m, Norm::L2);
      if (n > 0.0) update = map(m, [&](double mj) { return hp.eta * (mj / n); });
      break;
    }
    case Method::SgdClip: {
      const ParamVector& w = hp.clip_nu == 0 ? g : m;
      const double n = norm(w, Norm::L2);
      const double gamma = *hp.clip_gamma;
      if (n <= gamma) {
        update = hp.eta * w;
      } else {
        const double scale = gamma / n;
        update = map(w, [&](double wj) { return hp.eta * (wj * scale); });
      }
      break;
    }
    default:
      break;
  }
  return detail::apply_update(s, std::move(m), s.v, std::move(update));
}

inline OptimizerState step(const OptimizerState& s, const ParamVector& g, const HyperParams& hp) {
  switch (hp.method) {
    case Method::GeneralizedSignSgd: return step_generalized_signsgd(s, g, hp);
    case Method::Adam: return step_adam(s, g, hp);
    default: return step_sgd_family(s, g, hp);
  }
}

/// One logged row: the iterate x_t before step t and the step it took.
struct TrajectoryRecord {
  std::size_t t = 0;
  double f_value = 0.0;
  double grad_l1 = 0.0;
  double grad_l2 = 0.0;
  double update_linf = 0.0;
  std::optional<ParamVector> x_snapshot;
};

enum class SnapshotPolicy { Auto, Always, Never };

struct RunOptions {
  std::size_t log_stride = 1;
  /// Auto keeps snapshots for d <= 4.
  SnapshotPolicy snapshots = SnapshotPolicy::Auto;
  /// When set, a non-finite iterate or |F| above `divergence_value` ends the
  /// run with `diverged = true` instead of throwing NonFiniteIterate.
  bool stop_on_divergence = false;
  double divergence_value = 1e12;
  /// Called after every step with (t, x_t, x_{t+1}).
  std::function<void(std::size_t, const ParamVector&, const ParamVector&)> on_step;
};

struct Trajectory {
  HyperParams hp;
  std::vector<TrajectoryRecord> records;
  OptimizerState final_state;
  std::size_t steps_taken = 0;
  bool diverged = false;
  std::optional<std::size_t> diverged_at;
  /// Largest |x_{t+1,j} - x_{t,j}| over every step, logged or not.
  double max_update_linf = 0.0;
  /// Largest |update_j| the optimizer applied, before the subtraction from x
  /// is rounded.
  double max_applied_update = 0.0;
  /// Per-coordinate max |d_jF(x_t)| over visited iterates.
  ParamVector grad_abs_max;
  /// max_j (|g_j - d_jF| - sigma_j) over all draws; <= 0 when the noise bound held.
  double max_noise_excess = -std::numeric_limits<double>::infinity();
};

/// Runs T steps of the configured method from x1. Gradients come from the
/// seeded stochastic oracle when `noise_on`, otherwise from the exact
/// gradient. Deterministic in (problem, x1, hp, T, seed, noise_on).
inline Trajectory run_optimizer(const Problem& problem, const ParamVector& x1,
                                const HyperParams& hp, std::size_t T, std::uint64_t seed,
                                bool noise_on, const RunOptions& options = {}) {
  if (T == 0) fail(ErrorCode::SpecViolation, "T must be at least 1");
  if (options.log_stride == 0) fail(ErrorCode::SpecViolation, "log_stride must be at least 1");
  hp.validate();
  if (x1.size() != problem.dim) fail(ErrorCode::LengthMismatch, "x1 does not match problem dimension");

  const std::size_t d = problem.dim;
  const bool keep_snapshots = options.snapshots == SnapshotPolicy::Always ||
                              (options.snapshots == SnapshotPolicy::Auto && d <= 4);
  Trajectory out;
  out.hp = hp;
  out.grad_abs_max = ParamVector::zeros(d);
  out.records.reserve((T + options.log_stride - 1) / options.log_stride);

  Rng rng(seed);
  OptimizerState state = init_state(x1);
  for (std::size_t t = 1; t <= T; ++t) {
    const ParamVector grad = problem.gradient(state.x);
    const double f = problem.value(state.x);
    // A finite iterate whose gradient overflows cannot produce a finite next iterate.
    if (!grad.all_finite()) {
      if (!options.stop_on_divergence) throw NonFiniteIterateError(t);
      out.diverged = true;
      out.diverged_at = t;
      break;
    }
    for (std::size_t j = 0; j < d; ++j) {
      out.grad_abs_max[j] = std::max(out.grad_abs_max[j], std::abs(grad[j]));
    }
    if (options.stop_on_divergence && !(std::abs(f) <= options.divergence_value)) {
      out.diverged = true;
      out.diverged_at = t;
      break;
    }

    ParamVector g = grad;
    if (noise_on) {
      g = sample_stochastic_gradient(problem, state.x, rng);
      for (std::size_t j = 0; j < d; ++j) {
        out.max_noise_excess =
            std::max(out.max_noise_excess, std::abs(g[j] - grad[j]) - problem.noise.sigma[j]);
      }
    }

    OptimizerState next = step(state, g, hp);
    double update_linf = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
      update_linf = std::max(update_linf, std::abs(next.x[j] - state.x[j]));
    }
    if (!next.x.all_finite()) update_linf = std::numeric_limits<double>::infinity();
    out.max_update_linf = std::max(out.max_update_linf, update_linf);
    out.max_applied_update = std::max(out.max_applied_update, norm(next.update, Norm::Inf));

    if ((t - 1) % options.log_stride == 0) {
      TrajectoryRecord rec{t, f, norm(grad, Norm::L1), norm(grad, Norm::L2), update_linf, {}};
      if (keep_snapshots) rec.x_snapshot = state.x;
      out.records.push_back(std::move(rec));
    }
    out.steps_taken = t;

    if (!next.x.all_finite()) {
      if (!options.stop_on_divergence) throw NonFiniteIterateError(t);
      out.diverged = true;
      out.diverged_at = t;
      out.final_state = std::move(next);
      return out;
    }
    if (options.on_step) options.on_step(t, state.x, next.x);
    state = std::move(next);
  }
  out.final_state = std::move(state);
  return out;
}

}  // namespace optlab
