#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <span>

#include "optlab/core/param_vector.hpp"
#include "optlab/error.hpp"
#include "optlab/optimizers.hpp"
#include "optlab/problems.hpp"

namespace optlab {

/// Hyperparameters prescribed by the convergence analysis for a horizon T.
struct TheorySchedule {
  double alpha = 1.0;
  double beta1 = 0.0;
  double beta2 = 0.0;
  double eta = 0.0;
  std::size_t T = 1;
  double Delta = 0.0;
  double rho = 1.0;
  /// max of the two lower bounds on T; the schedule is covered when T >= this.
  double T_required = 0.0;
  bool T_condition_met = false;

  HyperParams hyper_params() const {
    HyperParams hp;
    hp.method = Method::GeneralizedSignSgd;
    hp.eta = eta;
    hp.beta1 = beta1;
    hp.beta2 = beta2;
    return hp;
  }
};

/// rho = 1 - sqrt(beta2) / beta1, or 1 for the SignSGD corner beta1 = beta2 = 0.
inline double momentum_ratio_rho(double beta1, double beta2) {
  if (!(beta2 >= 0.0 && beta2 < 1.0)) fail(ErrorCode::InvalidBeta2, "beta2 must lie in [0, 1)");
  if (beta1 == 0.0) {
    if (beta2 != 0.0) fail(ErrorCode::InvalidBeta2, "beta1 = 0 requires beta2 = 0");
    return 1.0;
  }
  if (std::sqrt(beta2) >= beta1) fail(ErrorCode::InvalidBeta2, "need sqrt(beta2) < beta1");
  return 1.0 - std::sqrt(beta2) / beta1;
}

/// alpha = min(sqrt(|L0|_1) sqrt(Delta) / (|sigma|_1 sqrt(T)), 1), beta1 = 1 - alpha,
/// eta = sqrt(Delta alpha) / (sqrt(|L0|_1) sqrt(T)), plus the lower bound on T.
inline TheorySchedule theoretical_hyperparams(double Delta, const SmoothnessSpec& smoothness,
                                              const NoiseSpec& noise, std::size_t T, double beta2,
                                              double delta_prob, std::size_t d) {
  if (!(Delta > 0.0 && std::isfinite(Delta))) fail(ErrorCode::SpecViolation, "Delta must be positive");
  if (T == 0) fail(ErrorCode::SpecViolation, "T must be at least 1");
  if (!(delta_prob > 0.0 && delta_prob < 1.0)) {
    fail(ErrorCode::SpecViolation, "delta must lie in (0, 1)");
  }
  if (d == 0) fail(ErrorCode::SpecViolation, "dimension must be positive");
  smoothness.validate(d);
  noise.validate(d);

  const double l0 = norm(smoothness.L0, Norm::L1);
  const double l1_inf = norm(smoothness.L1, Norm::Inf);
  const double sig = norm(noise.sigma, Norm::L1);
  if (!(l0 > 0.0)) fail(ErrorCode::DivisionByZero, "|L0|_1 must be positive");

  const double sqrt_T = std::sqrt(static_cast<double>(T));
  TheorySchedule s;
  s.T = T;
  s.Delta = Delta;
  s.beta2 = beta2;
  // Same expression for the switch test and for alpha, so the two agree to the ulp.
  const double scale = std::sqrt(l0 * Delta);
  if (sig * sqrt_T <= scale) {
    s.alpha = 1.0;
  } else {
    s.alpha = std::min(scale / (sig * sqrt_T), 1.0);
  }
  s.beta1 = 1.0 - s.alpha;
  s.eta = std::sqrt(Delta * s.alpha) / (std::sqrt(l0) * sqrt_T);
  s.rho = momentum_ratio_rho(s.beta1, beta2);

  const double dd = static_cast<double>(d);
  const double one_m_b2 = 1.0 - beta2;
  const double rho2 = s.rho * s.rho;
  const double first = 100.0 * dd * Delta * l1_inf * l1_inf / (one_m_b2 * rho2 * l0);
  const double second = 10000.0 * dd * dd * Delta * sig * sig * std::pow(l1_inf, 4) /
                        (one_m_b2 * one_m_b2 * rho2 * rho2 * l0 * l0 * l0);
  s.T_required = std::max(first, second);
  s.T_condition_met = static_cast<double>(T) >= s.T_required;
  return s;
}

/// Derived quantities of the convergence proof for one configuration.
/// An unbounded tau_bar (||L1||_inf = 0) is stored as +infinity.
struct TheoryConstants {
  double tau_bar = 0.0;
  double rho = 0.0;
  ParamVector E;
  ParamVector B;
  ParamVector C;
  double D = 0.0;
  double A = 0.0;
  ParamVector M;
  /// m_t - grad F(x_t) when a momentum snapshot was supplied.
  std::optional<ParamVector> epsilon_t;

  bool tau_bar_unbounded() const { return std::isinf(tau_bar); }
};

/// E_j uses the factor-6 constants; ln is the natural log.
inline TheoryConstants compute_theory_constants(const HyperParams& hp,
                                                const SmoothnessSpec& smoothness,
                                                const NoiseSpec& noise, const ParamVector& M,
                                                double delta_prob, std::size_t d) {
  if (!(hp.beta1 > 0.0 && hp.beta1 < 1.0)) fail(ErrorCode::InvalidRegime, "need 0 < beta1 < 1");
  if (!(hp.beta2 >= 0.0 && hp.beta2 < 1.0) || std::sqrt(hp.beta2) >= hp.beta1) {
    fail(ErrorCode::InvalidRegime, "need sqrt(beta2) < beta1");
  }
  if (!(hp.eta > 0.0)) fail(ErrorCode::InvalidRegime, "need eta > 0");
  if (!(delta_prob > 0.0 && delta_prob <= 1.0)) fail(ErrorCode::InvalidRegime, "need 0 < delta <= 1");
  smoothness.validate(d);
  noise.validate(d);
  if (M.size() != d) fail(ErrorCode::LengthMismatch, "M must have length d");

  const double b1 = hp.beta1;
  const double sqrt_1mb2 = std::sqrt(1.0 - hp.beta2);
  const double sqrt_d = std::sqrt(static_cast<double>(d));
  const double l1_inf = norm(smoothness.L1, Norm::Inf);
  const double log_term = std::max(1.0, std::log(1.0 / delta_prob));

  TheoryConstants c;
  c.rho = 1.0 - std::sqrt(hp.beta2) / b1;
  c.tau_bar = l1_inf > 0.0 ? sqrt_1mb2 / (hp.eta * sqrt_d * l1_inf)
                           : std::numeric_limits<double>::infinity();
  c.E = ParamVector(d);
  c.B = ParamVector(d);
  c.C = ParamVector(d);
  c.M = M;
  // pow(b1, +inf) is 0 for b1 < 1, the correct limit of the decaying term.
  const double decay = std::pow(b1, c.tau_bar);
  for (std::size_t j = 0; j < d; ++j) {
    const double s = noise.sigma[j];
    c.E[j] = 6.0 * s * log_term + 6.0 / std::sqrt(1.0 - b1 * b1) * std::sqrt(s * s * log_term);
    c.B[j] = hp.eta * smoothness.L0[j] / (sqrt_1mb2 * (1.0 - b1)) + decay * (M[j] + s) +
             (1.0 - b1) * c.E[j];
    c.C[j] = 1.0 + hp.eta * sqrt_d * smoothness.L1[j] / ((1.0 - b1) * sqrt_1mb2);
  }
  c.D = 1.0 - 2.0 * hp.eta * sqrt_d * l1_inf / (sqrt_1mb2 * (1.0 - b1));
  c.A = c.rho / (10.0 * sqrt_1mb2);
  return c;
}

inline TheoryConstants with_momentum_error(TheoryConstants c, const ParamVector& m,
                                           const ParamVector& grad) {
  c.epsilon_t = m - grad;
  return c;
}

/// M L1 (gap - 15 eps^2 / (16 L0)) / (2 eps^2 (ln(M L1 / L0) + 1)), the number
/// of GD iterations needed on the case-2 construction.
inline double gd_lower_bound_iterations(const LowerBoundSpec& spec, double f0_minus_fstar) {
  spec.validate();
  const double offset = 15.0 * spec.eps * spec.eps / (16.0 * spec.L0);
  if (!(f0_minus_fstar >= offset)) {
    fail(ErrorCode::SpecViolation, "f(x0) - f* must be at least 15 eps^2 / (16 L0)");
  }
  return spec.M * spec.L1 * (f0_minus_fstar - offset) /
         (2.0 * spec.eps * spec.eps * (std::log(spec.M * spec.L1 / spec.L0) + 1.0));
}

struct DescentReport {
  double lhs = 0.0;
  double rhs = 0.0;
  bool satisfied = false;
};

/// F(y) <= F(x) + <grad F(x), y - x>
///         + sum_j (L0_j / sqrt(d) + L1_j |d_jF(x)|) ||y - x||_2 |y_j - x_j| / 2
/// with the problem's declared constants.
inline DescentReport check_descent_lemma(const Problem& problem, const ParamVector& x,
                                         const ParamVector& y, double tolerance = 1e-9) {
  require_same_length(x, y, "check_descent_lemma");
  const ParamVector diff = y - x;
  const double dist = norm(diff, Norm::L2);
  const double l1_inf = norm(problem.smoothness.L1, Norm::Inf);
  if (l1_inf > 0.0 && dist > 1.0 / l1_inf) {
    fail(ErrorCode::RadiusExceeded, "||y - x||_2 exceeds 1 / ||L1||_inf");
  }
  const ParamVector g = problem.gradient(x);
  const double sqrt_d = std::sqrt(static_cast<double>(x.size()));
  double penalty = 0.0;
  for (std::size_t j = 0; j < x.size(); ++j) {
    const double local = problem.smoothness.L0[j] / sqrt_d + problem.smoothness.L1[j] * std::abs(g[j]);
    penalty += local * dist * std::abs(diff[j]) / 2.0;
  }
  DescentReport r;
  r.lhs = problem.value(y);
  r.rhs = problem.value(x) + dot(g, diff) + penalty;
  r.satisfied = r.lhs <= r.rhs + tolerance;
  return r;
}

/// Largest |x_{t+1,j} - x_{t,j}| sqrt(1 - beta2) / eta over the run, using the
/// displacement the optimizer applied. At most 1 for generalized SignSGD
/// with momentum-based second moments.
inline double check_update_bound(const Trajectory& trajectory, const HyperParams& hp) {
  if (hp.method != Method::GeneralizedSignSgd ||
      hp.second_moment_source != SecondMomentSource::Momentum ||
      trajectory.hp.method != Method::GeneralizedSignSgd) {
    fail(ErrorCode::WrongMethod, "update bound applies to generalized_signsgd with momentum");
  }
  return trajectory.max_applied_update * std::sqrt(1.0 - hp.beta2) / hp.eta;
}

/// max over the grid of |f''(x)| - (L0 + L1 |f'(x)|).
inline double check_second_order(const Problem& problem, std::span<const double> grid) {
  if (!problem.has_second_derivative() || problem.dim != 1) {
    fail(ErrorCode::NoSecondDerivative, problem.name + " has no second-derivative oracle");
  }
  const double l0 = problem.smoothness.L0[0];
  const double l1 = problem.smoothness.L1[0];
  double worst = -std::numeric_limits<double>::infinity();
  for (double x : grid) {
    const double fp = problem.gradient(ParamVector{x})[0];
    const double fpp = problem.second_derivative(x);
    worst = std::max(worst, std::abs(fpp) - (l0 + l1 * std::abs(fp)));
  }
  return worst;
}

/// Outcome of running constant-step GD on a one-dimensional problem and
/// checking that every step flips the sign and grows the magnitude.
struct OscillationReport {
  /// Consecutive steps from the start with |x_{t+1}| > |x_t| and a sign flip.
  std::size_t verified_steps = 0;
  /// Step at which the iterate stopped being representable, if it did.
  std::optional<std::size_t> overflow_step;
  /// Step at which growth or alternation first failed with finite iterates.
  std::optional<std::size_t> violation_step;
};

inline OscillationReport gd_oscillation(const Problem& problem, double x0, double eta,
                                        std::size_t steps) {
  if (problem.dim != 1) fail(ErrorCode::LengthMismatch, "oscillation check is one-dimensional");
  OscillationReport r;
  double x = x0;
  for (std::size_t t = 1; t <= steps; ++t) {
    const double next = x - eta * problem.gradient(ParamVector{x})[0];
    if (!std::isfinite(next)) {
      r.overflow_step = t;
      return r;
    }
    if (!(std::abs(next) > std::abs(x) && std::signbit(next) != std::signbit(x))) {
      r.violation_step = t;
      return r;
    }
    ++r.verified_steps;
    x = next;
  }
  return r;
}

}  // namespace optlab
