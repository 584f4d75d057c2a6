#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <numbers>
#include <optional>
#include <string>
#include <utility>

#include "optlab/core/param_vector.hpp"
#include "optlab/core/rng.hpp"
#include "optlab/error.hpp"

namespace optlab {

/// Per-coordinate (L0, L1) constants of the coordinate-wise relaxed
/// smoothness condition
///   |d_jF(y) - d_jF(x)| <= (L0_j / sqrt(d) + L1_j |d_jF(x)|) ||y - x||_2
/// for ||y - x||_2 <= 1 / ||L1||_inf.
struct SmoothnessSpec {
  ParamVector L0;
  ParamVector L1;

  void validate(std::size_t d) const {
    if (L0.size() != d || L1.size() != d) {
      fail(ErrorCode::LengthMismatch, "smoothness constants must have length d");
    }
    for (std::size_t j = 0; j < d; ++j) {
      if (!(std::isfinite(L0[j]) && L0[j] >= 0.0 && std::isfinite(L1[j]) && L1[j] >= 0.0)) {
        fail(ErrorCode::SpecViolation, "smoothness constants must be finite and nonnegative");
      }
    }
  }
};

/// Almost-sure per-coordinate bound on the stochastic gradient error.
struct NoiseSpec {
  ParamVector sigma;

  static NoiseSpec none(std::size_t d) { return {ParamVector::zeros(d)}; }

  void validate(std::size_t d) const {
    if (sigma.size() != d) fail(ErrorCode::LengthMismatch, "sigma must have length d");
    for (double s : sigma) {
      if (!(std::isfinite(s) && s >= 0.0)) {
        fail(ErrorCode::SpecViolation, "sigma entries must be finite and nonnegative");
      }
    }
  }
};

/// An objective with exact oracles and declared constants. Value semantics;
/// the oracles are pure and safe to call concurrently.
struct Problem {
  std::string name;
  std::size_t dim = 0;
  std::function<double(const ParamVector&)> value;
  std::function<ParamVector(const ParamVector&)> gradient;
  /// Only set for one-dimensional problems with a closed-form f''.
  std::function<double(double)> second_derivative;
  SmoothnessSpec smoothness;
  NoiseSpec noise;
  double f_star = 0.0;
  /// Suggested starting point, when the construction prescribes one.
  std::optional<ParamVector> default_start;
  /// Step size above which constant-step GD diverges (case-1 construction).
  std::optional<double> gd_divergence_threshold;

  bool has_second_derivative() const noexcept { return static_cast<bool>(second_derivative); }
};

namespace detail {

inline ParamVector checked_positive(const ParamVector& v, const char* what, ErrorCode code) {
  require_nonempty(v, what);
  for (double x : v) {
    if (!(std::isfinite(x) && x > 0.0)) fail(code, std::string(what) + " entries must be positive");
  }
  return v;
}

inline NoiseSpec checked_noise(NoiseSpec noise, std::size_t d) {
  if (noise.sigma.empty()) noise = NoiseSpec::none(d);
  noise.validate(d);
  return noise;
}

}  // namespace detail

/// F(x) = 1/2 sum_j c_j x_j^2. Declared L0_j = sqrt(d) c_j so that the
/// 1/sqrt(d) normalization of the coordinate-wise condition gives back c_j.
inline Problem make_quadratic(const ParamVector& c, NoiseSpec noise = {}) {
  detail::checked_positive(c, "curvature c", ErrorCode::NonPositiveCurvature);
  const std::size_t d = c.size();
  Problem p;
  p.name = "quadratic";
  p.dim = d;
  p.value = [c](const ParamVector& x) {
    require_same_length(x, c, "quadratic value");
    double acc = 0.0;
    for (std::size_t j = 0; j < c.size(); ++j) acc += 0.5 * c[j] * x[j] * x[j];
    return acc;
  };
  p.gradient = [c](const ParamVector& x) {
    return zip_with(c, x, [](double cj, double xj) { return cj * xj; });
  };
  if (d == 1) {
    const double c0 = c[0];
    p.second_derivative = [c0](double) { return c0; };
  }
  p.smoothness = {std::sqrt(static_cast<double>(d)) * c, ParamVector::zeros(d)};
  p.noise = detail::checked_noise(std::move(noise), d);
  p.f_star = 0.0;
  return p;
}

/// Gradient-difference constant implied by |f''| <= L1 |f'| on a trust
/// radius of 1/L1: (e - 1) L1.
inline constexpr double kExpGradientFactor = std::numbers::e - 1.0;

/// Floor used for L0 when the exact relation needs no additive term.
inline constexpr double kL0Floor = 1e-12;

/// F(x) = sum_j exp(a_j x_j). Satisfies f'' = a |f'| per coordinate, so the
/// Hessian is unbounded while the ratio stays fixed. Declared L1_j is the
/// gradient-difference constant (e - 1) a_j; L0_j is a tiny floor.
inline Problem make_exp_separable(const ParamVector& a, NoiseSpec noise = {}) {
  detail::checked_positive(a, "rate a", ErrorCode::SpecViolation);
  const std::size_t d = a.size();
  Problem p;
  p.name = "exp_separable";
  p.dim = d;
  p.value = [a](const ParamVector& x) {
    require_same_length(x, a, "exp_separable value");
    double acc = 0.0;
    for (std::size_t j = 0; j < a.size(); ++j) acc += std::exp(a[j] * x[j]);
    return acc;
  };
  p.gradient = [a](const ParamVector& x) {
    return zip_with(a, x, [](double aj, double xj) { return aj * std::exp(aj * xj); });
  };
  if (d == 1) {
    const double a0 = a[0];
    p.second_derivative = [a0](double x) { return a0 * a0 * std::exp(a0 * x); };
  }
  p.smoothness = {ParamVector(d, kL0Floor), kExpGradientFactor * a};
  p.noise = detail::checked_noise(std::move(noise), d);
  p.f_star = 0.0;
  return p;
}

/// Parameters of the two one-dimensional constructions that lower-bound
/// constant-step gradient descent.
struct LowerBoundSpec {
  double L0 = 1.0;
  double L1 = 1.0;
  double M = 1.0;
  double eps = 0.1;
  /// Explicit starting point. Case 1 defaults to (1/L1)(ln(M L1/L0) + 1);
  /// case 2 derives it from `initial_gap` when absent.
  std::optional<double> x0;
  /// f(x0) - f* for case 2 when x0 is not given.
  std::optional<double> initial_gap;

  void validate() const {
    auto positive = [](double v) { return std::isfinite(v) && v > 0.0; };
    if (!positive(L0) || !positive(L1) || !positive(eps)) {
      fail(ErrorCode::SpecViolation, "L0, L1 and eps must be positive");
    }
    if (!std::isfinite(M) || M < L0 / L1 || M < eps) {
      fail(ErrorCode::SpecViolation, "M must satisfy M >= max(L0/L1, eps)");
    }
  }

  /// (2 / (M L1)) (ln(M L1 / L0) + 1)
  double gd_divergence_threshold() const {
    return 2.0 / (M * L1) * (std::log(M * L1 / L0) + 1.0);
  }

  double case1_default_start() const { return (std::log(M * L1 / L0) + 1.0) / L1; }
};

/// Three-branch exponential/quadratic construction on which GD with a step
/// above the divergence threshold oscillates with growing amplitude.
struct LowerBoundCase1 {
  enum class Branch { Left, Middle, Right };

  double L0;
  double L1;

  double boundary() const { return 1.0 / L1; }

  /// Middle branch on the closed interval [-1/L1, 1/L1].
  Branch branch_of(double x) const {
    if (x < -boundary()) return Branch::Left;
    if (x > boundary()) return Branch::Right;
    return Branch::Middle;
  }

  double value(Branch b, double x) const {
    switch (b) {
      case Branch::Left: return L0 * std::exp(-L1 * x - 1.0) / (L1 * L1);
      case Branch::Middle: return L0 * x * x / 2.0 + L0 / (2.0 * L1 * L1);
      case Branch::Right: return L0 * std::exp(L1 * x - 1.0) / (L1 * L1);
    }
    return 0.0;
  }
  double derivative(Branch b, double x) const {
    switch (b) {
      case Branch::Left: return -L0 * std::exp(-L1 * x - 1.0) / L1;
      case Branch::Middle: return L0 * x;
      case Branch::Right: return L0 * std::exp(L1 * x - 1.0) / L1;
    }
    return 0.0;
  }
  double second_derivative(Branch b, double x) const {
    switch (b) {
      case Branch::Left: return L0 * std::exp(-L1 * x - 1.0);
      case Branch::Middle: return L0;
      case Branch::Right: return L0 * std::exp(L1 * x - 1.0);
    }
    return 0.0;
  }

  double value(double x) const { return value(branch_of(x), x); }
  double derivative(double x) const { return derivative(branch_of(x), x); }
  double second_derivative(double x) const { return second_derivative(branch_of(x), x); }
  double minimum() const { return L0 / (2.0 * L1 * L1); }
};

/// Quartic-smoothed absolute value: (L0, 0)-smooth with |f'| <= eps, so GD
/// crawls along the linear branch at speed eta * eps.
struct LowerBoundCase2 {
  enum class Branch { Left, Middle, Right };

  double L0;
  double eps;

  double boundary() const { return 1.5 * eps / L0; }

  Branch branch_of(double x) const {
    if (x < -boundary()) return Branch::Left;
    if (x > boundary()) return Branch::Right;
    return Branch::Middle;
  }

  double value(Branch b, double x) const {
    switch (b) {
      case Branch::Left: return -eps * x;
      case Branch::Middle: {
        const double x2 = x * x;
        return L0 / 2.0 * x2 - L0 * L0 * L0 * x2 * x2 / (27.0 * eps * eps) +
               9.0 * eps * eps / (16.0 * L0);
      }
      case Branch::Right: return eps * x;
    }
    return 0.0;
  }
  double derivative(Branch b, double x) const {
    switch (b) {
      case Branch::Left: return -eps;
      case Branch::Middle: return L0 * x - 4.0 * L0 * L0 * L0 * x * x * x / (27.0 * eps * eps);
      case Branch::Right: return eps;
    }
    return 0.0;
  }
  double second_derivative(Branch b, double x) const {
    switch (b) {
      case Branch::Left:
      case Branch::Right: return 0.0;
      case Branch::Middle: return L0 - 4.0 * L0 * L0 * L0 * x * x / (9.0 * eps * eps);
    }
    return 0.0;
  }

  double value(double x) const { return value(branch_of(x), x); }
  double derivative(double x) const { return derivative(branch_of(x), x); }
  double second_derivative(double x) const { return second_derivative(branch_of(x), x); }
  double minimum() const { return 9.0 * eps * eps / (16.0 * L0); }

  /// x0 = boundary + gap/eps - 15 eps / (16 L0), the start whose optimality
  /// gap equals `gap`.
  double start_for_gap(double gap) const {
    return boundary() + gap / eps - 15.0 * eps / (16.0 * L0);
  }
};

namespace detail {

template <typename Piecewise>
Problem wrap_one_dimensional(std::string name, Piecewise f, const SmoothnessSpec& smoothness,
                             NoiseSpec noise) {
  Problem p;
  p.name = std::move(name);
  p.dim = 1;
  p.value = [f](const ParamVector& x) {
    if (x.size() != 1) fail(ErrorCode::LengthMismatch, "one-dimensional problem");
    return f.value(x[0]);
  };
  p.gradient = [f](const ParamVector& x) {
    if (x.size() != 1) fail(ErrorCode::LengthMismatch, "one-dimensional problem");
    return ParamVector{f.derivative(x[0])};
  };
  p.second_derivative = [f](double x) { return f.second_derivative(x); };
  p.smoothness = smoothness;
  p.noise = checked_noise(std::move(noise), 1);
  p.f_star = f.minimum();
  return p;
}

}  // namespace detail

inline Problem make_lower_bound_case1(const LowerBoundSpec& spec, NoiseSpec noise = {}) {
  spec.validate();
  const LowerBoundCase1 f{spec.L0, spec.L1};
  Problem p = detail::wrap_one_dimensional("lower_bound_case1", f,
                                           {ParamVector{spec.L0}, ParamVector{spec.L1}},
                                           std::move(noise));
  p.default_start = ParamVector{spec.x0.value_or(spec.case1_default_start())};
  p.gd_divergence_threshold = spec.gd_divergence_threshold();
  return p;
}

inline Problem make_lower_bound_case2(const LowerBoundSpec& spec, NoiseSpec noise = {}) {
  spec.validate();
  const LowerBoundCase2 f{spec.L0, spec.eps};
  double x0 = 0.0;
  if (spec.x0) {
    x0 = *spec.x0;
  } else if (spec.initial_gap) {
    x0 = f.start_for_gap(*spec.initial_gap);
    if (!(x0 > f.boundary())) {
      fail(ErrorCode::SpecViolation, "initial gap must exceed 15 eps^2 / (16 L0)");
    }
  } else {
    fail(ErrorCode::SpecViolation, "case 2 needs either x0 or initial_gap");
  }
  // (L0, 0)-smooth: the L1 term is never needed.
  Problem p = detail::wrap_one_dimensional("lower_bound_case2", f,
                                           {ParamVector{spec.L0}, ParamVector{0.0}},
                                           std::move(noise));
  p.default_start = ParamVector{x0};
  return p;
}

/// grad F(x) + zeta, zeta_j ~ Uniform[-sigma_j, sigma_j]. Always consumes
/// exactly d uniforms, in coordinate order.
inline ParamVector sample_stochastic_gradient(const Problem& problem, const ParamVector& x,
                                              Rng& rng) {
  require_finite(x, "x");
  ParamVector g = problem.gradient(x);
  for (std::size_t j = 0; j < g.size(); ++j) {
    const double u = rng.next_uniform();
    g[j] += problem.noise.sigma[j] * (2.0 * u - 1.0);
  }
  return g;
}

/// Central differences (F(x + h e_j) - F(x - h e_j)) / (2h).
inline ParamVector finite_difference_gradient(const Problem& problem, const ParamVector& x,
                                              double h) {
  if (!(h > 0.0)) fail(ErrorCode::SpecViolation, "step h must be positive");
  ParamVector out(x.size());
  ParamVector probe = x;
  for (std::size_t j = 0; j < x.size(); ++j) {
    probe[j] = x[j] + h;
    const double up = problem.value(probe);
    probe[j] = x[j] - h;
    const double down = problem.value(probe);
    probe[j] = x[j];
    out[j] = (up - down) / (2.0 * h);
  }
  return out;
}

}  // namespace optlab
