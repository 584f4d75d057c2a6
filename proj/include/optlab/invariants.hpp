#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numbers>
#include <string>
#include <vector>

#include "optlab/core/param_vector.hpp"
#include "optlab/core/rng.hpp"
#include "optlab/optimizers.hpp"
#include "optlab/problems.hpp"
#include "optlab/smoothness.hpp"
#include "optlab/theory.hpp"

namespace optlab {

struct CheckOutcome {
  std::string name;
  bool passed = false;
  std::string detail;
};

namespace suite {

inline double uniform(Rng& rng, double lo, double hi) { return lo + (hi - lo) * rng.next_uniform(); }

inline ParamVector random_vector(Rng& rng, std::size_t d, double lo, double hi) {
  ParamVector v(d);
  for (auto& x : v) x = uniform(rng, lo, hi);
  return v;
}

inline std::string num(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.6g", x);
  return buf;
}

inline std::vector<Problem> packaged_problems() {
  LowerBoundSpec lb{1.0, 1.0, std::exp(2.0), 0.5, std::nullopt, 2.0};
  return {make_quadratic({1.0, 4.0, 0.5}), make_exp_separable({1.0, 0.5}),
          make_lower_bound_case1(lb), make_lower_bound_case2(lb)};
}

inline CheckOutcome norm_ordering(Rng& rng) {
  for (int i = 0; i < 1000; ++i) {
    const ParamVector v = random_vector(rng, 1 + i % 7, -5.0, 5.0);
    const double inf = norm(v, Norm::Inf), l2 = norm(v, Norm::L2), l1 = norm(v, Norm::L1);
    if (!(inf <= l2 * (1 + 1e-15) && l2 <= l1 * (1 + 1e-15))) {
      return {"norm_ordering", false, "violated at sample " + std::to_string(i)};
    }
  }
  return {"norm_ordering", true, "1000 vectors"};
}

inline CheckOutcome rng_reproducibility() {
  Rng a(0), b(0);
  const bool vector_ok = Rng(0).next_u64() == 0xE220A8397B1DCDAFULL;
  for (int i = 0; i < 1000; ++i) {
    const double u = a.next_uniform();
    if (u != b.next_uniform() || !(u >= 0.0 && u < 1.0)) return {"rng_reproducibility", false, "streams differ"};
  }
  return {"rng_reproducibility", vector_ok, vector_ok ? "seed 0 matches reference" : "reference mismatch"};
}

inline CheckOutcome signum_recovery(Rng& rng) {
  HyperParams hp;
  hp.eta = 0.01;
  hp.beta1 = 0.9;
  hp.beta2 = 0.0;
  const Problem p = make_quadratic(ParamVector(10, 1.0), {ParamVector(10, 1.0)});
  OptimizerState s = init_state(ParamVector(10, 1.0));
  for (int t = 0; t < 2000; ++t) {
    s = step(s, sample_stochastic_gradient(p, s.x, rng), hp);
    for (double u : s.update) {
      if (u != 0.0 && std::abs(u) != hp.eta) return {"signum_recovery", false, "update " + num(u)};
    }
  }
  return {"signum_recovery", true, "2000 steps, every update +-eta"};
}

inline CheckOutcome bounded_update(Rng& rng) {
  double worst = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    HyperParams hp;
    hp.beta1 = uniform(rng, 0.05, 0.999);
    const double root = uniform(rng, 0.0, hp.beta1 * 0.999);
    hp.beta2 = root * root;
    hp.eta = uniform(rng, 1e-3, 1.0);
    const std::size_t d = 1 + trial % 4;
    OptimizerState s = init_state(ParamVector::zeros(d));
    const double scale = std::pow(10.0, uniform(rng, -3.0, 3.0));
    for (int t = 0; t < 50; ++t) {
      s = step(s, scale * random_vector(rng, d, -1.0, 1.0), hp);
      for (std::size_t j = 0; j < d; ++j) {
        if (s.v[j] > 0.0) worst = std::max(worst, std::abs(s.m[j]) / std::sqrt(s.v[j]) * std::sqrt(1.0 - hp.beta2));
      }
    }
  }
  return {"bounded_update", worst <= 1.0 + 1e-12, "max |m|/sqrt(v) * sqrt(1-beta2) = " + num(worst)};
}

inline CheckOutcome moment_decomposition(Rng& rng) {
  double worst = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    HyperParams hp;
    hp.beta1 = uniform(rng, 0.0, 0.99);
    hp.beta2 = 0.0;
    std::vector<double> gs;
    OptimizerState s = init_state(ParamVector{0.0});
    const int steps = 1 + trial;
    for (int t = 0; t < steps; ++t) {
      gs.push_back(uniform(rng, -2.0, 2.0));
      s = step(s, ParamVector{gs.back()}, hp);
    }
    double direct = 0.0;
    for (int tau = 1; tau <= steps; ++tau) {
      direct += (1.0 - hp.beta1) * std::pow(hp.beta1, steps - tau) * gs[tau - 1];
    }
    const double scale = std::max(std::abs(direct), 1e-300);
    worst = std::max(worst, std::abs(s.m[0] - direct) / scale);
  }
  return {"moment_decomposition", worst <= 1e-10, "max relative error " + num(worst)};
}

inline CheckOutcome zero_gradient_fixed_point() {
  const ParamVector x{0.0, 0.0};
  std::vector<HyperParams> all(5);
  all[0].method = Method::GeneralizedSignSgd;
  all[1].method = Method::Adam;
  all[2].method = Method::SgdMomentum;
  all[3].method = Method::SgdMomentumNormalized;
  all[4].method = Method::SgdClip;
  all[4].clip_gamma = 1.0;
  const Problem p = make_quadratic({1.0, 2.0});
  for (const auto& hp : all) {
    const OptimizerState s = step(init_state(x), p.gradient(x), hp);
    if (!(s.x == x && s.m == ParamVector::zeros(2) && s.v == ParamVector::zeros(2))) {
      return {"zero_gradient_fixed_point", false, std::string(to_string(hp.method)) + " moved"};
    }
  }
  return {"zero_gradient_fixed_point", true, "all five methods"};
}

inline CheckOutcome clipping_noop(Rng& rng) {
  for (int trial = 0; trial < 500; ++trial) {
    HyperParams clip;
    clip.method = Method::SgdClip;
    clip.clip_nu = trial % 2;
    clip.beta1 = uniform(rng, 0.0, 0.95);
    clip.eta = uniform(rng, 0.01, 1.0);
    clip.clip_gamma = 1e6;
    const ParamVector g = random_vector(rng, 3, -5.0, 5.0);
    const OptimizerState a = step(init_state(ParamVector::zeros(3)), g, clip);
    const ParamVector m = (1.0 - clip.beta1) * g;
    const ParamVector& w = clip.clip_nu == 0 ? g : m;
    if (!(a.update == clip.eta * w)) return {"clipping_noop", false, "trial " + std::to_string(trial)};
  }
  return {"clipping_noop", true, "500 unclipped steps match"};
}

inline CheckOutcome gradient_consistency(Rng& rng) {
  double worst = 0.0;
  for (const Problem& p : packaged_problems()) {
    for (int i = 0; i < 100; ++i) {
      const ParamVector x = random_vector(rng, p.dim, -2.0, 2.0);
      const ParamVector fd = finite_difference_gradient(p, x, 1e-6);
      const ParamVector g = p.gradient(x);
      for (std::size_t j = 0; j < p.dim; ++j) {
        worst = std::max(worst, std::abs(fd[j] - g[j]) / std::max(1.0, std::abs(g[j])));
      }
    }
  }
  return {"gradient_consistency", worst <= 1e-5, "max relative error " + num(worst)};
}

inline CheckOutcome branch_continuity() {
  double worst = 0.0;
  for (double L0 : {0.5, 1.0, 3.0}) {
    for (double L1 : {0.25, 1.0, 2.0}) {
      const LowerBoundCase1 f{L0, L1};
      using B1 = LowerBoundCase1::Branch;
      for (double s : {-1.0, 1.0}) {
        const double x = s * f.boundary();
        const B1 outer = s < 0 ? B1::Left : B1::Right;
        worst = std::max({worst, std::abs(f.value(outer, x) - f.value(B1::Middle, x)),
                          std::abs(f.derivative(outer, x) - f.derivative(B1::Middle, x))});
      }
      const LowerBoundCase2 g{L0, 0.5 * L1};
      using B2 = LowerBoundCase2::Branch;
      for (double s : {-1.0, 1.0}) {
        const double x = s * g.boundary();
        const B2 outer = s < 0 ? B2::Left : B2::Right;
        worst = std::max({worst, std::abs(g.value(outer, x) - g.value(B2::Middle, x)),
                          std::abs(g.derivative(outer, x) - g.derivative(B2::Middle, x)),
                          std::abs(g.second_derivative(B2::Middle, x))});
      }
    }
  }
  return {"branch_continuity", worst <= 1e-12, "max branch mismatch " + num(worst)};
}

inline std::vector<double> grid(double lo, double hi, std::size_t n) {
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n - 1);
  return out;
}

inline CheckOutcome second_order_case1() {
  const Problem p = make_lower_bound_case1({1.0, 1.0, std::exp(2.0), 0.1});
  const double v = check_second_order(p, grid(-10.0, 10.0, 10000));
  return {"second_order_case1", v <= 1e-9, "max violation " + num(v)};
}

inline CheckOutcome second_order_case2() {
  const Problem p = make_lower_bound_case2({1.0, 1.0, std::exp(2.0), 0.5, 3.0});
  double worst = 0.0;
  for (double x : grid(-10.0, 10.0, 10000)) worst = std::max(worst, std::abs(p.second_derivative(x)) - 1.0);
  return {"second_order_case2", worst <= 1e-9, "max |f''| - L0 = " + num(worst)};
}

inline CheckOutcome noise_bound(Rng& rng) {
  const Problem p = make_quadratic({1.0, 2.0}, {ParamVector{0.5, 2.0}});
  const ParamVector x{0.3, -0.7};
  const ParamVector g0 = p.gradient(x);
  ParamVector mean = ParamVector::zeros(2);
  constexpr int n = 100000;
  for (int i = 0; i < n; ++i) {
    const ParamVector g = sample_stochastic_gradient(p, x, rng);
    for (std::size_t j = 0; j < 2; ++j) {
      if (std::abs(g[j] - g0[j]) > p.noise.sigma[j]) return {"noise_bound", false, "draw outside support"};
      mean[j] += g[j] / n;
    }
  }
  for (std::size_t j = 0; j < 2; ++j) {
    if (std::abs(mean[j] - g0[j]) > 3.0 * p.noise.sigma[j] / std::sqrt(3.0 * n)) {
      return {"noise_bound", false, "empirical mean off"};
    }
  }
  return {"noise_bound", true, "100000 draws inside support, mean within 3 sd"};
}

inline CheckOutcome quadratic_estimator_exact(Rng& rng) {
  const Problem p = make_quadratic({2.5});
  for (int i = 0; i < 100; ++i) {
    const ParamVector a = random_vector(rng, 1, -3.0, 3.0);
    const ParamVector b = random_vector(rng, 1, -3.0, 3.0);
    if (a == b) continue;
    const double L = estimate_global_smoothness(p, a, b).local_lipschitz;
    if (std::abs(L - 2.5) > 1e-9) return {"quadratic_estimator_exact", false, "L_hat " + num(L)};
  }
  return {"quadratic_estimator_exact", true, "L_hat equals curvature"};
}

inline CheckOutcome coordinate_symmetry(Rng& rng) {
  const Problem p = make_exp_separable({1.0, 2.0, 0.5});
  for (int i = 0; i < 200; ++i) {
    const ParamVector a = random_vector(rng, 3, -1.0, 1.0);
    const ParamVector b = random_vector(rng, 3, -1.0, 1.0);
    const auto fwd = estimate_coordinate_smoothness(p, a, b);
    const auto bwd = estimate_coordinate_smoothness(p, b, a);
    for (std::size_t k = 0; k < fwd.size(); ++k) {
      if (fwd[k].local_lipschitz != bwd[k].local_lipschitz || fwd[k].grad_magnitude != bwd[k].grad_magnitude) {
        return {"coordinate_symmetry", false, "asymmetric at pair " + std::to_string(i)};
      }
    }
  }
  return {"coordinate_symmetry", true, "200 swapped pairs"};
}

inline CheckOutcome fit_permutation(Rng& rng) {
  std::vector<SmoothnessSample> s;
  for (int i = 0; i < 100; ++i) {
    const double x = uniform(rng, 0.0, 10.0);
    s.push_back({x, 0.7 + 1.9 * x + uniform(rng, -0.1, 0.1), static_cast<std::size_t>(i), {}});
  }
  const L0L1Fit a = fit_l0l1(s);
  std::reverse(s.begin(), s.end());
  std::rotate(s.begin(), s.begin() + 37, s.end());
  const L0L1Fit b = fit_l0l1(s);
  const double diff = std::max(std::abs(a.L0_hat - b.L0_hat), std::abs(a.L1_hat - b.L1_hat));
  return {"fit_permutation", diff <= 1e-12, "coefficient change " + num(diff)};
}

inline CheckOutcome descent_lemma(Rng& rng) {
  std::size_t held = 0;
  std::size_t total = 0;
  for (const Problem& p : {make_exp_separable({1.0, 2.0}), make_quadratic({1.0, 3.0})}) {
    const double l1 = norm(p.smoothness.L1, Norm::Inf);
    const double radius = l1 > 0.0 ? 1.0 / l1 : 2.0;
    for (int i = 0; i < 1000; ++i) {
      const ParamVector x = random_vector(rng, p.dim, -2.0, 2.0);
      ParamVector dir = random_vector(rng, p.dim, -1.0, 1.0);
      const double n = norm(dir, Norm::L2);
      if (n == 0.0) continue;
      const ParamVector y = x + (radius * uniform(rng, 0.0, 1.0) / n) * dir;
      ++total;
      if (check_descent_lemma(p, x, y).satisfied) ++held;
    }
  }
  return {"descent_lemma", held == total, std::to_string(held) + "/" + std::to_string(total) + " pairs"};
}

inline CheckOutcome schedule_consistency(Rng& rng) {
  double worst = 0.0;
  for (int i = 0; i < 500; ++i) {
    const std::size_t d = 1 + i % 5;
    const SmoothnessSpec sm{random_vector(rng, d, 0.1, 5.0), random_vector(rng, d, 0.0, 2.0)};
    const NoiseSpec nz{random_vector(rng, d, 0.0, 3.0)};
    const double delta = uniform(rng, 0.1, 10.0);
    const auto T = static_cast<std::size_t>(uniform(rng, 1.0, 1e6));
    const TheorySchedule s = theoretical_hyperparams(delta, sm, nz, T, 0.0, 0.01, d);
    const double lhs = s.eta * std::sqrt(static_cast<double>(T)) * std::sqrt(norm(sm.L0, Norm::L1));
    worst = std::max({worst, std::abs(s.beta1 - (1.0 - s.alpha)),
                      std::abs(lhs - std::sqrt(delta * s.alpha)) / std::sqrt(delta * s.alpha)});
  }
  return {"schedule_consistency", worst <= 1e-12, "max identity error " + num(worst)};
}

inline CheckOutcome regime_switch() {
  const SmoothnessSpec sm{{1.0}, {1.0}};
  const TheorySchedule at = theoretical_hyperparams(1.0, sm, {{0.1}}, 100, 0.0, 0.01, 1);
  const TheorySchedule above = theoretical_hyperparams(1.0, sm, {{0.1 * (1 + 1e-9)}}, 100, 0.0, 0.01, 1);
  const bool ok = at.alpha == 1.0 && at.beta1 == 0.0 && above.alpha < 1.0;
  return {"regime_switch", ok, "alpha at boundary " + num(at.alpha) + ", just above " + num(above.alpha)};
}

inline CheckOutcome d_positivity(Rng& rng) {
  std::size_t checked = 0;
  for (int i = 0; i < 2000 && checked < 200; ++i) {
    const std::size_t d = 1 + i % 3;
    const SmoothnessSpec sm{random_vector(rng, d, 0.5, 5.0), random_vector(rng, d, 0.0, 0.3)};
    const NoiseSpec nz{random_vector(rng, d, 0.1, 3.0)};
    const double beta2 = uniform(rng, 0.0, 0.5);
    const double delta = uniform(rng, 0.1, 2.0);
    const auto T = static_cast<std::size_t>(std::pow(10.0, uniform(rng, 2.0, 9.0)));
    TheorySchedule s;
    try {
      s = theoretical_hyperparams(delta, sm, nz, T, beta2, 0.01, d);
    } catch (const Error&) {
      continue;
    }
    if (!s.T_condition_met || s.beta1 == 0.0) continue;
    const TheoryConstants c = compute_theory_constants(s.hyper_params(), sm, nz, ParamVector(d, 1.0), 0.01, d);
    ++checked;
    if (c.D < 0.5) return {"D_positivity", false, "D = " + num(c.D)};
  }
  return {"D_positivity", checked > 0, std::to_string(checked) + " configs with D >= 1/2"};
}

inline CheckOutcome tau_bar_scaling() {
  HyperParams hp;
  hp.eta = 0.01;
  hp.beta1 = 0.9;
  hp.beta2 = 0.25;
  const SmoothnessSpec sm{{1.0, 1.0}, {0.5, 2.0}};
  const NoiseSpec nz{{0.1, 0.1}};
  const ParamVector M{1.0, 1.0};
  const double base = compute_theory_constants(hp, sm, nz, M, 0.01, 2).tau_bar;
  HyperParams hp2 = hp;
  hp2.eta *= 2.0;
  const double half_eta = compute_theory_constants(hp2, sm, nz, M, 0.01, 2).tau_bar;
  const double half_l1 = compute_theory_constants(hp, {sm.L0, 2.0 * sm.L1}, nz, M, 0.01, 2).tau_bar;
  const double err = std::max(std::abs(half_eta * 2.0 - base), std::abs(half_l1 * 2.0 - base)) / base;
  return {"tau_bar_scaling", err <= 1e-12, "relative error " + num(err)};
}

/// GD on the case-1 construction with eta above the threshold must grow and
/// alternate at every step until the iterate leaves the double range.
inline CheckOutcome gd_divergence() {
  const LowerBoundSpec spec{1.0, 1.0, std::exp(2.0), 0.1};
  const Problem p = make_lower_bound_case1(spec);
  const OscillationReport r = gd_oscillation(p, (*p.default_start)[0], 0.9, 100);
  const bool ok = !r.violation_step && (r.overflow_step || r.verified_steps == 100);
  std::string detail = std::to_string(r.verified_steps) + " growing sign flips";
  if (r.overflow_step) detail += ", overflow at step " + std::to_string(*r.overflow_step);
  return {"gd_divergence", ok, detail};
}

inline CheckOutcome determinism() {
  const Problem p = make_quadratic(ParamVector(4, 1.0), {ParamVector(4, 0.5)});
  HyperParams hp;
  hp.beta2 = 0.5;
  auto run = [&] { return run_optimizer(p, ParamVector(4, 1.0), hp, 500, 42, true); };
  const Trajectory a = run();
  const Trajectory b = run();
  bool same = a.records.size() == b.records.size();
  for (std::size_t i = 0; same && i < a.records.size(); ++i) {
    same = a.records[i].f_value == b.records[i].f_value && a.records[i].x_snapshot == b.records[i].x_snapshot;
  }
  return {"determinism", same, "two seeded runs compared"};
}

}  // namespace suite

/// Every invariant the library promises, checked on seeded random inputs.
inline std::vector<CheckOutcome> run_invariant_suite(std::uint64_t seed = 20230601) {
  Rng rng(seed);
  using namespace suite;
  std::vector<std::function<CheckOutcome()>> checks{
      [&] { return norm_ordering(rng); },
      [] { return rng_reproducibility(); },
      [&] { return signum_recovery(rng); },
      [&] { return bounded_update(rng); },
      [&] { return moment_decomposition(rng); },
      [] { return zero_gradient_fixed_point(); },
      [&] { return clipping_noop(rng); },
      [&] { return gradient_consistency(rng); },
      [] { return branch_continuity(); },
      [] { return second_order_case1(); },
      [] { return second_order_case2(); },
      [&] { return noise_bound(rng); },
      [&] { return quadratic_estimator_exact(rng); },
      [&] { return coordinate_symmetry(rng); },
      [&] { return fit_permutation(rng); },
      [&] { return descent_lemma(rng); },
      [&] { return schedule_consistency(rng); },
      [] { return regime_switch(); },
      [&] { return d_positivity(rng); },
      [] { return tau_bar_scaling(); },
      [] { return gd_divergence(); },
      [] { return determinism(); },
  };
  std::vector<CheckOutcome> out;
  for (auto& check : checks) {
    try {
      out.push_back(check());
    } catch (const std::exception& e) {
      out.push_back({"(exception)", false, e.what()});
    }
  }
  return out;
}

}  // namespace optlab
