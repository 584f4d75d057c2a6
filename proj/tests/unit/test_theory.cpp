#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <numbers>
#include <vector>

#include "optlab/core/rng.hpp"
#include "optlab/theory.hpp"

using namespace optlab;

namespace {

template <typename F>
ErrorCode code_of(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error raised";
  return ErrorCode::Io;
}

const double kE2 = std::exp(2.0);

std::vector<double> grid(double lo, double hi, int n) {
  std::vector<double> g(n);
  for (int i = 0; i < n; ++i) g[i] = lo + (hi - lo) * i / (n - 1);
  return g;
}

HyperParams gsgd(double eta, double beta1, double beta2) {
  HyperParams hp;
  hp.eta = eta;
  hp.beta1 = beta1;
  hp.beta2 = beta2;
  return hp;
}

}  // namespace

TEST(Schedule, WorkedExample) {
  const TheorySchedule s = theoretical_hyperparams(1.0, {{1.0}, {0.0}}, {{10.0}}, 100, 0.0, 0.01, 1);
  EXPECT_NEAR(s.alpha, 0.01, 1e-12);
  EXPECT_NEAR(s.beta1, 0.99, 1e-12);
  EXPECT_NEAR(s.eta, 0.01, 1e-12);
  EXPECT_EQ(s.rho, 1.0);
  EXPECT_TRUE(s.T_condition_met);
  EXPECT_EQ(s.T_required, 0.0);
}

TEST(Schedule, SignSgdRegime) {
  const TheorySchedule s = theoretical_hyperparams(4.0, {{1.0, 1.0}, {0.0, 0.0}}, {{0.05, 0.05}}, 16, 0.0, 0.01, 2);
  EXPECT_EQ(s.alpha, 1.0);
  EXPECT_EQ(s.beta1, 0.0);
  EXPECT_EQ(s.rho, 1.0);
  EXPECT_DOUBLE_EQ(s.eta, std::sqrt(4.0) / (std::sqrt(2.0) * 4.0));
}

TEST(Schedule, RegimeSwitchIsExact) {
  // sigma sqrt(T) = sqrt(L0 Delta) exactly when sigma = 0.25, T = 16, L0 = Delta = 1.
  const SmoothnessSpec sm{{1.0}, {1.0}};
  EXPECT_EQ(theoretical_hyperparams(1.0, sm, {{0.25}}, 16, 0.0, 0.01, 1).alpha, 1.0);
  EXPECT_LT(theoretical_hyperparams(1.0, sm, {{std::nextafter(0.25, 1.0)}}, 16, 0.0, 0.01, 1).alpha, 1.0);
}

TEST(Schedule, TRequiredFormula) {
  const double d = 2, delta = 1.5, l0 = 3.0, l1 = 0.5, sig = 4.0, b2 = 0.01;
  const TheorySchedule s =
      theoretical_hyperparams(delta, {{1.0, 2.0}, {0.5, 0.25}}, {{1.0, 3.0}}, 1000, b2, 0.01, 2);
  const double rho = 1.0 - std::sqrt(b2) / s.beta1;
  const double first = 100 * d * delta * l1 * l1 / ((1 - b2) * rho * rho * l0);
  const double second =
      1e4 * d * d * delta * sig * sig * std::pow(l1, 4) / ((1 - b2) * (1 - b2) * std::pow(rho, 4) * std::pow(l0, 3));
  EXPECT_DOUBLE_EQ(s.T_required, std::max(first, second));
  EXPECT_EQ(s.T_condition_met, 1000.0 >= s.T_required);
}

TEST(Schedule, Errors) {
  EXPECT_EQ(code_of([] { theoretical_hyperparams(1.0, {{0.0}, {0.0}}, {{1.0}}, 10, 0.0, 0.01, 1); }),
            ErrorCode::DivisionByZero);
  // alpha = 1 forces beta1 = 0, which only admits beta2 = 0.
  EXPECT_EQ(code_of([] { theoretical_hyperparams(1.0, {{1.0}, {0.0}}, {{0.0}}, 10, 0.5, 0.01, 1); }),
            ErrorCode::InvalidBeta2);
}

TEST(Rho, Cases) {
  EXPECT_EQ(momentum_ratio_rho(0.0, 0.0), 1.0);
  EXPECT_DOUBLE_EQ(momentum_ratio_rho(0.9, 0.25), 1.0 - 0.5 / 0.9);
  EXPECT_EQ(code_of([] { momentum_ratio_rho(0.5, 0.25); }), ErrorCode::InvalidBeta2);
  EXPECT_EQ(code_of([] { momentum_ratio_rho(0.0, 0.1); }), ErrorCode::InvalidBeta2);
}

TEST(Constants, WorkedExample) {
  const TheoryConstants c = compute_theory_constants(gsgd(0.01, 0.9, 0.0), {{1.0}, {1.0}}, {{0.0}}, {1.0}, 0.01, 1);
  EXPECT_NEAR(c.tau_bar, 100.0, 1e-12);
  EXPECT_NEAR(c.D, 0.8, 1e-12);
  EXPECT_NEAR(c.A, 0.1, 1e-12);
  EXPECT_NEAR(c.C[0], 1.1, 1e-12);
}

TEST(Constants, VanishingL1Limit) {
  const TheoryConstants c = compute_theory_constants(gsgd(0.01, 0.9, 0.0), {{1.0, 2.0}, {0.0, 0.0}}, {{0.5, 0.5}},
                                                     {3.0, 3.0}, 0.01, 2);
  EXPECT_TRUE(c.tau_bar_unbounded());
  EXPECT_EQ(c.D, 1.0);
  EXPECT_EQ(c.C, (ParamVector{1.0, 1.0}));
  const double log_term = std::log(100.0);
  const double E = 6 * 0.5 * log_term + 6 / std::sqrt(1 - 0.81) * std::sqrt(0.25 * log_term);
  EXPECT_DOUBLE_EQ(c.E[0], E);
  EXPECT_DOUBLE_EQ(c.B[1], 0.01 * 2.0 / 0.1 + 0.1 * E);
}

TEST(Constants, BUsesDecayOverTauBar) {
  const TheoryConstants c = compute_theory_constants(gsgd(0.1, 0.5, 0.0), {{1.0}, {2.0}}, {{0.0}}, {4.0}, 0.5, 1);
  EXPECT_DOUBLE_EQ(c.tau_bar, 5.0);
  EXPECT_DOUBLE_EQ(c.B[0], 0.1 / 0.5 + std::pow(0.5, 5.0) * 4.0);
}

TEST(Constants, Errors) {
  EXPECT_EQ(code_of([] { compute_theory_constants(gsgd(0.1, 0.0, 0.0), {{1.0}, {0.0}}, {{0.0}}, {1.0}, 0.1, 1); }),
            ErrorCode::InvalidRegime);
  EXPECT_EQ(code_of([] { compute_theory_constants(gsgd(0.1, 0.5, 0.3), {{1.0}, {0.0}}, {{0.0}}, {1.0}, 0.1, 1); }),
            ErrorCode::InvalidRegime);
}

TEST(Constants, DAtLeastFourFifthsWhenTConditionHolds) {
  Rng rng(8);
  int checked = 0;
  for (int i = 0; i < 3000 && checked < 300; ++i) {
    const std::size_t d = 1 + i % 3;
    ParamVector L0(d), L1(d), sig(d);
    for (std::size_t j = 0; j < d; ++j) {
      L0[j] = 0.5 + 4 * rng.next_uniform();
      L1[j] = 0.3 * rng.next_uniform();
      sig[j] = 0.1 + 3 * rng.next_uniform();
    }
    const double b2 = 0.5 * rng.next_uniform();
    const auto T = static_cast<std::size_t>(std::pow(10.0, 2 + 7 * rng.next_uniform()));
    TheorySchedule s;
    try {
      s = theoretical_hyperparams(0.1 + 2 * rng.next_uniform(), {L0, L1}, {sig}, T, b2, 0.01, d);
    } catch (const Error&) {
      continue;
    }
    if (!s.T_condition_met || s.beta1 == 0.0) continue;
    ++checked;
    EXPECT_GE(compute_theory_constants(s.hyper_params(), {L0, L1}, {sig}, ParamVector(d, 1.0), 0.01, d).D,
              0.8 - 1e-12);
  }
  EXPECT_GT(checked, 50);
}

TEST(LowerBoundIterations, WorkedExample) {
  const LowerBoundSpec spec{1.0, 1.0, kE2, 0.1};
  const double oracle = kE2 * (1.0 - 0.009375) / (0.02 * 3.0);
  EXPECT_NEAR(oracle, 121.99639496671956, 1e-10);
  EXPECT_NEAR(gd_lower_bound_iterations(spec, 1.0), oracle, 1e-10);
  EXPECT_EQ(gd_lower_bound_iterations(spec, 15.0 * 0.1 * 0.1 / 16.0), 0.0);
  EXPECT_EQ(code_of([&] { gd_lower_bound_iterations(spec, 0.001); }), ErrorCode::SpecViolation);
}

TEST(LowerBoundIterations, DoublingM) {
  const LowerBoundSpec a{1.0, 1.0, 1e4, 0.1};
  const LowerBoundSpec b{1.0, 1.0, 2e4, 0.1};
  const double ratio = gd_lower_bound_iterations(b, 1.0) / gd_lower_bound_iterations(a, 1.0);
  EXPECT_NEAR(ratio, 2.0 * (std::log(1e4) + 1) / (std::log(2e4) + 1), 1e-12);
  EXPECT_GT(ratio, 1.0);
}

TEST(DescentLemma, QuadraticOneDimIsTight) {
  const Problem p = make_quadratic({2.0});
  const DescentReport r = check_descent_lemma(p, {1.0}, {-3.0});
  EXPECT_TRUE(r.satisfied);
  EXPECT_NEAR(r.rhs - r.lhs, 0.0, 1e-12);
}

TEST(DescentLemma, ZeroDisplacement) {
  const Problem p = make_exp_separable({1.0});
  const DescentReport r = check_descent_lemma(p, {0.3}, {0.3});
  EXPECT_EQ(r.lhs, r.rhs);
  EXPECT_TRUE(r.satisfied);
}

TEST(DescentLemma, RadiusGuard) {
  const Problem p = make_exp_separable({1.0});
  EXPECT_EQ(code_of([&] { check_descent_lemma(p, {0.0}, {1.0}); }), ErrorCode::RadiusExceeded);
}

TEST(DescentLemma, ExpSeparablePairs) {
  const Problem p = make_exp_separable({1.0});
  const double radius = 1.0 / p.smoothness.L1[0];
  Rng rng(21);
  for (int i = 0; i < 1000; ++i) {
    const double x = 6 * rng.next_uniform() - 3;
    const double y = x + radius * (2 * rng.next_uniform() - 1);
    ASSERT_TRUE(check_descent_lemma(p, {x}, {y}).satisfied) << x << " " << y;
  }
}

TEST(DescentLemma, RawExponentRateIsTooSmallForForwardSteps) {
  // With L1 = a the inequality e^u <= 1 + u + u^2/2 fails for any u > 0.
  Problem p = make_exp_separable({1.0});
  p.smoothness.L1 = {1.0};
  p.smoothness.L0 = {0.0};
  EXPECT_FALSE(check_descent_lemma(p, {0.0}, {0.9}).satisfied);
}

TEST(UpdateBound, SignumRatioIsOne) {
  const Problem p = make_quadratic({1.0, 2.0}, {ParamVector{1.0, 1.0}});
  const HyperParams hp = gsgd(0.01, 0.9, 0.0);
  EXPECT_EQ(check_update_bound(run_optimizer(p, {1.0, 1.0}, hp, 500, 1, true), hp), 1.0);
}

TEST(UpdateBound, RandomSequencesStayBelowOne) {
  const Problem p = make_quadratic({1.0}, {ParamVector{5.0}});
  for (std::uint64_t seed = 0; seed < 1000; ++seed) {
    const HyperParams hp = gsgd(0.01, 0.9, 0.5);
    ASSERT_LE(check_update_bound(run_optimizer(p, {1.0}, hp, 30, seed, true), hp), 1.0 + 1e-12);
  }
}

TEST(UpdateBound, WrongMethod) {
  HyperParams adam = gsgd(0.01, 0.9, 0.999);
  adam.method = Method::Adam;
  const Trajectory t = run_optimizer(make_quadratic({1.0}), {1.0}, adam, 5, 0, false);
  EXPECT_EQ(code_of([&] { check_update_bound(t, adam); }), ErrorCode::WrongMethod);
}

TEST(SecondOrder, Case1OnGrid) {
  const Problem p = make_lower_bound_case1({1.0, 1.0, kE2, 0.1});
  EXPECT_LE(check_second_order(p, grid(-10, 10, 10000)), 1e-9);
  const Problem q = make_lower_bound_case1({2.0, 0.5, 10.0, 0.1});
  EXPECT_LE(check_second_order(q, grid(-20, 20, 10000)), 1e-9);
}

TEST(SecondOrder, Case2AndQuadratic) {
  const Problem p = make_lower_bound_case2({1.0, 1.0, kE2, 0.5, 3.0});
  EXPECT_LE(check_second_order(p, grid(-10, 10, 10000)), 1e-9);
  EXPECT_LE(check_second_order(make_quadratic({3.0}), grid(-5, 5, 101)), 0.0);
  EXPECT_EQ(code_of([] { check_second_order(make_quadratic({1.0, 1.0}), grid(0, 1, 3)); }),
            ErrorCode::NoSecondDerivative);
}

TEST(Oscillation, GdOnCase1GrowsAndAlternatesUntilOverflow) {
  const Problem p = make_lower_bound_case1({1.0, 1.0, kE2, 0.1});
  const OscillationReport r = gd_oscillation(p, 3.0, 0.9, 100);
  EXPECT_FALSE(r.violation_step.has_value());
  ASSERT_TRUE(r.overflow_step.has_value());
  EXPECT_EQ(r.verified_steps + 1, *r.overflow_step);
}

TEST(Oscillation, BelowThresholdDoesNotOscillate) {
  const Problem p = make_lower_bound_case1({1.0, 1.0, kE2, 0.1});
  const OscillationReport r = gd_oscillation(p, 3.0, 0.5, 100);
  EXPECT_TRUE(r.violation_step.has_value());
}
