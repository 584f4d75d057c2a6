#pragma once

#include <chrono>
#include <cmath>
#include <filesystem>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "optlab/harness/config.hpp"
#include "optlab/harness/io.hpp"
#include "optlab/optimizers.hpp"
#include "optlab/problems.hpp"
#include "optlab/smoothness.hpp"
#include "optlab/theory.hpp"

namespace optlab::harness {

struct InvariantOutcome {
  std::string status;  // "pass", "fail" or "skip"
  double value = 0.0;
};

struct SummaryRecord {
  double min_grad_l1 = std::numeric_limits<double>::infinity();
  std::size_t argmin_t = 0;
  double final_f = 0.0;
  bool diverged = false;
  std::optional<std::size_t> diverged_at;
  std::size_t steps_taken = 0;
  double wallclock_seconds = 0.0;
  json config_echo;
  std::map<std::string, InvariantOutcome> invariant_report;
  std::optional<TheorySchedule> schedule;
  std::optional<TheoryConstants> constants;
};

inline json schedule_json(const TheorySchedule& s) {
  return {{"alpha", s.alpha},     {"beta1", s.beta1},           {"beta2", s.beta2},
          {"eta", s.eta},         {"T", s.T},                   {"Delta", s.Delta},
          {"rho", s.rho},         {"T_required", json_real(s.T_required)},
          {"T_condition_met", s.T_condition_met}};
}

inline json constants_json(const TheoryConstants& c) {
  json out{{"tau_bar", c.tau_bar_unbounded() ? json("unbounded") : json(c.tau_bar)},
           {"rho", c.rho},
           {"E", json_vector(c.E)},
           {"B", json_vector(c.B)},
           {"C", json_vector(c.C)},
           {"D", json_real(c.D)},
           {"A", json_real(c.A)},
           {"M", json_vector(c.M)}};
  if (c.epsilon_t) out["epsilon_t"] = json_vector(*c.epsilon_t);
  return out;
}

inline json to_json(const SummaryRecord& s) {
  json report = json::object();
  for (const auto& [name, outcome] : s.invariant_report) {
    report[name] = {{"status", outcome.status}, {"value", json_real(outcome.value)}};
  }
  json out{{"min_grad_l1", json_real(s.min_grad_l1)},
           {"argmin_t", s.argmin_t},
           {"final_f", json_real(s.final_f)},
           {"diverged", s.diverged},
           {"diverged_at", s.diverged_at ? json(*s.diverged_at) : json(nullptr)},
           {"steps_taken", s.steps_taken},
           {"wallclock_seconds", s.wallclock_seconds},
           {"config", s.config_echo},
           {"invariant_report", report}};
  if (s.schedule) out["schedule"] = schedule_json(*s.schedule);
  if (s.constants) out["theory_constants"] = constants_json(*s.constants);
  return out;
}

/// What a config turns into once defaults and the theory schedule are applied.
struct ResolvedRun {
  Problem problem;
  ParamVector x1;
  HyperParams hp;
  std::optional<TheorySchedule> schedule;
};

inline ResolvedRun resolve(const ExperimentConfig& cfg) {
  ResolvedRun run{build_problem(cfg.problem), {}, cfg.optimizer, std::nullopt};
  run.x1 = start_point(cfg, run.problem);
  if (cfg.theory_mode) {
    const double delta = cfg.Delta.value_or(run.problem.value(run.x1) - run.problem.f_star);
    TheorySchedule s = theoretical_hyperparams(delta, run.problem.smoothness, run.problem.noise, cfg.T,
                                               cfg.optimizer.beta2, cfg.delta_prob, run.problem.dim);
    run.hp.eta = s.eta;
    run.hp.beta1 = s.beta1;
    run.hp.beta2 = s.beta2;
    run.hp.validate_theory_regime();
    run.schedule = s;
  }
  return run;
}

struct ExperimentResult {
  SummaryRecord summary;
  Trajectory trajectory;
  std::vector<SmoothnessSample> smoothness;
};

struct ExecuteOptions {
  /// Overrides the config's smoothness stride.
  std::optional<std::size_t> smoothness_stride;
  /// Also collect norm-based (global) samples.
  bool global_samples = false;
};

/// Runs one experiment in memory. Divergence (non-finite iterate or
/// |F| > 1e12) ends the run early and is reported, not thrown.
inline ExperimentResult execute(const ExperimentConfig& cfg, const ExecuteOptions& options = {}) {
  const auto started = std::chrono::steady_clock::now();
  ResolvedRun run = resolve(cfg);

  ExperimentResult result;
  RunOptions ro;
  ro.log_stride = cfg.log_stride;
  ro.snapshots = cfg.snapshots;
  ro.stop_on_divergence = true;
  const auto stride = options.smoothness_stride ? options.smoothness_stride : cfg.smoothness_stride;
  if (stride) {
    ro.on_step = [&](std::size_t t, const ParamVector& x_t, const ParamVector& x_next) {
      if ((t - 1) % *stride != 0 || x_t == x_next) return;
      if (options.global_samples) {
        result.smoothness.push_back(
            estimate_global_smoothness(run.problem, x_t, x_next, default_sample_locations(), t));
      }
      auto coords = estimate_coordinate_smoothness(run.problem, x_t, x_next, t);
      result.smoothness.insert(result.smoothness.end(), coords.begin(), coords.end());
    };
  }
  result.trajectory = run_optimizer(run.problem, run.x1, run.hp, cfg.T, cfg.seed, cfg.noise_on, ro);
  const Trajectory& traj = result.trajectory;

  SummaryRecord& s = result.summary;
  for (const auto& rec : traj.records) {
    if (rec.grad_l1 < s.min_grad_l1) {
      s.min_grad_l1 = rec.grad_l1;
      s.argmin_t = rec.t;
    }
  }
  s.final_f = traj.final_state.x.all_finite() ? run.problem.value(traj.final_state.x)
                                              : std::numeric_limits<double>::infinity();
  s.diverged = traj.diverged;
  s.diverged_at = traj.diverged_at;
  s.steps_taken = traj.steps_taken;
  ExperimentConfig echo = cfg;
  echo.optimizer = run.hp;
  echo.x1 = run.x1;
  if (run.schedule) echo.Delta = run.schedule->Delta;
  s.config_echo = to_json(echo);
  s.schedule = run.schedule;

  auto verdict = [](bool ok) { return std::string(ok ? "pass" : "fail"); };
  s.invariant_report["finite_iterates"] = {verdict(!traj.diverged),
                                           static_cast<double>(traj.diverged_at.value_or(0))};
  if (cfg.noise_on) {
    s.invariant_report["noise_bound"] = {verdict(traj.max_noise_excess <= 1e-12), traj.max_noise_excess};
  }
  if (run.hp.method == Method::GeneralizedSignSgd &&
      run.hp.second_moment_source == SecondMomentSource::Momentum) {
    const double ratio = check_update_bound(traj, run.hp);
    s.invariant_report["update_bound"] = {verdict(ratio <= 1.0 + 1e-12), ratio};
  }
  if (run.schedule && run.hp.beta1 > 0.0 && run.problem.gradient) {
    const ParamVector M = cfg.gradient_bound.value_or(traj.grad_abs_max);
    TheoryConstants c = compute_theory_constants(run.hp, run.problem.smoothness, run.problem.noise, M,
                                                 cfg.delta_prob, run.problem.dim);
    if (traj.final_state.x.all_finite()) {
      c = with_momentum_error(std::move(c), traj.final_state.m,
                              run.problem.gradient(traj.final_state.x));
    }
    s.invariant_report["D_at_least_half"] =
        run.schedule->T_condition_met ? InvariantOutcome{verdict(c.D >= 0.5), c.D}
                                      : InvariantOutcome{"skip", c.D};
    s.constants = std::move(c);
  }

  s.wallclock_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return result;
}

inline void write_outputs(const ExperimentResult& result, const std::filesystem::path& dir,
                          bool write_smoothness) {
  write_file(dir / "trajectory.csv", trajectory_csv(result.trajectory.records));
  write_file(dir / "summary.json", to_json(result.summary).dump(2) + "\n");
  if (write_smoothness) write_file(dir / "smoothness.csv", smoothness_csv(result.smoothness));
}

/// Runs the experiment and writes trajectory.csv, summary.json and, when a
/// smoothness stride is set, smoothness.csv into the output directory.
inline SummaryRecord run_experiment(const ExperimentConfig& cfg) {
  ExperimentResult result = execute(cfg);
  write_outputs(result, resolve_output_dir(cfg), cfg.smoothness_stride.has_value());
  return result.summary;
}

struct EstimateReport {
  std::vector<SmoothnessSample> samples;
  std::optional<L0L1Fit> global_fit;
  std::optional<L0L1Fit> coordinate_fit;
  std::map<std::size_t, std::optional<L0L1Fit>> per_coordinate;
  SummaryRecord summary;
};

inline std::optional<L0L1Fit> try_fit(const std::vector<SmoothnessSample>& samples) {
  try {
    return fit_l0l1(samples);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::DegenerateDesign) throw;
    return std::nullopt;
  }
}

inline json fit_json(const std::optional<L0L1Fit>& fit) {
  if (!fit) return nullptr;
  return {{"L0_hat", json_real(fit->L0_hat)},
          {"L1_hat", json_real(fit->L1_hat)},
          {"residual_rms", json_real(fit->residual_rms)},
          {"n_samples", fit->n_samples}};
}

/// Runs a trajectory, samples both smoothness estimators every stride steps
/// (default 1) and regresses (L0, L1). Writes the run outputs plus
/// smoothness.csv and fit.json.
inline EstimateReport run_estimate(const ExperimentConfig& cfg) {
  ExecuteOptions options;
  options.smoothness_stride = cfg.smoothness_stride.value_or(1);
  options.global_samples = true;
  ExperimentResult result = execute(cfg, options);

  EstimateReport report;
  report.samples = result.smoothness;
  report.summary = result.summary;
  std::vector<SmoothnessSample> global;
  std::vector<SmoothnessSample> coordinate;
  std::map<std::size_t, std::vector<SmoothnessSample>> by_coordinate;
  for (const auto& s : result.smoothness) {
    if (s.coordinate) {
      coordinate.push_back(s);
      by_coordinate[*s.coordinate].push_back(s);
    } else {
      global.push_back(s);
    }
  }
  report.global_fit = try_fit(global);
  report.coordinate_fit = try_fit(coordinate);
  for (const auto& [j, samples] : by_coordinate) report.per_coordinate[j] = try_fit(samples);

  const auto dir = resolve_output_dir(cfg);
  write_outputs(result, dir, true);
  json per = json::array();
  for (const auto& [j, fit] : report.per_coordinate) per.push_back({{"j", j}, {"fit", fit_json(fit)}});
  json fits{{"global", fit_json(report.global_fit)},
            {"coordinate", fit_json(report.coordinate_fit)},
            {"per_coordinate", per}};
  write_file(dir / "fit.json", fits.dump(2) + "\n");
  return report;
}

}  // namespace optlab::harness
