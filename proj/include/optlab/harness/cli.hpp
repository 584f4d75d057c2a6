#pragma once

#include <cmath>
#include <cstdint>
#include <iostream>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "optlab/error.hpp"
#include "optlab/harness/config.hpp"
#include "optlab/harness/experiment.hpp"
#include "optlab/harness/io.hpp"
#include "optlab/harness/sweep.hpp"
#include "optlab/invariants.hpp"
#include "optlab/theory.hpp"

namespace optlab::harness {

/// Comma-separated scalars; each token is read as JSON when it parses and as
/// a bare string otherwise (so `--values adam,sgd_clip` works).
inline std::vector<json> parse_value_list(const std::string& text) {
  std::vector<json> out;
  std::stringstream ss(text);
  std::string token;
  while (std::getline(ss, token, ',')) {
    if (token.empty()) continue;
    json v = json::parse(token, nullptr, false);
    out.push_back(v.is_discarded() ? json(token) : v);
  }
  return out;
}

inline std::vector<std::uint64_t> parse_seed_list(const std::string& text) {
  std::vector<std::uint64_t> out;
  std::stringstream ss(text);
  std::string token;
  while (std::getline(ss, token, ',')) {
    if (token.empty()) continue;
    std::size_t used = 0;
    unsigned long long v = 0;
    try {
      v = std::stoull(token, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != token.size()) throw CLI::ValidationError("--seeds", "not an integer: " + token);
    out.push_back(v);
  }
  return out;
}

/// First step t <= max_steps at which |F'(x_t)| <= tol along a noise-free
/// run, if any.
inline std::optional<std::size_t> first_step_below(const Problem& problem, double x0,
                                                   const HyperParams& hp, std::size_t max_steps,
                                                   double tol) {
  OptimizerState s = init_state(ParamVector{x0});
  for (std::size_t t = 1; t <= max_steps; ++t) {
    const ParamVector g = problem.gradient(s.x);
    if (std::abs(g[0]) <= tol) return t;
    s = step(s, g, hp);
  }
  return std::nullopt;
}

struct LowerBoundArgs {
  LowerBoundSpec spec{1.0, 1.0, std::exp(2.0), 0.1};
  double gap = 1.0;
  std::optional<double> gd_eta;
  double eta = 0.01;
  double beta1 = 0.9;
  std::size_t steps = 100;
  std::size_t budget = 400;
};

inline int lowerbound_command(const LowerBoundArgs& a, std::ostream& out) {
  a.spec.validate();
  const double eta_star = a.spec.gd_divergence_threshold();
  const double bound = gd_lower_bound_iterations(a.spec, a.gap);
  out << "eta_star " << format_real(eta_star) << '\n';
  out << "iteration_bound " << format_real(bound) << '\n';

  const Problem p = make_lower_bound_case1(a.spec);
  const double x0 = a.spec.x0.value_or(a.spec.case1_default_start());
  const double gd_eta = a.gd_eta.value_or(1.1 * eta_star);
  const OscillationReport r = gd_oscillation(p, x0, gd_eta, a.steps);
  out << "gd eta " << format_real(gd_eta) << " x0 " << format_real(x0) << ": " << r.verified_steps
      << " growing sign flips";
  if (r.overflow_step) out << ", overflow at step " << *r.overflow_step;
  if (r.violation_step) out << ", oscillation broke at step " << *r.violation_step;
  out << '\n';

  HyperParams hp;
  hp.eta = a.eta;
  hp.beta1 = a.beta1;
  hp.beta2 = 0.0;
  const auto hit = first_step_below(p, x0, hp, a.budget, a.spec.eps);
  out << "sign momentum eta " << format_real(a.eta) << " beta1 " << format_real(a.beta1) << ": ";
  if (hit) {
    out << "|f'| <= " << format_real(a.spec.eps) << " at step " << *hit << '\n';
  } else {
    out << "|f'| > " << format_real(a.spec.eps) << " for all " << a.budget << " steps\n";
  }
  return 0;
}

inline int check_command(std::ostream& out) {
  const auto results = run_invariant_suite();
  bool all = true;
  for (const auto& r : results) {
    out << (r.passed ? "PASS " : "FAIL ") << r.name << "  " << r.detail << '\n';
    all = all && r.passed;
  }
  out << (all ? "all checks passed" : "some checks failed") << '\n';
  return all ? 0 : 1;
}

/// Entry point for the optlab tool. Returns 0 on success, 1 on a runtime
/// error and 2 on a usage error.
inline int cli_main(int argc, const char* const* argv, std::ostream& out = std::cout,
                    std::ostream& err = std::cerr) {
  CLI::App app{"optlab: sign-based momentum optimizers under (L0,L1) smoothness", "optlab"};
  app.require_subcommand(1);

  std::string config_path;
  std::string output_dir;

  auto* run = app.add_subcommand("run", "run one experiment");
  run->add_option("config", config_path, "experiment config (JSON)")->required();
  run->add_option("--output-dir", output_dir, "output directory");

  std::string axis;
  std::string values;
  std::string seeds;
  unsigned jobs = 1;
  auto* sweep = app.add_subcommand("sweep", "run a one-axis sweep");
  sweep->add_option("config", config_path, "base config (JSON)")->required();
  sweep->add_option("--axis", axis, "dotted field path, e.g. optimizer.eta")->required();
  sweep->add_option("--values", values, "comma-separated values")->required();
  sweep->add_option("--seeds", seeds, "comma-separated seeds")->required();
  sweep->add_option("--jobs", jobs, "concurrent cells")->check(CLI::PositiveNumber);
  sweep->add_option("--output-dir", output_dir, "output directory");

  auto* estimate = app.add_subcommand("estimate", "sample smoothness along a run and fit (L0, L1)");
  estimate->add_option("config", config_path, "experiment config (JSON)")->required();
  estimate->add_option("--output-dir", output_dir, "output directory");

  LowerBoundArgs lb;
  double gd_eta = 0.0;
  double x0 = 0.0;
  auto* lower = app.add_subcommand("lowerbound", "GD lower-bound constructions");
  lower->add_option("--L0", lb.spec.L0, "L0")->capture_default_str();
  lower->add_option("--L1", lb.spec.L1, "L1")->capture_default_str();
  lower->add_option("--M", lb.spec.M, "gradient bound on the sub-level set")->capture_default_str();
  lower->add_option("--eps", lb.spec.eps, "target gradient magnitude")->capture_default_str();
  lower->add_option("--gap", lb.gap, "f(x0) - f* for the iteration bound")->capture_default_str();
  auto* gd_eta_opt = lower->add_option("--gd-eta", gd_eta, "GD step (default 1.1 eta_star)");
  auto* x0_opt = lower->add_option("--x0", x0, "case-1 start");
  lower->add_option("--eta", lb.eta, "sign-momentum step")->capture_default_str();
  lower->add_option("--beta1", lb.beta1, "sign-momentum beta1")->capture_default_str();
  lower->add_option("--steps", lb.steps, "GD steps to check")->capture_default_str();
  lower->add_option("--budget", lb.budget, "sign-momentum step budget")->capture_default_str();

  auto* check = app.add_subcommand("check", "run the invariant suite");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return 2;
  }

  auto load = [&] {
    ExperimentConfig cfg = load_config(config_path);
    if (!output_dir.empty()) cfg.output_dir = output_dir;
    return cfg;
  };

  try {
    if (*run) {
      const ExperimentConfig cfg = load();
      const SummaryRecord s = run_experiment(cfg);
      out << "min_grad_l1 " << format_real(s.min_grad_l1) << " at t=" << s.argmin_t << ", final_f "
          << format_real(s.final_f) << (s.diverged ? ", diverged" : "") << '\n';
      out << "wrote " << resolve_output_dir(cfg).string() << '\n';
    } else if (*sweep) {
      ExperimentConfig cfg = load();
      if (!output_dir.empty()) cfg.source["output_dir"] = output_dir;
      std::vector<std::uint64_t> seed_list;
      try {
        seed_list = parse_seed_list(seeds);
      } catch (const CLI::ValidationError& e) {
        err << "error: " << e.what() << '\n';
        return 2;
      }
      const SweepTable table = run_sweep(cfg, axis, parse_value_list(values), seed_list, jobs);
      for (const auto& c : table.cells) {
        out << c.rank << ' ' << c.cell_name << " min_grad_l1 " << format_real(c.summary.min_grad_l1)
            << '\n';
      }
      out << "wrote " << (resolve_output_dir(cfg) / "sweep.csv").string() << '\n';
    } else if (*estimate) {
      const ExperimentConfig cfg = load();
      const EstimateReport r = run_estimate(cfg);
      out << fit_json(r.coordinate_fit).dump() << '\n';
      out << "wrote " << resolve_output_dir(cfg).string() << '\n';
    } else if (*lower) {
      if (*gd_eta_opt) lb.gd_eta = gd_eta;
      if (*x0_opt) lb.spec.x0 = x0;
      return lowerbound_command(lb, out);
    } else if (*check) {
      return check_command(out);
    }
  } catch (const Error& e) {
    err << "error [" << to_string(e.code()) << "]: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}

}  // namespace optlab::harness
