#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <sstream>
#include <string>

#include "optlab/harness/config.hpp"
#include "optlab/harness/experiment.hpp"
#include "optlab/harness/io.hpp"
#include "optlab/harness/sweep.hpp"

using namespace optlab;
using namespace optlab::harness;
namespace fs = std::filesystem;

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

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "optlab_harness_test" / name;
  fs::remove_all(dir);
  return dir;
}

json quadratic_doc() {
  return json::parse(R"({
    "problem": {"type": "quadratic", "c": [1.0, 2.0], "sigma": 0.5},
    "optimizer": {"method": "generalized_signsgd", "eta": 0.01},
    "T": 1000, "seed": 3
  })");
}

std::size_t line_count(const std::string& s) {
  std::size_t n = 0;
  for (char c : s) n += c == '\n';
  return n;
}

json without_wallclock(json j) {
  j.erase("wallclock_seconds");
  return j;
}

}  // namespace

TEST(Config, MinimalDocumentDefaults) {
  const ExperimentConfig cfg = parse_config(quadratic_doc());
  EXPECT_EQ(cfg.optimizer.beta1, 0.9);
  EXPECT_EQ(cfg.optimizer.beta2, 0.999);
  EXPECT_EQ(cfg.log_stride, 1u);
  EXPECT_TRUE(cfg.noise_on);
  EXPECT_EQ(cfg.problem.sigma, (ParamVector{0.5, 0.5}));
}

TEST(Config, AdamPresetBestChoice) {
  json doc = quadratic_doc();
  doc["optimizer"] = {{"method", "adam"}, {"preset", "cifar10"}};
  const ExperimentConfig cfg = parse_config(doc);
  EXPECT_EQ(cfg.optimizer.eta, 0.0009);
  EXPECT_EQ(cfg.optimizer.beta2, 0.999);
}

TEST(Config, MissingFields) {
  json doc = quadratic_doc();
  doc.erase("T");
  try {
    parse_config(doc);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::MissingField);
    EXPECT_STREQ(e.what(), "MissingField: T");
  }
  json no_eta = quadratic_doc();
  no_eta["optimizer"].erase("eta");
  EXPECT_EQ(code_of([&] { parse_config(no_eta); }), ErrorCode::MissingField);
}

TEST(Config, TheoryModeConflicts) {
  json doc = quadratic_doc();
  doc["theory_mode"] = true;
  EXPECT_EQ(code_of([&] { parse_config(doc); }), ErrorCode::ConflictingFields);
  doc["optimizer"].erase("eta");
  const ExperimentConfig cfg = parse_config(doc);
  EXPECT_EQ(cfg.optimizer.beta2, 0.0);
}

TEST(Config, SyntaxErrorReportsLine) {
  try {
    parse_config(std::string_view("{\n  \"T\": 10,\n  oops\n}"));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::ParseError);
    EXPECT_NE(std::string(e.what()).find("line 3"), std::string::npos) << e.what();
  }
}

TEST(Config, UnknownKeyRejected) {
  json doc = quadratic_doc();
  doc["optimizer"]["lr"] = 0.1;
  EXPECT_EQ(code_of([&] { parse_config(doc); }), ErrorCode::ParseError);
}

TEST(Io, RealFormattingRoundTrips) {
  for (double x : {0.1, 1.0 / 3.0, 1e-300, 123456789.123456789}) {
    EXPECT_EQ(std::stod(format_real(x)), x);
  }
  EXPECT_EQ(json_real(INFINITY), "inf");
}

TEST(RunExperiment, StructuralOutputs) {
  json doc = quadratic_doc();
  doc["log_stride"] = 3;
  const fs::path dir = scratch("structural");
  doc["output_dir"] = dir.string();
  const SummaryRecord s = run_experiment(parse_config(doc));
  EXPECT_TRUE(std::isfinite(s.min_grad_l1));
  const std::string csv = read_file(dir / "trajectory.csv");
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "t,f_value,grad_l1,grad_l2,update_linf,x_0,x_1");
  EXPECT_EQ(line_count(csv), 1u + 334u);
  const json summary = json::parse(read_file(dir / "summary.json"));
  EXPECT_EQ(summary["invariant_report"]["update_bound"]["status"], "pass");
  EXPECT_EQ(summary["invariant_report"]["noise_bound"]["status"], "pass");
  EXPECT_EQ(summary["config"]["optimizer"]["beta1"], 0.9);
}

TEST(RunExperiment, MinGradIsMinimumOverLoggedRows) {
  ExperimentConfig cfg = parse_config(quadratic_doc());
  const ExperimentResult r = execute(cfg);
  double best = INFINITY;
  for (const auto& rec : r.trajectory.records) best = std::min(best, rec.grad_l1);
  EXPECT_EQ(r.summary.min_grad_l1, best);
}

TEST(RunExperiment, ByteIdenticalReruns) {
  json doc = quadratic_doc();
  doc["smoothness_stride"] = 10;
  const fs::path a = scratch("det_a"), b = scratch("det_b");
  doc["output_dir"] = a.string();
  run_experiment(parse_config(doc));
  doc["output_dir"] = b.string();
  run_experiment(parse_config(doc));
  EXPECT_EQ(read_file(a / "trajectory.csv"), read_file(b / "trajectory.csv"));
  EXPECT_EQ(read_file(a / "smoothness.csv"), read_file(b / "smoothness.csv"));
  EXPECT_EQ(without_wallclock(json::parse(read_file(a / "summary.json"))),
            without_wallclock(json::parse(read_file(b / "summary.json"))));
}

TEST(RunExperiment, Case1GdDiverges) {
  const json doc = json::parse(R"({
    "problem": {"type": "lower_bound_case1", "L0": 1, "L1": 1, "M": 7.38905609893065, "eps": 0.1},
    "optimizer": {"method": "sgd_momentum", "eta": 0.9, "beta1": 0},
    "T": 1000, "noise_on": false
  })");
  ExperimentConfig cfg = parse_config(doc);
  const ExperimentResult r = execute(cfg);
  EXPECT_TRUE(r.summary.diverged);
  EXPECT_EQ(r.summary.invariant_report.at("finite_iterates").status, "fail");
}

TEST(RunExperiment, TheoryModeEchoesSchedule) {
  json doc = quadratic_doc();
  doc["theory_mode"] = true;
  doc["optimizer"].erase("eta");
  doc["T"] = 400;
  const ExperimentResult r = execute(parse_config(doc));
  ASSERT_TRUE(r.summary.schedule.has_value());
  EXPECT_EQ(r.trajectory.hp.eta, r.summary.schedule->eta);
  EXPECT_EQ(r.trajectory.hp.beta1, 1.0 - r.summary.schedule->alpha);
  ASSERT_TRUE(r.summary.constants.has_value());
  EXPECT_EQ(r.summary.invariant_report.at("D_at_least_half").status, "pass");
  const json j = to_json(r.summary);
  EXPECT_TRUE(j.contains("schedule"));
  EXPECT_TRUE(j["theory_constants"]["tau_bar"] == "unbounded");
  EXPECT_EQ(j["config"]["optimizer"]["eta"].get<double>(), r.summary.schedule->eta);
  EXPECT_EQ(j["config"]["optimizer"]["beta1"].get<double>(), r.summary.schedule->beta1);
  EXPECT_EQ(j["config"]["Delta"].get<double>(), 1.5);
}

TEST(Estimate, ExpSeparableFit) {
  const json doc = json::parse(R"({
    "problem": {"type": "exp_separable", "a": [2.0]},
    "optimizer": {"method": "generalized_signsgd", "eta": 0.01, "beta2": 0},
    "x1": [1.0], "T": 250, "noise_on": false
  })");
  ExperimentConfig cfg = parse_config(doc);
  const fs::path dir = scratch("estimate");
  cfg.output_dir = dir.string();
  const EstimateReport r = run_estimate(cfg);
  ASSERT_TRUE(r.coordinate_fit.has_value());
  EXPECT_NEAR(r.coordinate_fit->L1_hat, 2.0, 0.1);
  EXPECT_TRUE(fs::exists(dir / "fit.json"));
  const std::string csv = read_file(dir / "smoothness.csv");
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "t,j,grad_magnitude,local_lipschitz");
}

TEST(Sweep, CrossProductRows) {
  json doc = quadratic_doc();
  doc["T"] = 200;
  const fs::path dir = scratch("sweep");
  doc["output_dir"] = dir.string();
  const SweepTable t = run_sweep(parse_config(doc), "optimizer.eta", {0.1, 0.01}, {1, 2});
  EXPECT_EQ(t.cells.size(), 4u);
  EXPECT_EQ(line_count(read_file(dir / "sweep.csv")), 5u);
}

TEST(Sweep, Guards) {
  const ExperimentConfig cfg = parse_config(quadratic_doc());
  EXPECT_EQ(code_of([&] { run_sweep(cfg, "optimizer.eta", {}, {1}); }), ErrorCode::BadAxis);
  EXPECT_EQ(code_of([&] { run_sweep(cfg, "problem.c", {1.0}, {1}); }), ErrorCode::BadAxis);
  EXPECT_EQ(code_of([&] { run_sweep(cfg, "optimizer.eta", {json::array({1, 2})}, {1}); }), ErrorCode::BadAxis);
}

TEST(Sweep, RanksByMinGradAndCellsMatchStandaloneRuns) {
  json doc = quadratic_doc();
  doc["T"] = 500;
  doc["optimizer"]["beta1"] = 0.9;
  const fs::path dir = scratch("sweep_rank");
  doc["output_dir"] = dir.string();
  const SweepTable t = run_sweep(parse_config(doc), "optimizer.beta2", {0.0, 0.5, 0.999}, {7}, 3);
  for (const auto& a : t.cells) {
    for (const auto& b : t.cells) {
      if (a.summary.min_grad_l1 < b.summary.min_grad_l1) {
        EXPECT_LT(a.rank, b.rank);
      }
    }
  }
  json alone = doc;
  alone["optimizer"]["beta2"] = 0.5;
  alone["seed"] = 7;
  alone["output_dir"] = (dir / "alone").string();
  run_experiment(parse_config(alone));
  EXPECT_EQ(read_file(dir / "alone" / "trajectory.csv"),
            read_file(dir / t.cells[1].cell_name / "trajectory.csv"));
}
