#include <gtest/gtest.h>

#include <filesystem>
#include <sstream>
#include <string>
#include <vector>

#include "optlab/harness/cli.hpp"

using namespace optlab::harness;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  int code;
  std::string out;
  std::string err;
};

Outcome invoke(std::vector<std::string> args) {
  args.insert(args.begin(), "optlab");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = cli_main(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

fs::path write_config(const std::string& name, const std::string& text) {
  const fs::path dir = fs::temp_directory_path() / "optlab_cli_test";
  fs::create_directories(dir);
  write_file(dir / name, text);
  return dir / name;
}

}  // namespace

TEST(Cli, UnknownSubcommandIsUsageError) {
  const Outcome o = invoke({"frobnicate"});
  EXPECT_EQ(o.code, 2);
  EXPECT_NE(o.err.find("Usage"), std::string::npos);
}

TEST(Cli, MissingSubcommandIsUsageError) { EXPECT_EQ(invoke({}).code, 2); }

TEST(Cli, CheckPasses) {
  const Outcome o = invoke({"check"});
  EXPECT_EQ(o.code, 0);
  EXPECT_EQ(o.out.find("FAIL"), std::string::npos) << o.out;
}

TEST(Cli, LowerboundDefaults) {
  const Outcome o = invoke({"lowerbound"});
  EXPECT_EQ(o.code, 0);
  EXPECT_NE(o.out.find("eta_star 0.8120116994"), std::string::npos) << o.out;
  EXPECT_NE(o.out.find("iteration_bound 121.996394966"), std::string::npos) << o.out;
}

TEST(Cli, LowerboundBadSpecIsRuntimeError) {
  EXPECT_EQ(invoke({"lowerbound", "--L0", "-1"}).code, 1);
}

TEST(Cli, RunWritesOutputs) {
  const fs::path cfg = write_config("run.json", R"({
    "problem": {"type": "quadratic", "c": [1.0]},
    "optimizer": {"method": "generalized_signsgd", "eta": 0.1, "beta2": 0},
    "T": 20
  })");
  const fs::path out = fs::temp_directory_path() / "optlab_cli_test" / "run_out";
  fs::remove_all(out);
  const Outcome o = invoke({"run", cfg.string(), "--output-dir", out.string()});
  EXPECT_EQ(o.code, 0) << o.err;
  EXPECT_TRUE(fs::exists(out / "trajectory.csv"));
  EXPECT_TRUE(fs::exists(out / "summary.json"));
}

TEST(Cli, RunOnBadConfigIsRuntimeError) {
  const fs::path cfg = write_config("bad.json", R"({"problem": {"type": "quadratic", "c": [1]}})");
  const Outcome o = invoke({"run", cfg.string()});
  EXPECT_EQ(o.code, 1);
  EXPECT_NE(o.err.find("MissingField"), std::string::npos) << o.err;
}

TEST(Cli, SweepAndBadAxis) {
  const fs::path cfg = write_config("sweep.json", R"({
    "problem": {"type": "quadratic", "c": [1.0, 2.0], "sigma": [1, 1]},
    "optimizer": {"method": "generalized_signsgd", "eta": 0.01},
    "T": 50
  })");
  const fs::path out = fs::temp_directory_path() / "optlab_cli_test" / "sweep_out";
  fs::remove_all(out);
  Outcome o = invoke({"sweep", cfg.string(), "--axis", "optimizer.eta", "--values", "0.1,0.01", "--seeds",
                      "1,2", "--jobs", "2", "--output-dir", out.string()});
  EXPECT_EQ(o.code, 0) << o.err;
  EXPECT_TRUE(fs::exists(out / "sweep.csv"));
  o = invoke({"sweep", cfg.string(), "--axis", "nope", "--values", "1", "--seeds", "1"});
  EXPECT_EQ(o.code, 1);
  o = invoke({"sweep", cfg.string(), "--axis", "T", "--values", "1", "--seeds", "x"});
  EXPECT_EQ(o.code, 2);
}

TEST(Cli, EstimateWritesFit) {
  const fs::path cfg = write_config("estimate.json", R"({
    "problem": {"type": "exp_separable", "a": [2.0]},
    "optimizer": {"method": "generalized_signsgd", "eta": 0.01, "beta2": 0},
    "T": 100, "noise_on": false
  })");
  const fs::path out = fs::temp_directory_path() / "optlab_cli_test" / "estimate_out";
  fs::remove_all(out);
  const Outcome o = invoke({"estimate", cfg.string(), "--output-dir", out.string()});
  EXPECT_EQ(o.code, 0) << o.err;
  EXPECT_TRUE(fs::exists(out / "fit.json"));
}

#ifdef OPTLAB_BINARY
TEST(Cli, BinaryExitCodes) {
  EXPECT_EQ(std::system((std::string(OPTLAB_BINARY) + " bogus >/dev/null 2>&1").c_str()) >> 8, 2);
  EXPECT_EQ(std::system((std::string(OPTLAB_BINARY) + " check >/dev/null 2>&1").c_str()) >> 8, 0);
}
#endif
