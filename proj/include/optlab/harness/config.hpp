#pragma once

#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "json.hpp"

#include "optlab/core/param_vector.hpp"
#include "optlab/error.hpp"
#include "optlab/harness/io.hpp"
#include "optlab/optimizers.hpp"
#include "optlab/problems.hpp"

namespace optlab::harness {

using nlohmann::json;

enum class ProblemKind { Quadratic, ExpSeparable, LowerBoundCase1, LowerBoundCase2 };

constexpr std::string_view to_string(ProblemKind k) {
  switch (k) {
    case ProblemKind::Quadratic: return "quadratic";
    case ProblemKind::ExpSeparable: return "exp_separable";
    case ProblemKind::LowerBoundCase1: return "lower_bound_case1";
    case ProblemKind::LowerBoundCase2: return "lower_bound_case2";
  }
  return "unknown";
}

struct ProblemConfig {
  ProblemKind kind = ProblemKind::Quadratic;
  /// c for quadratic, a for exp_separable.
  ParamVector coefficients;
  LowerBoundSpec lower_bound;
  /// Empty means noiseless.
  ParamVector sigma;

  std::size_t dimension() const {
    return kind == ProblemKind::Quadratic || kind == ProblemKind::ExpSeparable ? coefficients.size()
                                                                               : 1;
  }
};

struct ExperimentConfig {
  ProblemConfig problem;
  /// Defaults to the construction's start for lower-bound problems and to
  /// the all-ones vector otherwise.
  std::optional<ParamVector> x1;
  HyperParams optimizer;
  std::optional<std::string> preset;
  std::size_t T = 0;
  std::uint64_t seed = 0;
  bool noise_on = true;
  std::size_t log_stride = 1;
  std::optional<std::size_t> smoothness_stride;
  std::optional<std::string> output_dir;
  SnapshotPolicy snapshots = SnapshotPolicy::Auto;
  /// Derive eta and beta1 from the convergence analysis.
  bool theory_mode = false;
  /// Upper bound on F(x1) - F*; defaults to the exact gap.
  std::optional<double> Delta;
  double delta_prob = 0.01;
  /// Sub-level gradient bounds for the theory constants; tracked empirically
  /// along the trajectory when absent.
  std::optional<ParamVector> gradient_bound;
  /// The document this config was parsed from; sweeps edit this.
  json source;
};

/// Best-choice (lr, beta2, clip) values from the published grid searches,
/// per preset and method. Weight decay is not modelled.
struct PresetEntry {
  double eta;
  std::optional<double> beta2;
  std::optional<double> clip_gamma;
};

inline std::optional<PresetEntry> preset_entry(std::string_view preset, Method method, int clip_nu) {
  struct Row {
    std::string_view preset;
    Method method;
    int nu;
    PresetEntry entry;
  };
  static const Row rows[] = {
      {"cifar10", Method::SgdMomentum, 0, {0.07, {}, {}}},
      {"cifar10", Method::SgdMomentumNormalized, 0, {0.1, {}, {}}},
      {"cifar10", Method::SgdClip, 0, {0.5, {}, 1.0}},
      {"cifar10", Method::SgdClip, 1, {10.0, {}, 0.1}},
      {"cifar10", Method::Adam, 0, {0.0009, 0.999, {}}},
      {"cifar10", Method::GeneralizedSignSgd, 0, {0.0002, 0.999, {}}},
      {"ptb", Method::SgdMomentum, 0, {1.0, {}, {}}},
      {"ptb", Method::SgdMomentumNormalized, 0, {2.0, {}, {}}},
      {"ptb", Method::SgdClip, 0, {50.0, {}, 10.0}},
      {"ptb", Method::SgdClip, 1, {20.0, {}, 2.5}},
      {"ptb", Method::Adam, 0, {0.002, 0.999, {}}},
      {"ptb", Method::GeneralizedSignSgd, 0, {0.001, 0.999, {}}},
      {"wmt16", Method::SgdMomentum, 0, {1.0, {}, {}}},
      {"wmt16", Method::SgdMomentumNormalized, 0, {10000.0, {}, {}}},
      {"wmt16", Method::SgdClip, 0, {10.0, {}, 1.0}},
      {"wmt16", Method::SgdClip, 1, {1.0, {}, 1.0}},
      {"wmt16", Method::Adam, 0, {10.0, 0.98, {}}},
      {"wmt16", Method::GeneralizedSignSgd, 0, {10.0, 0.98, {}}},
  };
  const int nu = method == Method::SgdClip ? clip_nu : 0;
  for (const auto& r : rows) {
    if (r.preset == preset && r.method == method && r.nu == nu) return r.entry;
  }
  return std::nullopt;
}

namespace detail {

/// Typed access to one JSON object with field paths in error messages and
/// rejection of unknown keys.
class ObjectReader {
 public:
  ObjectReader(const json& obj, std::string path, std::set<std::string> allowed)
      : obj_(obj), path_(std::move(path)), allowed_(std::move(allowed)) {
    if (!obj_.is_object()) fail(ErrorCode::ParseError, where("") + ": expected an object");
    for (const auto& [key, _] : obj_.items()) {
      if (!allowed_.count(key)) fail(ErrorCode::ParseError, where(key) + ": unknown field");
    }
  }

  bool has(const std::string& key) const { return obj_.contains(key) && !obj_.at(key).is_null(); }

  const json& at(const std::string& key) const {
    if (!has(key)) fail(ErrorCode::MissingField, where(key));
    return obj_.at(key);
  }

  std::optional<double> real(const std::string& key) const {
    if (!has(key)) return std::nullopt;
    const json& v = obj_.at(key);
    if (!v.is_number()) fail(ErrorCode::ParseError, where(key) + ": expected a number");
    return v.get<double>();
  }

  std::optional<std::uint64_t> count(const std::string& key) const {
    if (!has(key)) return std::nullopt;
    const json& v = obj_.at(key);
    if (v.is_number_unsigned()) return v.get<std::uint64_t>();
    if (v.is_number_integer() && v.get<std::int64_t>() >= 0) {
      return static_cast<std::uint64_t>(v.get<std::int64_t>());
    }
    fail(ErrorCode::ParseError, where(key) + ": expected a nonnegative integer");
  }

  std::optional<bool> flag(const std::string& key) const {
    if (!has(key)) return std::nullopt;
    const json& v = obj_.at(key);
    if (!v.is_boolean()) fail(ErrorCode::ParseError, where(key) + ": expected true or false");
    return v.get<bool>();
  }

  std::optional<std::string> text(const std::string& key) const {
    if (!has(key)) return std::nullopt;
    const json& v = obj_.at(key);
    if (!v.is_string()) fail(ErrorCode::ParseError, where(key) + ": expected a string");
    return v.get<std::string>();
  }

  /// Array of numbers, or a single number broadcast to `broadcast` entries.
  std::optional<ParamVector> vector(const std::string& key, std::size_t broadcast = 0) const {
    if (!has(key)) return std::nullopt;
    const json& v = obj_.at(key);
    if (v.is_number() && broadcast > 0) return ParamVector(broadcast, v.get<double>());
    if (!v.is_array()) fail(ErrorCode::ParseError, where(key) + ": expected an array of numbers");
    std::vector<double> out;
    for (const auto& e : v) {
      if (!e.is_number()) fail(ErrorCode::ParseError, where(key) + ": expected an array of numbers");
      out.push_back(e.get<double>());
    }
    return ParamVector(std::move(out));
  }

  std::string where(const std::string& key) const {
    if (path_.empty()) return key;
    return key.empty() ? path_ : path_ + "." + key;
  }

 private:
  const json& obj_;
  std::string path_;
  std::set<std::string> allowed_;
};

inline ProblemConfig parse_problem(const json& doc) {
  ObjectReader r(doc, "problem",
                 {"type", "c", "a", "sigma", "L0", "L1", "M", "eps", "x0", "initial_gap"});
  const std::string type = r.text("type").value_or("");
  ProblemConfig p;
  if (type == "quadratic" || type == "exp_separable") {
    p.kind = type == "quadratic" ? ProblemKind::Quadratic : ProblemKind::ExpSeparable;
    const char* key = type == "quadratic" ? "c" : "a";
    auto coeffs = r.vector(key);
    if (!coeffs) fail(ErrorCode::MissingField, r.where(key));
    p.coefficients = *coeffs;
  } else if (type == "lower_bound_case1" || type == "lower_bound_case2") {
    p.kind = type == "lower_bound_case1" ? ProblemKind::LowerBoundCase1 : ProblemKind::LowerBoundCase2;
    auto need = [&](const char* key) {
      auto v = r.real(key);
      if (!v) fail(ErrorCode::MissingField, r.where(key));
      return *v;
    };
    p.lower_bound.L0 = need("L0");
    p.lower_bound.L1 = need("L1");
    p.lower_bound.M = need("M");
    p.lower_bound.eps = need("eps");
    p.lower_bound.x0 = r.real("x0");
    p.lower_bound.initial_gap = r.real("initial_gap");
  } else if (type.empty()) {
    fail(ErrorCode::MissingField, r.where("type"));
  } else {
    fail(ErrorCode::ParseError, r.where("type") + ": unknown problem type '" + type + "'");
  }
  if (auto sigma = r.vector("sigma", p.dimension())) p.sigma = *sigma;
  return p;
}

}  // namespace detail

inline Problem build_problem(const ProblemConfig& p) {
  NoiseSpec noise{p.sigma};
  switch (p.kind) {
    case ProblemKind::Quadratic: return make_quadratic(p.coefficients, noise);
    case ProblemKind::ExpSeparable: return make_exp_separable(p.coefficients, noise);
    case ProblemKind::LowerBoundCase1: return make_lower_bound_case1(p.lower_bound, noise);
    case ProblemKind::LowerBoundCase2: return make_lower_bound_case2(p.lower_bound, noise);
  }
  fail(ErrorCode::ParseError, "unknown problem kind");
}

inline ParamVector start_point(const ExperimentConfig& cfg, const Problem& problem) {
  if (cfg.x1) return *cfg.x1;
  if (problem.default_start) return *problem.default_start;
  return ParamVector(problem.dim, 1.0);
}

/// Builds a config from a parsed JSON document and applies defaults:
/// beta1 = 0.9, beta2 = 0.999 for adam (0.999 for generalized_signsgd outside
/// theory mode, 0 inside it), preset values for whatever is not given.
inline ExperimentConfig parse_config(const json& doc) {
  using detail::ObjectReader;
  ObjectReader r(doc, "",
                 {"problem", "x1", "optimizer", "T", "seed", "noise_on", "log_stride",
                  "smoothness_stride", "output_dir", "snapshots", "theory_mode", "Delta", "delta",
                  "M"});
  ExperimentConfig cfg;
  cfg.source = doc;
  cfg.problem = detail::parse_problem(r.at("problem"));

  auto T = r.count("T");
  if (!T) fail(ErrorCode::MissingField, "T");
  if (*T == 0) fail(ErrorCode::ParseError, "T: must be at least 1");
  cfg.T = static_cast<std::size_t>(*T);
  cfg.seed = r.count("seed").value_or(0);
  cfg.noise_on = r.flag("noise_on").value_or(true);
  cfg.log_stride = static_cast<std::size_t>(r.count("log_stride").value_or(1));
  if (cfg.log_stride == 0) fail(ErrorCode::ParseError, "log_stride: must be at least 1");
  if (auto s = r.count("smoothness_stride")) {
    if (*s == 0) fail(ErrorCode::ParseError, "smoothness_stride: must be at least 1");
    cfg.smoothness_stride = static_cast<std::size_t>(*s);
  }
  cfg.output_dir = r.text("output_dir");
  if (auto snap = r.text("snapshots")) {
    if (*snap == "auto") cfg.snapshots = SnapshotPolicy::Auto;
    else if (*snap == "always") cfg.snapshots = SnapshotPolicy::Always;
    else if (*snap == "never") cfg.snapshots = SnapshotPolicy::Never;
    else fail(ErrorCode::ParseError, "snapshots: expected auto, always or never");
  }
  cfg.theory_mode = r.flag("theory_mode").value_or(false);
  cfg.Delta = r.real("Delta");
  cfg.delta_prob = r.real("delta").value_or(0.01);
  cfg.gradient_bound = r.vector("M", cfg.problem.dimension());
  cfg.x1 = r.vector("x1", cfg.problem.dimension());
  if (cfg.x1 && cfg.x1->size() != cfg.problem.dimension()) {
    fail(ErrorCode::ParseError, "x1: length does not match the problem dimension");
  }

  ObjectReader o(r.at("optimizer"), "optimizer",
                 {"method", "preset", "eta", "beta1", "beta2", "clip_gamma", "clip_nu", "adam_eps",
                  "bias_correction", "second_moment_source"});
  const auto method_name = o.text("method");
  if (!method_name) fail(ErrorCode::MissingField, "optimizer.method");
  const auto method = parse_method(*method_name);
  if (!method) fail(ErrorCode::ParseError, "optimizer.method: unknown method '" + *method_name + "'");

  HyperParams& hp = cfg.optimizer;
  hp.method = *method;
  hp.clip_nu = static_cast<int>(o.count("clip_nu").value_or(0));
  cfg.preset = o.text("preset");

  if (cfg.theory_mode) {
    if (hp.method != Method::GeneralizedSignSgd) {
      fail(ErrorCode::ConflictingFields, "theory_mode requires optimizer.method generalized_signsgd");
    }
    for (const char* key : {"eta", "beta1", "preset"}) {
      if (o.has(key)) {
        fail(ErrorCode::ConflictingFields,
             std::string("theory_mode derives eta and beta1; remove optimizer.") + key);
      }
    }
  }

  std::optional<PresetEntry> preset;
  if (cfg.preset) {
    preset = preset_entry(*cfg.preset, hp.method, hp.clip_nu);
    if (!preset) {
      fail(ErrorCode::ParseError, "optimizer.preset: no '" + *cfg.preset + "' entry for " +
                                      std::string(to_string(hp.method)));
    }
  }

  if (auto eta = o.real("eta")) {
    hp.eta = *eta;
  } else if (preset) {
    hp.eta = preset->eta;
  } else if (!cfg.theory_mode) {
    fail(ErrorCode::MissingField, "optimizer.eta");
  }

  hp.beta1 = o.real("beta1").value_or(0.9);

  double beta2_default = 0.0;
  if (hp.method == Method::Adam) beta2_default = 0.999;
  if (hp.method == Method::GeneralizedSignSgd && !cfg.theory_mode) beta2_default = 0.999;
  if (preset && preset->beta2) beta2_default = *preset->beta2;
  hp.beta2 = o.real("beta2").value_or(beta2_default);

  hp.clip_gamma = o.real("clip_gamma");
  if (!hp.clip_gamma && preset) hp.clip_gamma = preset->clip_gamma;
  hp.adam_eps = o.real("adam_eps").value_or(1e-8);
  hp.bias_correction = o.flag("bias_correction").value_or(true);
  if (auto src = o.text("second_moment_source")) {
    if (*src == "momentum") hp.second_moment_source = SecondMomentSource::Momentum;
    else if (*src == "gradient") hp.second_moment_source = SecondMomentSource::Gradient;
    else fail(ErrorCode::ParseError, "optimizer.second_moment_source: expected momentum or gradient");
  }
  if (!cfg.theory_mode) hp.validate();
  return cfg;
}

/// Parses JSON text; syntax errors report the line.
inline ExperimentConfig parse_config(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text.begin(), text.end());
  } catch (const json::parse_error& e) {
    std::size_t line = 1;
    const std::size_t limit = std::min<std::size_t>(e.byte, text.size());
    for (std::size_t i = 0; i + 1 < limit; ++i) {
      if (text[i] == '\n') ++line;
    }
    fail(ErrorCode::ParseError, "line " + std::to_string(line) + ": " + e.what());
  }
  return parse_config(doc);
}

inline ExperimentConfig load_config(const std::filesystem::path& path) {
  return parse_config(std::string_view(read_file(path)));
}

/// Output directory: explicit setting, else $OPTLAB_OUTPUT_DIR, else ./optlab_out.
inline std::filesystem::path resolve_output_dir(const ExperimentConfig& cfg) {
  if (cfg.output_dir) return *cfg.output_dir;
  if (const char* env = std::getenv("OPTLAB_OUTPUT_DIR"); env && *env) return env;
  return "optlab_out";
}

/// Fully resolved configuration, for echoing into summaries.
inline json to_json(const ExperimentConfig& cfg) {
  json problem;
  problem["type"] = std::string(to_string(cfg.problem.kind));
  if (cfg.problem.kind == ProblemKind::Quadratic) problem["c"] = json_vector(cfg.problem.coefficients);
  if (cfg.problem.kind == ProblemKind::ExpSeparable) problem["a"] = json_vector(cfg.problem.coefficients);
  if (cfg.problem.kind == ProblemKind::LowerBoundCase1 ||
      cfg.problem.kind == ProblemKind::LowerBoundCase2) {
    const auto& lb = cfg.problem.lower_bound;
    problem["L0"] = lb.L0;
    problem["L1"] = lb.L1;
    problem["M"] = lb.M;
    problem["eps"] = lb.eps;
    if (lb.x0) problem["x0"] = *lb.x0;
    if (lb.initial_gap) problem["initial_gap"] = *lb.initial_gap;
  }
  problem["sigma"] = cfg.problem.sigma.empty() ? json_vector(ParamVector::zeros(cfg.problem.dimension()))
                                               : json_vector(cfg.problem.sigma);

  const HyperParams& hp = cfg.optimizer;
  json opt;
  opt["method"] = std::string(to_string(hp.method));
  opt["eta"] = json_real(hp.eta);
  opt["beta1"] = hp.beta1;
  opt["beta2"] = hp.beta2;
  if (hp.clip_gamma) opt["clip_gamma"] = *hp.clip_gamma;
  opt["clip_nu"] = hp.clip_nu;
  opt["adam_eps"] = hp.adam_eps;
  opt["bias_correction"] = hp.bias_correction;
  opt["second_moment_source"] = std::string(to_string(hp.second_moment_source));
  if (cfg.preset) opt["preset"] = *cfg.preset;

  json out;
  out["problem"] = problem;
  out["optimizer"] = opt;
  if (cfg.x1) out["x1"] = json_vector(*cfg.x1);
  out["T"] = cfg.T;
  out["seed"] = cfg.seed;
  out["noise_on"] = cfg.noise_on;
  out["log_stride"] = cfg.log_stride;
  if (cfg.smoothness_stride) out["smoothness_stride"] = *cfg.smoothness_stride;
  out["snapshots"] = cfg.snapshots == SnapshotPolicy::Auto     ? "auto"
                     : cfg.snapshots == SnapshotPolicy::Always ? "always"
                                                               : "never";
  out["theory_mode"] = cfg.theory_mode;
  if (cfg.Delta) out["Delta"] = *cfg.Delta;
  out["delta"] = cfg.delta_prob;
  if (cfg.gradient_bound) out["M"] = json_vector(*cfg.gradient_bound);
  return out;
}

}  // namespace optlab::harness
