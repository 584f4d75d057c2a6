#pragma once

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <filesystem>
#include <future>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "optlab/error.hpp"
#include "optlab/harness/config.hpp"
#include "optlab/harness/experiment.hpp"
#include "optlab/harness/io.hpp"

namespace optlab::harness {

/// Scalar fields a sweep may vary.
inline const std::vector<std::string>& sweepable_axes() {
  static const std::vector<std::string> axes{
      "T",
      "noise_on",
      "log_stride",
      "smoothness_stride",
      "theory_mode",
      "Delta",
      "delta",
      "optimizer.method",
      "optimizer.preset",
      "optimizer.eta",
      "optimizer.beta1",
      "optimizer.beta2",
      "optimizer.clip_gamma",
      "optimizer.clip_nu",
      "optimizer.adam_eps",
      "optimizer.bias_correction",
      "optimizer.second_moment_source",
      "problem.L0",
      "problem.L1",
      "problem.M",
      "problem.eps",
      "problem.x0",
      "problem.initial_gap",
  };
  return axes;
}

struct SweepCell {
  json value;
  std::uint64_t seed = 0;
  std::string cell_name;
  SummaryRecord summary;
  /// 1 = smallest min_grad_l1 across the table.
  std::size_t rank = 0;
};

struct SweepTable {
  std::string axis;
  std::vector<SweepCell> cells;
};

inline std::string scalar_text(const json& v) {
  return v.is_string() ? v.get<std::string>() : v.dump();
}

inline std::string cell_name(const std::string& axis, const json& value, std::uint64_t seed) {
  std::string name = axis + "=" + scalar_text(value) + "_seed=" + std::to_string(seed);
  for (char& c : name) {
    const bool keep = std::isalnum(static_cast<unsigned char>(c)) || c == '.' || c == '=' || c == '_' ||
                      c == '-' || c == '+';
    if (!keep) c = '_';
  }
  return name;
}

/// The standalone config document for one sweep cell.
inline json cell_document(const ExperimentConfig& base, const std::string& axis, const json& value,
                          std::uint64_t seed, const std::filesystem::path& dir) {
  json doc = base.source;
  json* node = &doc;
  std::stringstream parts(axis);
  std::string part;
  std::vector<std::string> keys;
  while (std::getline(parts, part, '.')) keys.push_back(part);
  for (std::size_t i = 0; i + 1 < keys.size(); ++i) node = &(*node)[keys[i]];
  (*node)[keys.back()] = value;
  doc["seed"] = seed;
  doc["output_dir"] = dir.string();
  return doc;
}

inline void validate_axis(const std::string& axis, const std::vector<json>& values) {
  const auto& axes = sweepable_axes();
  if (std::find(axes.begin(), axes.end(), axis) == axes.end()) {
    fail(ErrorCode::BadAxis, "'" + axis + "' is not a sweepable scalar field");
  }
  if (values.empty()) fail(ErrorCode::BadAxis, "no values given for '" + axis + "'");
  for (const auto& v : values) {
    if (!v.is_primitive() || v.is_null()) fail(ErrorCode::BadAxis, "sweep values must be scalars");
  }
}

/// Runs the cross product values x seeds. Each cell writes its outputs to
/// <output_dir>/<cell_name>/ and is independent of the others, so `jobs > 1`
/// runs cells concurrently without changing any output. The aggregate table
/// goes to <output_dir>/sweep.csv.
inline SweepTable run_sweep(const ExperimentConfig& base, const std::string& axis,
                            const std::vector<json>& values, const std::vector<std::uint64_t>& seeds,
                            unsigned jobs = 1) {
  validate_axis(axis, values);
  if (seeds.empty()) fail(ErrorCode::BadAxis, "no seeds given");
  const auto root = resolve_output_dir(base);

  SweepTable table;
  table.axis = axis;
  std::vector<ExperimentConfig> configs;
  for (const auto& value : values) {
    for (std::uint64_t seed : seeds) {
      SweepCell cell;
      cell.value = value;
      cell.seed = seed;
      cell.cell_name = cell_name(axis, value, seed);
      configs.push_back(parse_config(cell_document(base, axis, value, seed, root / cell.cell_name)));
      table.cells.push_back(std::move(cell));
    }
  }

  jobs = std::max(1u, jobs);
  for (std::size_t start = 0; start < configs.size(); start += jobs) {
    const std::size_t stop = std::min(configs.size(), start + jobs);
    std::vector<std::future<SummaryRecord>> pending;
    for (std::size_t i = start; i < stop; ++i) {
      pending.push_back(std::async(std::launch::async, [&cfg = configs[i]] { return run_experiment(cfg); }));
    }
    for (std::size_t i = start; i < stop; ++i) table.cells[i].summary = pending[i - start].get();
  }

  std::vector<std::size_t> order(table.cells.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return table.cells[a].summary.min_grad_l1 < table.cells[b].summary.min_grad_l1;
  });
  for (std::size_t r = 0; r < order.size(); ++r) table.cells[order[r]].rank = r + 1;

  std::ostringstream csv;
  csv << "axis,value,seed,min_grad_l1,argmin_t,final_f,diverged,rank\n";
  for (const auto& c : table.cells) {
    csv << axis << ',' << scalar_text(c.value) << ',' << c.seed << ','
        << format_real(c.summary.min_grad_l1) << ',' << c.summary.argmin_t << ','
        << format_real(c.summary.final_f) << ',' << (c.summary.diverged ? "true" : "false") << ','
        << c.rank << '\n';
  }
  write_file(root / "sweep.csv", csv.str());
  return table;
}

}  // namespace optlab::harness
