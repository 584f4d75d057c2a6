#pragma once

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "optlab/error.hpp"
#include "optlab/optimizers.hpp"
#include "optlab/smoothness.hpp"

namespace optlab::harness {

/// 17 significant digits, enough to round-trip any double.
inline std::string format_real(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

/// JSON has no inf/nan; those are written as strings.
inline nlohmann::json json_real(double x) {
  if (std::isfinite(x)) return x;
  if (std::isnan(x)) return "nan";
  return x > 0 ? "inf" : "-inf";
}

inline nlohmann::json json_vector(const ParamVector& v) {
  nlohmann::json out = nlohmann::json::array();
  for (double x : v) out.push_back(json_real(x));
  return out;
}

inline std::size_t snapshot_width(std::span<const TrajectoryRecord> records) {
  for (const auto& r : records) {
    if (r.x_snapshot) return r.x_snapshot->size();
  }
  return 0;
}

/// Columns t,f_value,grad_l1,grad_l2,update_linf then x_0.. when snapshots
/// were kept.
inline std::string trajectory_csv(std::span<const TrajectoryRecord> records) {
  std::ostringstream out;
  const std::size_t width = snapshot_width(records);
  out << "t,f_value,grad_l1,grad_l2,update_linf";
  for (std::size_t j = 0; j < width; ++j) out << ",x_" << j;
  out << '\n';
  for (const auto& r : records) {
    out << r.t << ',' << format_real(r.f_value) << ',' << format_real(r.grad_l1) << ','
        << format_real(r.grad_l2) << ',' << format_real(r.update_linf);
    if (width > 0) {
      for (std::size_t j = 0; j < width; ++j) {
        out << ',' << (r.x_snapshot ? format_real((*r.x_snapshot)[j]) : std::string());
      }
    }
    out << '\n';
  }
  return out.str();
}

/// Columns t,j,grad_magnitude,local_lipschitz; j is blank for global samples.
inline std::string smoothness_csv(std::span<const SmoothnessSample> samples) {
  std::ostringstream out;
  out << "t,j,grad_magnitude,local_lipschitz\n";
  for (const auto& s : samples) {
    out << s.t << ',';
    if (s.coordinate) out << *s.coordinate;
    out << ',' << format_real(s.grad_magnitude) << ',' << format_real(s.local_lipschitz) << '\n';
  }
  return out.str();
}

inline void write_file(const std::filesystem::path& path, const std::string& contents) {
  std::error_code ec;
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path(), ec);
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) fail(ErrorCode::Io, "cannot open " + path.string() + " for writing");
  f << contents;
  if (!f) fail(ErrorCode::Io, "failed writing " + path.string());
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) fail(ErrorCode::Io, "cannot read " + path.string());
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

}  // namespace optlab::harness
