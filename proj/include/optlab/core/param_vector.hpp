#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "optlab/error.hpp"

namespace optlab {

/// Dense vector of doubles indexed by coordinate. Holds iterates, gradients,
/// moments, and per-coordinate constants. The length never changes after
/// construction.
class ParamVector {
 public:
  ParamVector() = default;
  explicit ParamVector(std::size_t d, double fill = 0.0) : values_(d, fill) {}
  ParamVector(std::initializer_list<double> values) : values_(values) {}
  explicit ParamVector(std::vector<double> values) : values_(std::move(values)) {}

  static ParamVector zeros(std::size_t d) { return ParamVector(d, 0.0); }

  std::size_t size() const noexcept { return values_.size(); }
  bool empty() const noexcept { return values_.empty(); }

  double& operator[](std::size_t j) { return values_[j]; }
  double operator[](std::size_t j) const { return values_[j]; }

  auto begin() noexcept { return values_.begin(); }
  auto end() noexcept { return values_.end(); }
  auto begin() const noexcept { return values_.begin(); }
  auto end() const noexcept { return values_.end(); }

  std::span<const double> view() const noexcept { return values_; }
  const std::vector<double>& values() const noexcept { return values_; }

  bool all_finite() const noexcept {
    return std::all_of(values_.begin(), values_.end(), [](double x) { return std::isfinite(x); });
  }

  bool operator==(const ParamVector&) const = default;

 private:
  std::vector<double> values_;
};

inline void require_nonempty(const ParamVector& v, const char* what) {
  if (v.empty()) fail(ErrorCode::EmptyVector, std::string(what) + " must have at least one entry");
}

inline void require_finite(const ParamVector& v, const char* what) {
  if (!v.all_finite()) fail(ErrorCode::NonFinite, std::string(what) + " has a non-finite entry");
}

inline void require_same_length(const ParamVector& a, const ParamVector& b, const char* what) {
  if (a.size() != b.size()) {
    fail(ErrorCode::LengthMismatch, std::string(what) + ": lengths " + std::to_string(a.size()) +
                                        " and " + std::to_string(b.size()));
  }
}

/// Element-wise combination of two equal-length vectors.
template <typename BinaryOp>
ParamVector zip_with(const ParamVector& a, const ParamVector& b, BinaryOp op) {
  require_same_length(a, b, "zip_with");
  ParamVector out(a.size());
  for (std::size_t j = 0; j < a.size(); ++j) out[j] = op(a[j], b[j]);
  return out;
}

template <typename UnaryOp>
ParamVector map(const ParamVector& a, UnaryOp op) {
  ParamVector out(a.size());
  for (std::size_t j = 0; j < a.size(); ++j) out[j] = op(a[j]);
  return out;
}

inline ParamVector operator+(const ParamVector& a, const ParamVector& b) {
  return zip_with(a, b, [](double x, double y) { return x + y; });
}
inline ParamVector operator-(const ParamVector& a, const ParamVector& b) {
  return zip_with(a, b, [](double x, double y) { return x - y; });
}
inline ParamVector operator*(double s, const ParamVector& a) {
  return map(a, [s](double x) { return s * x; });
}
inline ParamVector operator*(const ParamVector& a, double s) { return s * a; }

inline double dot(const ParamVector& a, const ParamVector& b) {
  require_same_length(a, b, "dot");
  double acc = 0.0;
  for (std::size_t j = 0; j < a.size(); ++j) acc += a[j] * b[j];
  return acc;
}

enum class Norm { L1, L2, Inf };

inline double norm(const ParamVector& v, Norm p) {
  double acc = 0.0;
  switch (p) {
    case Norm::L1:
      for (double x : v) acc += std::abs(x);
      return acc;
    case Norm::L2:
      for (double x : v) acc += x * x;
      return std::sqrt(acc);
    case Norm::Inf:
      for (double x : v) acc = std::max(acc, std::abs(x));
      return acc;
  }
  return acc;
}

}  // namespace optlab
