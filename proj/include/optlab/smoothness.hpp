#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "optlab/core/param_vector.hpp"
#include "optlab/error.hpp"
#include "optlab/problems.hpp"

namespace optlab {

/// One point of an (L0, L1) scatter plot: local Lipschitz estimate against
/// gradient magnitude. `coordinate` is empty for the global (norm) form.
struct SmoothnessSample {
  double grad_magnitude = 0.0;
  double local_lipschitz = 0.0;
  std::size_t t = 0;
  std::optional<std::size_t> coordinate;
};

struct L0L1Fit {
  double L0_hat = 0.0;
  double L1_hat = 0.0;
  double residual_rms = 0.0;
  std::size_t n_samples = 0;
};

inline const std::vector<double>& default_sample_locations() {
  static const std::vector<double> locations{1.0 / 6, 2.0 / 6, 3.0 / 6, 4.0 / 6, 5.0 / 6};
  return locations;
}

/// L_hat = max over gamma of ||grad F(x_t + gamma d) - grad F(x_t)||_2 / ||gamma d||_2
/// with d = x_next - x_t, paired with ||grad F(x_t)||_2.
inline SmoothnessSample estimate_global_smoothness(
    const Problem& problem, const ParamVector& x_t, const ParamVector& x_next,
    std::span<const double> locations = default_sample_locations(), std::size_t t = 0) {
  require_same_length(x_t, x_next, "estimate_global_smoothness");
  if (locations.empty()) fail(ErrorCode::SpecViolation, "sample locations must be nonempty");
  const ParamVector d = x_next - x_t;
  const double d_norm = norm(d, Norm::L2);
  if (d_norm == 0.0) fail(ErrorCode::ZeroDisplacement, "x_next equals x_t");

  const ParamVector g0 = problem.gradient(x_t);
  double best = 0.0;
  for (double gamma : locations) {
    if (!(gamma > 0.0 && gamma <= 1.0)) {
      fail(ErrorCode::SpecViolation, "sample locations must lie in (0, 1]");
    }
    const ParamVector g = problem.gradient(x_t + gamma * d);
    best = std::max(best, norm(g - g0, Norm::L2) / (gamma * d_norm));
  }
  return {norm(g0, Norm::L2), best, t, std::nullopt};
}

/// Per moved coordinate: |d_jF(x_next) - d_jF(x_t)| / |x_next_j - x_t_j|
/// against min(|d_jF(x_t)|, |d_jF(x_next)|). Unmoved coordinates are skipped.
inline std::vector<SmoothnessSample> estimate_coordinate_smoothness(const Problem& problem,
                                                                    const ParamVector& x_t,
                                                                    const ParamVector& x_next,
                                                                    std::size_t t = 0) {
  require_same_length(x_t, x_next, "estimate_coordinate_smoothness");
  const ParamVector g0 = problem.gradient(x_t);
  const ParamVector g1 = problem.gradient(x_next);
  std::vector<SmoothnessSample> out;
  for (std::size_t j = 0; j < x_t.size(); ++j) {
    const double dx = x_next[j] - x_t[j];
    if (dx == 0.0) continue;
    out.push_back({std::min(std::abs(g0[j]), std::abs(g1[j])), std::abs(g1[j] - g0[j]) / std::abs(dx),
                   t, j});
  }
  if (out.empty()) fail(ErrorCode::NoCoordinateMoved, "no coordinate moved");
  return out;
}

/// Ordinary least squares of local_lipschitz on grad_magnitude. Uses centred
/// sums so the result does not depend on sample order beyond rounding.
inline L0L1Fit fit_l0l1(std::span<const SmoothnessSample> samples) {
  const std::size_t n = samples.size();
  if (n < 2) fail(ErrorCode::DegenerateDesign, "need at least two samples");

  double mean_x = 0.0;
  double mean_y = 0.0;
  for (const auto& s : samples) {
    mean_x += s.grad_magnitude;
    mean_y += s.local_lipschitz;
  }
  mean_x /= static_cast<double>(n);
  mean_y /= static_cast<double>(n);

  double sxx = 0.0;
  double sxy = 0.0;
  for (const auto& s : samples) {
    const double dx = s.grad_magnitude - mean_x;
    sxx += dx * dx;
    sxy += dx * (s.local_lipschitz - mean_y);
  }
  const bool all_equal = std::all_of(samples.begin(), samples.end(), [&](const auto& s) {
    return s.grad_magnitude == samples.front().grad_magnitude;
  });
  if (all_equal || sxx == 0.0) fail(ErrorCode::DegenerateDesign, "all grad magnitudes are equal");

  L0L1Fit fit;
  fit.L1_hat = sxy / sxx;
  fit.L0_hat = mean_y - fit.L1_hat * mean_x;
  double sse = 0.0;
  for (const auto& s : samples) {
    const double r = s.local_lipschitz - (fit.L0_hat + fit.L1_hat * s.grad_magnitude);
    sse += r * r;
  }
  fit.residual_rms = std::sqrt(sse / static_cast<double>(n));
  fit.n_samples = n;
  return fit;
}

}  // namespace optlab
