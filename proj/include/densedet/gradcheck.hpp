#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace densedet {

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::size_t worst_index = 0;
  std::size_t checked = 0;
  std::size_t skipped = 0;  // probes that crossed a non-differentiable point
};

// Central differences per coordinate against an analytic gradient. The
// per-coordinate error is |g_a - g_fd| / max(1e-12, |g_a| + |g_fd|).
// Throws Error(Verification) naming the coordinate if f is non-finite at a
// probe.
GradCheckResult grad_check(const std::function<double(std::span<const double>)>& f,
                           std::span<const double> params, std::span<const double> analytic, double eps = 1e-4);

// For piecewise-smooth functions: f also reports a signature of its active
// branch (e.g. ReLU masks). Coordinates whose probes land on a different
// branch than the base point are skipped and counted.
struct BranchValue {
  double value = 0.0;
  std::uint64_t branch = 0;
};

GradCheckResult grad_check_piecewise(const std::function<BranchValue(std::span<const double>)>& f,
                                     std::span<const double> params, std::span<const double> analytic,
                                     double eps = 1e-4);

double relative_error(double analytic, double numeric);

}  // namespace densedet
