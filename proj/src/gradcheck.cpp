#include "densedet/gradcheck.hpp"

#include <cmath>
#include <string>

#include "densedet/error.hpp"

namespace densedet {

double relative_error(double analytic, double numeric) {
  return std::abs(analytic - numeric) / std::max(1e-12, std::abs(analytic) + std::abs(numeric));
}

GradCheckResult grad_check_piecewise(const std::function<BranchValue(std::span<const double>)>& f,
                                     std::span<const double> params, std::span<const double> analytic,
                                     double eps) {
  if (analytic.size() != params.size()) throw Error(ErrorKind::Input, "analytic gradient length mismatch");
  if (!(eps > 0.0)) throw Error(ErrorKind::Input, "finite-difference step must be positive");
  std::vector<double> probe(params.begin(), params.end());
  const BranchValue base = f(probe);
  if (!std::isfinite(base.value)) throw Error(ErrorKind::Verification, "function is not finite at the base point");

  GradCheckResult r;
  for (std::size_t i = 0; i < probe.size(); ++i) {
    const double saved = probe[i];
    probe[i] = saved + eps;
    const BranchValue up = f(probe);
    probe[i] = saved - eps;
    const BranchValue down = f(probe);
    probe[i] = saved;
    if (!std::isfinite(up.value) || !std::isfinite(down.value))
      throw Error(ErrorKind::Verification, "function is not finite when probing coordinate " + std::to_string(i));
    if (up.branch != base.branch || down.branch != base.branch) {
      ++r.skipped;
      continue;
    }
    const double numeric = (up.value - down.value) / (2.0 * eps);
    const double err = relative_error(analytic[i], numeric);
    ++r.checked;
    if (err > r.max_rel_error) {
      r.max_rel_error = err;
      r.worst_index = i;
    }
  }
  return r;
}

GradCheckResult grad_check(const std::function<double(std::span<const double>)>& f,
                           std::span<const double> params, std::span<const double> analytic, double eps) {
  return grad_check_piecewise([&](std::span<const double> p) { return BranchValue{f(p), 0}; }, params, analytic,
                              eps);
}

}  // namespace densedet
