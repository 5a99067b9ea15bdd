#pragma once

// Central finite-difference verification of analytic gradients.

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include "ambc/types.hpp"

namespace ambc::nn {

struct GradCheckOptions {
  double step = 1e-4;
  /// Scale the step by max(1, |p|).
  bool relative_step = true;
  double tolerance = 1e-4;
  /// Denominator floor for the relative error of near-zero gradients.
  double abs_floor = 1e-6;
  /// Re-differentiate with step/2 and skip coordinates whose two estimates
  /// disagree, which happens only when the perturbation straddles a ReLU kink.
  bool skip_nonsmooth = false;
};

struct GradCheckFailure {
  Index index;
  double analytic;
  double numeric;
  double rel_error;
};

struct GradCheckReport {
  double max_rel_error = 0.0;
  Index worst_index = -1;
  Index checked = 0;
  Index skipped_nonsmooth = 0;
  std::vector<GradCheckFailure> failures;

  bool passed() const { return failures.empty(); }
};

inline double relative_error(double a, double b, double floor) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

/// `loss()` evaluates the scalar objective reading `params` in place; `analytic`
/// holds its gradient at the unperturbed point. Params are restored on return.
template <typename Scalar, typename LossFn>
GradCheckReport grad_check(LossFn&& loss, std::span<Scalar> params, std::span<const Scalar> analytic,
                           const GradCheckOptions& opts = {}) {
  GradCheckReport report;
  auto central = [&](std::size_t i, double h) {
    const Scalar saved = params[i];
    params[i] = static_cast<Scalar>(saved + h);
    const double up = loss();
    params[i] = static_cast<Scalar>(saved - h);
    const double down = loss();
    params[i] = saved;
    return (up - down) / (2.0 * h);
  };
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double h = opts.relative_step ? opts.step * std::max(1.0, std::abs(double(params[i]))) : opts.step;
    const double numeric = central(i, h);
    if (opts.skip_nonsmooth) {
      const double half = central(i, h / 2);
      if (relative_error(numeric, half, opts.abs_floor) > opts.tolerance) {
        ++report.skipped_nonsmooth;
        continue;
      }
    }
    ++report.checked;
    const double a = analytic[i];
    const double err = relative_error(a, numeric, opts.abs_floor);
    if (err > report.max_rel_error) {
      report.max_rel_error = err;
      report.worst_index = static_cast<Index>(i);
    }
    if (err > opts.tolerance) report.failures.push_back({static_cast<Index>(i), a, numeric, err});
  }
  return report;
}

}  // namespace ambc::nn
