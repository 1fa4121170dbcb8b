#pragma once

// Explicit Runge-Kutta steppers shared by the pure-state and density-matrix
// propagators. State is any Eigen dense complex object (vector or matrix).

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <string>

#include "catres/errors.hpp"

namespace catres::integrators {

struct StepStats {
  std::size_t accepted = 0;
  std::size_t rejected = 0;
  std::size_t rhs_calls = 0;
  double max_error_ratio = 0.0;  // largest accepted local error / tolerance
};

/// Dormand-Prince 5(4) with FSAL and max-norm error control.
///
/// Integrates y' = f(t, y) from t0 to t1, landing exactly on t1. `h` carries
/// the step-size suggestion between calls; pass h <= 0 to pick one.
template <class State, class Rhs>
void dopri5_advance(Rhs&& f, double t0, double t1, State& y, double rtol, double atol, double& h,
                    StepStats& stats, std::size_t max_steps = 50'000'000) {
  constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
  constexpr double a21 = 1.0 / 5;
  constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
  constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
  constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                   a54 = -212.0 / 729;
  constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247,
                   a64 = 49.0 / 176, a65 = -5103.0 / 18656;
  constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192, b5 = -2187.0 / 6784,
                   b6 = 11.0 / 84;
  constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920,
                   e5 = -17253.0 / 339200, e6 = 22.0 / 525, e7 = -1.0 / 40;

  const double span = t1 - t0;
  if (span <= 0.0) return;
  if (rtol < 10.0 * std::numeric_limits<double>::epsilon()) {
    throw IntegrationError("relative tolerance " + std::to_string(rtol) + " is below machine precision", 0.0);
  }

  State k1 = f(t0, y);
  ++stats.rhs_calls;
  if (h <= 0.0) {
    const double fy = k1.cwiseAbs().maxCoeff();
    const double yy = std::max(y.cwiseAbs().maxCoeff(), 1e-300);
    h = fy > 0.0 ? 0.01 * yy / fy : span;
  }

  double t = t0;
  std::size_t steps = 0;
  while (t < t1) {
    if (++steps > max_steps) {
      throw IntegrationError("adaptive integrator exceeded its step budget", stats.max_error_ratio);
    }
    const bool last = t + h >= t1 - 1e-14 * std::abs(t1);
    const double step = last ? t1 - t : h;

    const State k2 = f(t + c2 * step, (y + step * a21 * k1).eval());
    const State k3 = f(t + c3 * step, (y + step * (a31 * k1 + a32 * k2)).eval());
    const State k4 = f(t + c4 * step, (y + step * (a41 * k1 + a42 * k2 + a43 * k3)).eval());
    const State k5 =
        f(t + c5 * step, (y + step * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4)).eval());
    const State k6 = f(t + step,
                       (y + step * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5)).eval());
    State y_new = y + step * (b1 * k1 + b3 * k3 + b4 * k4 + b5 * k5 + b6 * k6);
    State k7 = f(t + step, y_new);
    stats.rhs_calls += 6;

    const auto err = (step * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7)).eval();
    const auto scale =
        (atol + rtol * y.cwiseAbs().array().max(y_new.cwiseAbs().array())).eval();
    const double ratio = (err.cwiseAbs().array() / scale).maxCoeff();

    const double factor =
        ratio == 0.0 ? 5.0 : std::clamp(0.9 * std::pow(ratio, -0.2), 0.2, 5.0);
    if (ratio <= 1.0) {
      t = last ? t1 : t + step;
      y = std::move(y_new);
      k1 = std::move(k7);
      ++stats.accepted;
      stats.max_error_ratio = std::max(stats.max_error_ratio, ratio);
      // keep the suggestion from being shrunk by a short landing step
      if (!last || step >= h) h = step * factor;
    } else {
      ++stats.rejected;
      h = step * factor;
    }
    if (h < 1e-15 * std::max(std::abs(t), std::abs(span))) {
      throw IntegrationError("adaptive step size underflow at t = " + std::to_string(t), ratio);
    }
  }
}

/// Classical fourth-order Runge-Kutta over [t0, t1] in n equal substeps.
template <class State, class Rhs>
void rk4_advance(Rhs&& f, double t0, double t1, State& y, std::size_t n) {
  const double h = (t1 - t0) / static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double t = t0 + static_cast<double>(i) * h;
    const State k1 = f(t, y);
    const State k2 = f(t + 0.5 * h, (y + 0.5 * h * k1).eval());
    const State k3 = f(t + 0.5 * h, (y + 0.5 * h * k2).eval());
    const State k4 = f(t + h, (y + h * k3).eval());
    y += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  }
}

}  // namespace catres::integrators
