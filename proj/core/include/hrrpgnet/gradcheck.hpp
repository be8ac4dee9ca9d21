#pragma once

#include <functional>

#include "hrrpgnet/numerics.hpp"

namespace hrrpgnet {

inline constexpr double kFiniteDiffStep = 1e-4;
inline constexpr double kGradientTolerance = 1e-4;

/// Central-difference oracle for a scalar function of one tensor.
///
/// Returns the maximum over coordinates of
///   |analytic - numeric| / max(1, |analytic|, |numeric|)
/// where numeric = (f(theta + h e) - f(theta - h e)) / 2h. Throws NumericError
/// if f returns a non-finite value at any probe point.
double finite_diff_check(const std::function<double(const Matrix&)>& f, const Matrix& theta,
                         const Matrix& analytic, double step = kFiniteDiffStep);

/// Numeric gradient of f at theta by central differences.
Matrix numeric_gradient(const std::function<double(const Matrix&)>& f, const Matrix& theta,
                        double step = kFiniteDiffStep);

}  // namespace hrrpgnet
