#include "hrrpgnet/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "hrrpgnet/error.hpp"

namespace hrrpgnet {

Matrix numeric_gradient(const std::function<double(const Matrix&)>& f, const Matrix& theta,
                        double step) {
  if (!(step > 0.0)) throw ConfigError("finite difference step must be positive");
  Matrix probe = theta;
  Matrix grad(theta.rows(), theta.cols());
  auto p = probe.values();
  auto g = grad.values();
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double original = p[i];
    p[i] = original + step;
    const double up = f(probe);
    p[i] = original - step;
    const double down = f(probe);
    p[i] = original;
    if (!std::isfinite(up) || !std::isfinite(down)) {
      throw NumericError("finite difference probe produced a non-finite value at coordinate " +
                         std::to_string(i));
    }
    g[i] = (up - down) / (2.0 * step);
  }
  return grad;
}

double finite_diff_check(const std::function<double(const Matrix&)>& f, const Matrix& theta,
                         const Matrix& analytic, double step) {
  require_same_shape(theta, analytic, "finite_diff_check");
  const Matrix numeric = numeric_gradient(f, theta, step);
  double worst = 0.0;
  auto a = analytic.values();
  auto n = numeric.values();
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double scale = std::max({1.0, std::abs(a[i]), std::abs(n[i])});
    worst = std::max(worst, std::abs(a[i] - n[i]) / scale);
  }
  return worst;
}

}  // namespace hrrpgnet
