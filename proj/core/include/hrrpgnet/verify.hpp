#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace hrrpgnet {

/// One finite-difference comparison: a layer (or model configuration), the
/// tensor that was perturbed, and the worst relative error over its entries.
struct GradcheckEntry {
  std::string layer;
  std::string tensor;
  double max_relative_error = 0.0;
};

/// Layers accepted by run_gradient_checks: conv1d, batchnorm, graphconv,
/// attention, dense, model.
const std::vector<std::string>& gradcheck_layers();

/// Draws small random shapes and inputs from `seed` and compares analytic
/// gradients with central differences for every input and parameter tensor of
/// `layer`. "model" checks the whole network under all seven module
/// combinations (N <= 8, channels <= 4, C = 3). Throws ConfigError for an
/// unknown layer name.
std::vector<GradcheckEntry> run_gradient_checks(std::string_view layer, std::uint64_t seed);

}  // namespace hrrpgnet
