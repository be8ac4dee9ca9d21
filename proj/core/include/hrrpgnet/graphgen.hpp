#pragma once

#include <cstddef>
#include <memory>
#include <span>
#include <vector>

#include "hrrpgnet/numerics.hpp"

namespace hrrpgnet {

/// One range profile: magnitudes of N range cells and its class index.
struct HrrpSample {
  std::vector<double> amplitudes;
  std::size_t label = 0;

  std::size_t cells() const noexcept { return amplitudes.size(); }
  friend bool operator==(const HrrpSample&, const HrrpSample&) = default;
};

/// Fully connected range-cell graph. Node features start as the 1xN amplitude row.
struct HrrpGraph {
  Matrix node_features;
  Matrix adjacency;
};

/// Edge weights e(i,j) = h_i * h_j / (|i - j| + 1), self-loops included.
///
/// Built as the outer product h h^T divided elementwise by the range-distance
/// kernel, so the result is exactly symmetric and e(i,i) == h_i^2.
Matrix build_adjacency(std::span<const double> amplitudes);

HrrpGraph build_graph(const HrrpSample& sample);

/// K(i,j) = 1 / (|i - j| + 1). Depends only on N and can be shared by every
/// profile of that length.
Matrix distance_kernel(std::size_t cells);

/// The same adjacency kept as E = diag(h) K diag(h), so the N x N matrix is
/// never built per sample.
class FactoredAdjacency {
 public:
  FactoredAdjacency(std::span<const double> amplitudes, std::shared_ptr<const Matrix> kernel);

  std::size_t nodes() const noexcept { return amplitudes_.size(); }
  std::span<const double> amplitudes() const noexcept { return amplitudes_; }

  /// X E for X with N columns. E is symmetric, so this is also X E^T.
  Matrix right_multiply(const Matrix& x) const;
  Matrix dense() const;

 private:
  std::vector<double> amplitudes_;
  std::shared_ptr<const Matrix> kernel_;
};

}  // namespace hrrpgnet
