#include "hrrpgnet/graphgen.hpp"

#include <cmath>
#include <string>

#include "hrrpgnet/error.hpp"

namespace hrrpgnet {

Matrix build_adjacency(std::span<const double> amplitudes) {
  const std::size_t n = amplitudes.size();
  if (n == 0) throw ShapeError("build_adjacency: empty amplitude vector");
  if (!all_finite(amplitudes)) throw NumericError("build_adjacency: non-finite amplitude");

  Matrix e(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    const double hi = amplitudes[i];
    auto row = e.row_span(i);
    for (std::size_t j = 0; j < n; ++j) {
      const std::size_t dist = i > j ? i - j : j - i;
      row[j] = (hi * amplitudes[j]) / static_cast<double>(dist + 1);
    }
  }
  return e;
}

HrrpGraph build_graph(const HrrpSample& sample) {
  return HrrpGraph{Matrix::row(sample.amplitudes), build_adjacency(sample.amplitudes)};
}

Matrix distance_kernel(std::size_t cells) {
  if (cells == 0) throw ShapeError("distance_kernel: zero cells");
  Matrix k(cells, cells);
  for (std::size_t i = 0; i < cells; ++i) {
    for (std::size_t j = 0; j < cells; ++j) {
      const std::size_t dist = i > j ? i - j : j - i;
      k(i, j) = 1.0 / static_cast<double>(dist + 1);
    }
  }
  return k;
}

FactoredAdjacency::FactoredAdjacency(std::span<const double> amplitudes,
                                     std::shared_ptr<const Matrix> kernel)
    : amplitudes_(amplitudes.begin(), amplitudes.end()), kernel_(std::move(kernel)) {
  if (amplitudes_.empty()) throw ShapeError("FactoredAdjacency: empty amplitude vector");
  if (!all_finite(amplitudes_)) throw NumericError("FactoredAdjacency: non-finite amplitude");
  if (!kernel_ || kernel_->rows() != nodes() || kernel_->cols() != nodes()) {
    throw ShapeError("FactoredAdjacency: kernel does not match " + std::to_string(nodes()) +
                     " cells");
  }
}

Matrix FactoredAdjacency::right_multiply(const Matrix& x) const {
  if (x.cols() != nodes()) {
    throw ShapeError("FactoredAdjacency: cannot multiply " + x.shape_string() + " by " +
                     std::to_string(nodes()) + "x" + std::to_string(nodes()));
  }
  Matrix scaled = x;
  for (std::size_t r = 0; r < scaled.rows(); ++r) {
    auto row = scaled.row_span(r);
    for (std::size_t i = 0; i < row.size(); ++i) row[i] *= amplitudes_[i];
  }
  Matrix out = matmul(scaled, *kernel_);
  for (std::size_t r = 0; r < out.rows(); ++r) {
    auto row = out.row_span(r);
    for (std::size_t j = 0; j < row.size(); ++j) row[j] *= amplitudes_[j];
  }
  return out;
}

Matrix FactoredAdjacency::dense() const { return build_adjacency(amplitudes_); }

}  // namespace hrrpgnet
