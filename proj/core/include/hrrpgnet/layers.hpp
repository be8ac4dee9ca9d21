#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "hrrpgnet/graphgen.hpp"
#include "hrrpgnet/numerics.hpp"

namespace hrrpgnet {

// Every layer exposes a forward pass that optionally records what its
// backward pass needs into a cache, and a backward pass that returns the
// gradient with respect to the layer input together with the gradients of
// its trainable tensors. Backward passes never touch the parameters.

// ---------------------------------------------------------------------------
// 1-D convolution, width 3, stride 1, zero same-padding.

struct Conv1dParams {
  /// out_channels x (in_channels * 3); entry (o, c * 3 + k) weights x[c][n + k - 1].
  Matrix kernels;
  /// out_channels x 1.
  Matrix bias;

  static Conv1dParams zeros(std::size_t in_channels, std::size_t out_channels);

  std::size_t in_channels() const noexcept { return kernels.cols() / 3; }
  std::size_t out_channels() const noexcept { return kernels.rows(); }
};

struct Conv1dCache {
  std::optional<Matrix> input;
};

struct Conv1dBackward {
  Matrix d_input;
  Conv1dParams d_params;
};

Matrix conv1d_forward(const Matrix& x, const Conv1dParams& p, Conv1dCache* cache = nullptr);
Conv1dBackward conv1d_backward(const Conv1dCache& cache, const Conv1dParams& p,
                               const Matrix& upstream);

// ---------------------------------------------------------------------------
// Batch normalization over (batch x positions) per channel.

struct BatchNormParams {
  Matrix gamma;  ///< channels x 1
  Matrix beta;   ///< channels x 1
  Matrix running_mean;
  Matrix running_var;
  double eps = 1e-5;
  double momentum = 0.1;

  static BatchNormParams make(std::size_t channels, double eps = 1e-5, double momentum = 0.1);

  std::size_t channels() const noexcept { return gamma.rows(); }
};

struct BatchNormCache {
  bool training = false;
  std::vector<Matrix> normalized;  ///< x-hat per batch element
  std::vector<double> inv_std;     ///< 1 / sqrt(var + eps) per channel
  std::vector<double> batch_mean;  ///< empty in eval mode
  std::vector<double> batch_var;   ///< population variance; empty in eval mode
};

struct BatchNormBackward {
  std::vector<Matrix> d_input;
  Matrix d_gamma;
  Matrix d_beta;
};

/// Training mode standardizes with population statistics of the batch and
/// requires at least two batch elements; eval mode uses the running statistics.
std::vector<Matrix> batchnorm_forward(std::span<const Matrix> x, const BatchNormParams& p,
                                      bool training, BatchNormCache* cache = nullptr);

/// running <- (1 - momentum) * running + momentum * batch, using the biased batch variance.
void batchnorm_update_running_stats(BatchNormParams& p, const BatchNormCache& cache);

BatchNormBackward batchnorm_backward(const BatchNormCache& cache, const BatchNormParams& p,
                                     std::span<const Matrix> upstream);

// ---------------------------------------------------------------------------
// Dense graph convolution: out = W1 V + W2 (V E) + B.

struct GraphConvParams {
  Matrix w1;    ///< out x in
  Matrix w2;    ///< out x in
  Matrix bias;  ///< out x N (per-node columns) or out x 1 (shared across nodes)

  static GraphConvParams zeros(std::size_t in_channels, std::size_t out_channels,
                               std::size_t nodes, bool shared_bias = false);

  bool shared_bias() const noexcept { return bias.cols() == 1; }
};

struct GraphConvCache {
  std::optional<Matrix> nodes;
  std::optional<Matrix> aggregated;  ///< V E
};

struct GraphConvBackward {
  Matrix d_input;
  GraphConvParams d_params;
};

/// Column i of the output is W1 v_i + W2 sum_j e(j,i) v_j + b_i. A 1-column
/// bias is shared by all nodes; with a per-node bias the node count must match.
Matrix graphconv_forward(const Matrix& nodes, const Matrix& adjacency, const GraphConvParams& p,
                         GraphConvCache* cache = nullptr);

/// `adjacency` must be the matrix used in the matching forward call.
GraphConvBackward graphconv_backward(const GraphConvCache& cache, const Matrix& adjacency,
                                     const GraphConvParams& p, const Matrix& upstream);

/// Same layer with the adjacency in factored form.
Matrix graphconv_forward(const Matrix& nodes, const FactoredAdjacency& adjacency,
                         const GraphConvParams& p, GraphConvCache* cache = nullptr);
GraphConvBackward graphconv_backward(const GraphConvCache& cache, const FactoredAdjacency& adjacency,
                                     const GraphConvParams& p, const Matrix& upstream);

// ---------------------------------------------------------------------------
// Attention pooling over nodes.

struct AttentionParams {
  Matrix weight;  ///< features x 1
  Matrix bias;    ///< 1 x 1

  static AttentionParams zeros(std::size_t features);
};

struct AttentionCache {
  std::optional<Matrix> nodes;
  std::vector<double> weights;  ///< softmax over node scores
  std::vector<double> pooled;
};

struct AttentionBackward {
  Matrix d_input;
  AttentionParams d_params;
};

/// One score per node, s_i = v_i . w + b; softmax over nodes.
std::vector<double> attention_weights(const Matrix& nodes, const AttentionParams& p);

/// Convex combination of node columns weighted by attention_weights.
std::vector<double> attention_pool(const Matrix& nodes, const AttentionParams& p,
                                   AttentionCache* cache = nullptr);

AttentionBackward attention_backward(const AttentionCache& cache, const AttentionParams& p,
                                     std::span<const double> upstream);

/// Uniform-weight pooling used when attention is disabled.
std::vector<double> mean_pool(const Matrix& nodes);
Matrix mean_pool_backward(std::size_t nodes, std::span<const double> upstream);

// ---------------------------------------------------------------------------
// Fully connected head.

struct DenseParams {
  Matrix weight;  ///< out x in
  Matrix bias;    ///< out x 1

  static DenseParams zeros(std::size_t in_features, std::size_t out_features);
};

struct DenseCache {
  std::vector<double> input;
  bool valid = false;
};

struct DenseBackward {
  std::vector<double> d_input;
  DenseParams d_params;
};

std::vector<double> dense_forward(std::span<const double> v, const DenseParams& p,
                                  DenseCache* cache = nullptr);
DenseBackward dense_backward(const DenseCache& cache, const DenseParams& p,
                             std::span<const double> upstream);

}  // namespace hrrpgnet
