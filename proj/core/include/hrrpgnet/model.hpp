#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "hrrpgnet/graphgen.hpp"
#include "hrrpgnet/layers.hpp"
#include "hrrpgnet/numerics.hpp"

namespace hrrpgnet {

/// Which of the three network modules are active: local convolution (a),
/// graph convolution (b), attention pooling (c).
struct AblationConfig {
  bool local_conv = true;
  bool graph_conv = true;
  bool attention = true;

  /// Letters of the enabled modules in "abc" order, e.g. "ac".
  std::string code() const;

  /// Parses a nonempty subset of "abc" in any order. Throws ConfigError.
  static AblationConfig parse(std::string_view code);

  /// The seven legal configurations in table order: a, b, c, ab, ac, bc, abc.
  static std::array<AblationConfig, 7> table_rows();

  void validate() const;

  friend bool operator==(const AblationConfig&, const AblationConfig&) = default;
};

struct ModelConfig {
  std::size_t cells = 501;           ///< N, range cells per profile
  std::size_t conv_channels = 16;    ///< D_out
  std::size_t graph_channels = 32;   ///< G_out
  std::size_t classes = 3;           ///< C
  double leaky_slope = 0.01;
  double bn_eps = 1e-5;
  double bn_momentum = 0.1;
  bool shared_graph_bias = false;    ///< one bias column for all nodes instead of per-node
  AblationConfig ablation;
  std::uint64_t seed = 0;

  void validate() const;

  /// Channels entering the graph convolution (D_out with local conv, else 1).
  std::size_t graph_input_channels() const;
  /// Feature length entering the pooling head.
  std::size_t head_features() const;

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

struct LayerTensors {
  Conv1dParams conv1;
  BatchNormParams bn1;
  Conv1dParams conv2;
  BatchNormParams bn2;
  GraphConvParams gconv;
  AttentionParams att;
  DenseParams fc;
};

struct TensorRef {
  std::string_view name;
  Matrix* value;
  Matrix* grad;
};

struct ConstTensorRef {
  std::string_view name;
  const Matrix* value;
};

/// All tensors of the network plus a gradient slot mirroring each one.
/// Tensors of disabled modules exist but never receive gradient.
struct ModelParams {
  LayerTensors value;
  LayerTensors grad;
  std::uint64_t step = 0;

  /// Trainable tensors in a fixed order.
  std::vector<TensorRef> trainable();

  /// Every stored tensor (trainable and BN running statistics) in a fixed order.
  std::vector<ConstTensorRef> all_tensors() const;
  Matrix& tensor(std::string_view name);

  void zero_grad();
};

/// Uniform(-sqrt(1/fan_in), +sqrt(1/fan_in)) weights, zero biases, unit BN
/// scale and running variance. Deterministic in config.seed.
ModelParams init_params(const ModelConfig& config);

/// Throws ShapeError naming the first tensor whose shape disagrees with config.
void validate_params(const ModelParams& params, const ModelConfig& config);

// ---------------------------------------------------------------------------

struct SampleCache {
  std::size_t cells = 0;
  std::optional<FactoredAdjacency> adjacency;
  Matrix head_input;  ///< node features entering the pooling head
  GraphConvCache gconv;
  AttentionCache att;
  DenseCache fc;
  std::vector<double> log_probs;
};

struct ForwardCache {
  bool valid = false;
  bool training = false;
  ModelConfig config;
  std::vector<Conv1dCache> conv1;
  BatchNormCache bn1;
  std::vector<Matrix> pre_act1;
  std::vector<Conv1dCache> conv2;
  BatchNormCache bn2;
  std::vector<Matrix> pre_act2;
  std::vector<SampleCache> samples;
};

struct BatchForward {
  std::vector<std::vector<double>> log_probs;
  ForwardCache cache;
};

struct ForwardResult {
  std::vector<double> log_probs;
  ForwardCache cache;
};

/// Runs the configured pipeline on a batch. In training mode with local conv
/// enabled, batch normalization uses batch statistics and needs >= 2 samples.
BatchForward forward_batch(std::span<const HrrpSample> samples, const ModelParams& params,
                           const ModelConfig& config, bool training);

ForwardResult forward(const HrrpSample& sample, const ModelParams& params,
                      const ModelConfig& config, bool training);

/// Cross entropy against a one-hot target: -log_probs[label].
double loss(std::span<const double> log_probs, std::size_t label);

/// Mean of loss over a batch.
double batch_loss(std::span<const std::vector<double>> log_probs,
                  std::span<const std::size_t> labels);

/// Overwrites params.grad with the gradient of the mean batch loss.
void backward(const ForwardCache& cache, std::span<const std::size_t> labels,
              ModelParams& params);

/// Folds the batch statistics of a training-mode forward into the BN running stats.
void apply_running_stats(const ForwardCache& cache, ModelParams& params);

/// Index of the largest log-probability, ties to the lowest index.
std::size_t argmax(std::span<const double> values);

/// Eval-mode prediction.
std::size_t predict(const HrrpSample& sample, const ModelParams& params, const ModelConfig& config);

// ---------------------------------------------------------------------------

struct Checkpoint {
  ModelConfig config;
  ModelParams params;
};

/// JSON container: config, step counter, and every tensor by name with shape
/// and row-major values. Doubles round-trip exactly.
void save_checkpoint(const std::filesystem::path& path, const ModelConfig& config,
                     const ModelParams& params);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace hrrpgnet
