#include "hrrpgnet/layers.hpp"

#include <cmath>
#include <string>

#include "hrrpgnet/error.hpp"

namespace hrrpgnet {

namespace {

template <typename T>
const T& require_cached(const std::optional<T>& slot, const char* layer) {
  if (!slot) throw UsageError(std::string(layer) + ": backward called without a cached forward");
  return *slot;
}

// out[i] += left * in[i-1] + mid * in[i] + right * in[i+1] for i in [0, count);
// in[-1] and in[count] must be readable.
void three_tap(double* __restrict out, const double* __restrict in, std::size_t count,
               double left, double mid, double right) {
  for (std::size_t i = 0; i < count; ++i) {
    out[i] += mid * in[i] + left * in[i - 1] + right * in[i + 1];
  }
}

void require_length(std::span<const double> v, std::size_t expected, const char* context) {
  if (v.size() != expected) {
    throw ShapeError(std::string(context) + ": expected length " + std::to_string(expected) +
                     ", got " + std::to_string(v.size()));
  }
}

}  // namespace

// ---------------------------------------------------------------------------

Conv1dParams Conv1dParams::zeros(std::size_t in_channels, std::size_t out_channels) {
  return {Matrix(out_channels, in_channels * 3), Matrix(out_channels, 1)};
}

Matrix conv1d_forward(const Matrix& x, const Conv1dParams& p, Conv1dCache* cache) {
  const std::size_t in_ch = p.in_channels();
  const std::size_t out_ch = p.out_channels();
  if (x.rows() != in_ch) {
    throw ShapeError("conv1d: input has " + std::to_string(x.rows()) +
                     " channels, kernels expect " + std::to_string(in_ch));
  }
  if (p.bias.rows() != out_ch || p.bias.cols() != 1) {
    throw ShapeError("conv1d: bias shape " + p.bias.shape_string() + " does not match " +
                     std::to_string(out_ch) + " output channels");
  }
  const std::size_t n = x.cols();
  Matrix y(out_ch, n);
  for (std::size_t o = 0; o < out_ch; ++o) {
    auto out = y.row_span(o);
    for (std::size_t pos = 0; pos < n; ++pos) out[pos] = p.bias(o, 0);
    for (std::size_t c = 0; c < in_ch; ++c) {
      auto in = x.row_span(c);
      const double left = p.kernels(o, c * 3 + 0);
      const double mid = p.kernels(o, c * 3 + 1);
      const double right = p.kernels(o, c * 3 + 2);
      out[0] += mid * in[0] + (n > 1 ? right * in[1] : 0.0);
      if (n > 1) out[n - 1] += mid * in[n - 1] + left * in[n - 2];
      if (n > 2) three_tap(out.data() + 1, in.data() + 1, n - 2, left, mid, right);
    }
  }
  if (cache) cache->input = x;
  return y;
}

Conv1dBackward conv1d_backward(const Conv1dCache& cache, const Conv1dParams& p,
                               const Matrix& upstream) {
  const Matrix& x = require_cached(cache.input, "conv1d");
  const std::size_t in_ch = p.in_channels();
  const std::size_t out_ch = p.out_channels();
  const std::size_t n = x.cols();
  if (upstream.rows() != out_ch || upstream.cols() != n) {
    throw ShapeError("conv1d_backward: upstream " + upstream.shape_string() + ", expected " +
                     std::to_string(out_ch) + "x" + std::to_string(n));
  }

  Conv1dBackward g{Matrix(in_ch, n), Conv1dParams::zeros(in_ch, out_ch)};
  for (std::size_t o = 0; o < out_ch; ++o) {
    auto dy = upstream.row_span(o);
    double bias_sum = 0.0;
    for (double v : dy) bias_sum += v;
    g.d_params.bias(o, 0) = bias_sum;

    for (std::size_t c = 0; c < in_ch; ++c) {
      auto in = x.row_span(c);
      auto dx = g.d_input.row_span(c);
      const double left = p.kernels(o, c * 3 + 0);
      const double mid = p.kernels(o, c * 3 + 1);
      const double right = p.kernels(o, c * 3 + 2);
      double d_left = 0.0, d_mid = 0.0, d_right = 0.0;
      for (std::size_t pos = 0; pos < n; ++pos) d_mid += dy[pos] * in[pos];
      for (std::size_t pos = 1; pos < n; ++pos) d_left += dy[pos] * in[pos - 1];
      for (std::size_t pos = 0; pos + 1 < n; ++pos) d_right += dy[pos] * in[pos + 1];
      // dx is the same three-tap filter with the kernel mirrored.
      dx[0] += mid * dy[0] + (n > 1 ? left * dy[1] : 0.0);
      if (n > 1) dx[n - 1] += mid * dy[n - 1] + right * dy[n - 2];
      if (n > 2) three_tap(dx.data() + 1, dy.data() + 1, n - 2, right, mid, left);
      g.d_params.kernels(o, c * 3 + 0) = d_left;
      g.d_params.kernels(o, c * 3 + 1) = d_mid;
      g.d_params.kernels(o, c * 3 + 2) = d_right;
    }
  }
  return g;
}

// ---------------------------------------------------------------------------

BatchNormParams BatchNormParams::make(std::size_t channels, double eps, double momentum) {
  if (!(eps > 0.0)) throw ConfigError("batchnorm: eps must be positive");
  if (!(momentum > 0.0 && momentum < 1.0)) throw ConfigError("batchnorm: momentum must be in (0,1)");
  BatchNormParams p{Matrix(channels, 1, 1.0), Matrix(channels, 1, 0.0), Matrix(channels, 1, 0.0),
                    Matrix(channels, 1, 1.0), eps, momentum};
  return p;
}

std::vector<Matrix> batchnorm_forward(std::span<const Matrix> x, const BatchNormParams& p,
                                      bool training, BatchNormCache* cache) {
  if (x.empty()) throw ShapeError("batchnorm: empty batch");
  if (training && x.size() < 2) {
    throw ConfigError("batchnorm: training mode needs a batch of at least 2, got " +
                      std::to_string(x.size()));
  }
  const std::size_t ch = p.channels();
  const std::size_t n = x.front().cols();
  for (const Matrix& m : x) {
    if (m.rows() != ch || m.cols() != n) {
      throw ShapeError("batchnorm: batch element " + m.shape_string() + ", expected " +
                       std::to_string(ch) + "x" + std::to_string(n));
    }
  }

  std::vector<double> mean(ch), var(ch), inv_std(ch);
  if (training) {
    const double count = static_cast<double>(x.size() * n);
    for (std::size_t c = 0; c < ch; ++c) {
      double sum = 0.0;
      for (const Matrix& m : x)
        for (double v : m.row_span(c)) sum += v;
      const double mu = sum / count;
      double sq = 0.0;
      for (const Matrix& m : x)
        for (double v : m.row_span(c)) sq += (v - mu) * (v - mu);
      mean[c] = mu;
      var[c] = sq / count;
    }
  } else {
    for (std::size_t c = 0; c < ch; ++c) {
      mean[c] = p.running_mean(c, 0);
      var[c] = p.running_var(c, 0);
    }
  }
  for (std::size_t c = 0; c < ch; ++c) inv_std[c] = 1.0 / std::sqrt(var[c] + p.eps);

  std::vector<Matrix> out;
  std::vector<Matrix> normalized;
  out.reserve(x.size());
  normalized.reserve(x.size());
  for (const Matrix& m : x) {
    Matrix xhat(ch, n);
    Matrix y(ch, n);
    for (std::size_t c = 0; c < ch; ++c) {
      auto in = m.row_span(c);
      auto h = xhat.row_span(c);
      auto o = y.row_span(c);
      const double g = p.gamma(c, 0);
      const double b = p.beta(c, 0);
      for (std::size_t pos = 0; pos < n; ++pos) {
        h[pos] = (in[pos] - mean[c]) * inv_std[c];
        o[pos] = g * h[pos] + b;
      }
    }
    if (cache) normalized.push_back(std::move(xhat));
    out.push_back(std::move(y));
  }

  if (cache) {
    cache->training = training;
    cache->normalized = std::move(normalized);
    cache->inv_std = std::move(inv_std);
    if (training) {
      cache->batch_mean = std::move(mean);
      cache->batch_var = std::move(var);
    } else {
      cache->batch_mean.clear();
      cache->batch_var.clear();
    }
  }
  return out;
}

void batchnorm_update_running_stats(BatchNormParams& p, const BatchNormCache& cache) {
  if (!cache.training || cache.batch_mean.size() != p.channels()) {
    throw UsageError("batchnorm: running stats need a cached training-mode forward");
  }
  const double m = p.momentum;
  for (std::size_t c = 0; c < p.channels(); ++c) {
    p.running_mean(c, 0) = (1.0 - m) * p.running_mean(c, 0) + m * cache.batch_mean[c];
    p.running_var(c, 0) = (1.0 - m) * p.running_var(c, 0) + m * cache.batch_var[c];
  }
}

BatchNormBackward batchnorm_backward(const BatchNormCache& cache, const BatchNormParams& p,
                                     std::span<const Matrix> upstream) {
  if (cache.normalized.empty()) {
    throw UsageError("batchnorm: backward called without a cached forward");
  }
  if (upstream.size() != cache.normalized.size()) {
    throw ShapeError("batchnorm_backward: upstream batch size " + std::to_string(upstream.size()) +
                     " vs cached " + std::to_string(cache.normalized.size()));
  }
  const std::size_t ch = p.channels();
  const std::size_t n = cache.normalized.front().cols();
  for (std::size_t b = 0; b < upstream.size(); ++b) {
    require_same_shape(upstream[b], cache.normalized[b], "batchnorm_backward");
  }

  BatchNormBackward g{{}, Matrix(ch, 1), Matrix(ch, 1)};
  std::vector<double> sum_dy(ch, 0.0), sum_dy_xhat(ch, 0.0);
  for (std::size_t b = 0; b < upstream.size(); ++b) {
    for (std::size_t c = 0; c < ch; ++c) {
      auto dy = upstream[b].row_span(c);
      auto h = cache.normalized[b].row_span(c);
      for (std::size_t pos = 0; pos < n; ++pos) {
        sum_dy[c] += dy[pos];
        sum_dy_xhat[c] += dy[pos] * h[pos];
      }
    }
  }
  for (std::size_t c = 0; c < ch; ++c) {
    g.d_beta(c, 0) = sum_dy[c];
    g.d_gamma(c, 0) = sum_dy_xhat[c];
  }

  const double count = static_cast<double>(upstream.size() * n);
  g.d_input.reserve(upstream.size());
  for (std::size_t b = 0; b < upstream.size(); ++b) {
    Matrix dx(ch, n);
    for (std::size_t c = 0; c < ch; ++c) {
      auto dy = upstream[b].row_span(c);
      auto h = cache.normalized[b].row_span(c);
      auto out = dx.row_span(c);
      const double scale = p.gamma(c, 0) * cache.inv_std[c];
      if (cache.training) {
        const double mean_dy = sum_dy[c] / count;
        const double mean_dy_xhat = sum_dy_xhat[c] / count;
        for (std::size_t pos = 0; pos < n; ++pos) {
          out[pos] = scale * (dy[pos] - mean_dy - h[pos] * mean_dy_xhat);
        }
      } else {
        for (std::size_t pos = 0; pos < n; ++pos) out[pos] = scale * dy[pos];
      }
    }
    g.d_input.push_back(std::move(dx));
  }
  return g;
}

// ---------------------------------------------------------------------------

GraphConvParams GraphConvParams::zeros(std::size_t in_channels, std::size_t out_channels,
                                       std::size_t nodes, bool shared_bias) {
  return {Matrix(out_channels, in_channels), Matrix(out_channels, in_channels),
          Matrix(out_channels, shared_bias ? 1 : nodes)};
}

namespace {

void require_graphconv_shapes(const Matrix& nodes, std::size_t adjacency_nodes,
                              const GraphConvParams& p) {
  const std::size_t n = nodes.cols();
  if (adjacency_nodes != n) {
    throw ShapeError("graphconv: adjacency over " + std::to_string(adjacency_nodes) +
                     " nodes does not match " + std::to_string(n) + " nodes");
  }
  if (!p.shared_bias() && p.bias.cols() != n) {
    throw ShapeError("graphconv: per-node bias has " + std::to_string(p.bias.cols()) +
                     " columns for " + std::to_string(n) + " nodes");
  }
  require_same_shape(p.w1, p.w2, "graphconv weights");
  if (p.w1.cols() != nodes.rows()) {
    throw ShapeError("graphconv: weights " + p.w1.shape_string() + " cannot consume " +
                     nodes.shape_string() + " node features");
  }
  if (p.bias.rows() != p.w1.rows()) {
    throw ShapeError("graphconv: bias " + p.bias.shape_string() + " vs weights " +
                     p.w1.shape_string());
  }
}

// aggregate(X) must return X E.
template <typename Aggregate>
Matrix graphconv_forward_impl(const Matrix& nodes, const GraphConvParams& p,
                              GraphConvCache* cache, Aggregate aggregate) {
  const std::size_t n = nodes.cols();
  Matrix aggregated = aggregate(nodes);
  Matrix out = matmul(p.w1, nodes);
  out += matmul(p.w2, aggregated);
  for (std::size_t o = 0; o < out.rows(); ++o) {
    auto row = out.row_span(o);
    for (std::size_t i = 0; i < n; ++i) row[i] += p.bias(o, p.shared_bias() ? 0 : i);
  }
  if (cache) {
    cache->nodes = nodes;
    cache->aggregated = std::move(aggregated);
  }
  return out;
}

// aggregate_t(X) must return X E^T.
template <typename AggregateTransposed>
GraphConvBackward graphconv_backward_impl(const GraphConvCache& cache, std::size_t adjacency_nodes,
                                          const GraphConvParams& p, const Matrix& upstream,
                                          AggregateTransposed aggregate_t) {
  const Matrix& nodes = require_cached(cache.nodes, "graphconv");
  const Matrix& aggregated = require_cached(cache.aggregated, "graphconv");
  const std::size_t n = nodes.cols();
  if (upstream.rows() != p.w1.rows() || upstream.cols() != n) {
    throw ShapeError("graphconv_backward: upstream " + upstream.shape_string() + ", expected " +
                     std::to_string(p.w1.rows()) + "x" + std::to_string(n));
  }
  if (adjacency_nodes != n) {
    throw ShapeError("graphconv_backward: adjacency does not match cached nodes");
  }

  GraphConvBackward g{Matrix(nodes.rows(), n),
                      {matmul_transposed_b(upstream, nodes), matmul_transposed_b(upstream, aggregated),
                       Matrix(p.bias.rows(), p.bias.cols())}};
  for (std::size_t o = 0; o < upstream.rows(); ++o) {
    auto row = upstream.row_span(o);
    if (p.shared_bias()) {
      double s = 0.0;
      for (double v : row) s += v;
      g.d_params.bias(o, 0) = s;
    } else {
      for (std::size_t i = 0; i < n; ++i) g.d_params.bias(o, i) = row[i];
    }
  }

  // d nodes = W1^T dY + (W2^T dY) E^T
  g.d_input = matmul_transposed_a(p.w1, upstream);
  g.d_input += aggregate_t(matmul_transposed_a(p.w2, upstream));
  return g;
}

std::size_t square_side(const Matrix& adjacency) {
  if (adjacency.rows() != adjacency.cols()) {
    throw ShapeError("graphconv: adjacency " + adjacency.shape_string() + " is not square");
  }
  return adjacency.rows();
}

}  // namespace

Matrix graphconv_forward(const Matrix& nodes, const Matrix& adjacency, const GraphConvParams& p,
                         GraphConvCache* cache) {
  require_graphconv_shapes(nodes, square_side(adjacency), p);
  return graphconv_forward_impl(nodes, p, cache,
                                [&](const Matrix& x) { return matmul(x, adjacency); });
}

Matrix graphconv_forward(const Matrix& nodes, const FactoredAdjacency& adjacency,
                         const GraphConvParams& p, GraphConvCache* cache) {
  require_graphconv_shapes(nodes, adjacency.nodes(), p);
  return graphconv_forward_impl(nodes, p, cache,
                                [&](const Matrix& x) { return adjacency.right_multiply(x); });
}

GraphConvBackward graphconv_backward(const GraphConvCache& cache, const Matrix& adjacency,
                                     const GraphConvParams& p, const Matrix& upstream) {
  return graphconv_backward_impl(cache, square_side(adjacency), p, upstream, [&](const Matrix& x) {
    return matmul_transposed_b(x, adjacency);
  });
}

GraphConvBackward graphconv_backward(const GraphConvCache& cache, const FactoredAdjacency& adjacency,
                                     const GraphConvParams& p, const Matrix& upstream) {
  return graphconv_backward_impl(cache, adjacency.nodes(), p, upstream,
                                 [&](const Matrix& x) { return adjacency.right_multiply(x); });
}

// ---------------------------------------------------------------------------

AttentionParams AttentionParams::zeros(std::size_t features) {
  return {Matrix(features, 1), Matrix(1, 1)};
}

std::vector<double> attention_weights(const Matrix& nodes, const AttentionParams& p) {
  if (p.weight.rows() != nodes.rows() || p.weight.cols() != 1) {
    throw ShapeError("attention: weight " + p.weight.shape_string() + " cannot score " +
                     nodes.shape_string() + " node features");
  }
  const std::size_t n = nodes.cols();
  std::vector<double> scores(n, p.bias(0, 0));
  for (std::size_t f = 0; f < nodes.rows(); ++f) {
    const double w = p.weight(f, 0);
    auto row = nodes.row_span(f);
    for (std::size_t i = 0; i < n; ++i) scores[i] += w * row[i];
  }
  return softmax(scores);
}

std::vector<double> attention_pool(const Matrix& nodes, const AttentionParams& p,
                                   AttentionCache* cache) {
  std::vector<double> alpha = attention_weights(nodes, p);
  std::vector<double> pooled(nodes.rows(), 0.0);
  for (std::size_t f = 0; f < nodes.rows(); ++f) {
    auto row = nodes.row_span(f);
    double acc = 0.0;
    for (std::size_t i = 0; i < alpha.size(); ++i) acc += alpha[i] * row[i];
    pooled[f] = acc;
  }
  if (cache) {
    cache->nodes = nodes;
    cache->weights = std::move(alpha);
    cache->pooled = pooled;
  }
  return pooled;
}

AttentionBackward attention_backward(const AttentionCache& cache, const AttentionParams& p,
                                     std::span<const double> upstream) {
  const Matrix& nodes = require_cached(cache.nodes, "attention");
  const std::size_t features = nodes.rows();
  const std::size_t n = nodes.cols();
  require_length(upstream, features, "attention_backward");

  // d score_i = alpha_i * (v_i - pooled) . upstream
  double pooled_dot = 0.0;
  for (std::size_t f = 0; f < features; ++f) pooled_dot += cache.pooled[f] * upstream[f];
  std::vector<double> d_score(n, 0.0);
  for (std::size_t f = 0; f < features; ++f) {
    auto row = nodes.row_span(f);
    for (std::size_t i = 0; i < n; ++i) d_score[i] += row[i] * upstream[f];
  }
  for (std::size_t i = 0; i < n; ++i) d_score[i] = cache.weights[i] * (d_score[i] - pooled_dot);

  AttentionBackward g{Matrix(features, n), AttentionParams::zeros(features)};
  double bias_grad = 0.0;
  for (double d : d_score) bias_grad += d;
  g.d_params.bias(0, 0) = bias_grad;
  for (std::size_t f = 0; f < features; ++f) {
    auto row = nodes.row_span(f);
    auto dx = g.d_input.row_span(f);
    const double w = p.weight(f, 0);
    double wg = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      dx[i] = cache.weights[i] * upstream[f] + d_score[i] * w;
      wg += d_score[i] * row[i];
    }
    g.d_params.weight(f, 0) = wg;
  }
  return g;
}

std::vector<double> mean_pool(const Matrix& nodes) {
  std::vector<double> pooled(nodes.rows(), 0.0);
  const double inv = 1.0 / static_cast<double>(nodes.cols());
  for (std::size_t f = 0; f < nodes.rows(); ++f) {
    double acc = 0.0;
    for (double v : nodes.row_span(f)) acc += v;
    pooled[f] = acc * inv;
  }
  return pooled;
}

Matrix mean_pool_backward(std::size_t nodes, std::span<const double> upstream) {
  Matrix dx(upstream.size(), nodes);
  const double inv = 1.0 / static_cast<double>(nodes);
  for (std::size_t f = 0; f < upstream.size(); ++f) {
    for (double& v : dx.row_span(f)) v = upstream[f] * inv;
  }
  return dx;
}

// ---------------------------------------------------------------------------

DenseParams DenseParams::zeros(std::size_t in_features, std::size_t out_features) {
  return {Matrix(out_features, in_features), Matrix(out_features, 1)};
}

std::vector<double> dense_forward(std::span<const double> v, const DenseParams& p,
                                  DenseCache* cache) {
  require_length(v, p.weight.cols(), "dense_forward");
  if (p.bias.rows() != p.weight.rows() || p.bias.cols() != 1) {
    throw ShapeError("dense: bias " + p.bias.shape_string() + " vs weight " +
                     p.weight.shape_string());
  }
  std::vector<double> out(p.weight.rows());
  for (std::size_t o = 0; o < out.size(); ++o) {
    auto w = p.weight.row_span(o);
    double acc = p.bias(o, 0);
    for (std::size_t i = 0; i < v.size(); ++i) acc += w[i] * v[i];
    out[o] = acc;
  }
  if (cache) {
    cache->input.assign(v.begin(), v.end());
    cache->valid = true;
  }
  return out;
}

DenseBackward dense_backward(const DenseCache& cache, const DenseParams& p,
                             std::span<const double> upstream) {
  if (!cache.valid) throw UsageError("dense: backward called without a cached forward");
  require_length(upstream, p.weight.rows(), "dense_backward");
  const std::size_t in = p.weight.cols();
  DenseBackward g{std::vector<double>(in, 0.0), DenseParams::zeros(in, p.weight.rows())};
  for (std::size_t o = 0; o < upstream.size(); ++o) {
    const double d = upstream[o];
    g.d_params.bias(o, 0) = d;
    auto w = p.weight.row_span(o);
    auto dw = g.d_params.weight.row_span(o);
    for (std::size_t i = 0; i < in; ++i) {
      dw[i] = d * cache.input[i];
      g.d_input[i] += w[i] * d;
    }
  }
  return g;
}

}  // namespace hrrpgnet
