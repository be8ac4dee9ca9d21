#include "hrrpgnet/verify.hpp"

#include <memory>
#include <random>

#include "hrrpgnet/error.hpp"
#include "hrrpgnet/gradcheck.hpp"
#include "hrrpgnet/layers.hpp"
#include "hrrpgnet/model.hpp"

namespace hrrpgnet {

namespace {

Matrix random_matrix(std::mt19937_64& rng, std::size_t rows, std::size_t cols, double lo = -1.0,
                     double hi = 1.0) {
  std::uniform_real_distribution<double> dist(lo, hi);
  Matrix m(rows, cols);
  for (double& v : m.values()) v = dist(rng);
  return m;
}

std::size_t pick(std::mt19937_64& rng, std::size_t lo, std::size_t hi) {
  return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
}

double dot(const Matrix& a, const Matrix& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a.values()[i] * b.values()[i];
  return s;
}

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

using Entries = std::vector<GradcheckEntry>;

Entries check_conv(std::mt19937_64& rng) {
  const std::size_t in = pick(rng, 1, 4), out = pick(rng, 1, 4), n = pick(rng, 3, 8);
  const Conv1dParams p{random_matrix(rng, out, in * 3), random_matrix(rng, out, 1)};
  const Matrix x = random_matrix(rng, in, n);
  const Matrix r = random_matrix(rng, out, n);
  Conv1dCache cache;
  conv1d_forward(x, p, &cache);
  const Conv1dBackward g = conv1d_backward(cache, p, r);
  auto with = [&](Matrix Conv1dParams::*field) {
    return [&, field](const Matrix& t) {
      Conv1dParams q = p;
      q.*field = t;
      return dot(conv1d_forward(x, q), r);
    };
  };
  return {
      {"conv1d", "input",
       finite_diff_check([&](const Matrix& t) { return dot(conv1d_forward(t, p), r); }, x, g.d_input)},
      {"conv1d", "kernels", finite_diff_check(with(&Conv1dParams::kernels), p.kernels, g.d_params.kernels)},
      {"conv1d", "bias", finite_diff_check(with(&Conv1dParams::bias), p.bias, g.d_params.bias)},
  };
}

Entries check_batchnorm(std::mt19937_64& rng) {
  const std::size_t ch = pick(rng, 1, 4), n = pick(rng, 3, 8), batch = pick(rng, 2, 4);
  BatchNormParams p = BatchNormParams::make(ch);
  p.gamma = random_matrix(rng, ch, 1, 0.5, 1.5);
  p.beta = random_matrix(rng, ch, 1);
  p.running_mean = random_matrix(rng, ch, 1);
  p.running_var = random_matrix(rng, ch, 1, 0.5, 2.0);
  std::vector<Matrix> x, r;
  for (std::size_t b = 0; b < batch; ++b) {
    x.push_back(random_matrix(rng, ch, n));
    r.push_back(random_matrix(rng, ch, n));
  }
  Entries out;
  for (bool training : {true, false}) {
    const std::string mode = training ? "[train]" : "[eval]";
    auto loss = [&](const std::vector<Matrix>& xs, const BatchNormParams& q) {
      const auto y = batchnorm_forward(xs, q, training);
      double s = 0.0;
      for (std::size_t b = 0; b < y.size(); ++b) s += dot(y[b], r[b]);
      return s;
    };
    BatchNormCache cache;
    batchnorm_forward(x, p, training, &cache);
    const BatchNormBackward g = batchnorm_backward(cache, p, r);
    double worst_input = 0.0;
    for (std::size_t b = 0; b < batch; ++b) {
      worst_input = std::max(worst_input, finite_diff_check(
                                              [&](const Matrix& t) {
                                                auto xs = x;
                                                xs[b] = t;
                                                return loss(xs, p);
                                              },
                                              x[b], g.d_input[b]));
    }
    out.push_back({"batchnorm" + mode, "input", worst_input});
    out.push_back({"batchnorm" + mode, "gamma",
                   finite_diff_check(
                       [&](const Matrix& t) {
                         BatchNormParams q = p;
                         q.gamma = t;
                         return loss(x, q);
                       },
                       p.gamma, g.d_gamma)});
    out.push_back({"batchnorm" + mode, "beta",
                   finite_diff_check(
                       [&](const Matrix& t) {
                         BatchNormParams q = p;
                         q.beta = t;
                         return loss(x, q);
                       },
                       p.beta, g.d_beta)});
  }
  return out;
}

GradcheckEntry check_factored_graphconv(const Matrix& nodes, const Matrix& amplitudes,
                                        const GraphConvParams& p, const Matrix& r,
                                        const char* tensor) {
  const FactoredAdjacency adjacency(amplitudes.values(),
                                    std::make_shared<const Matrix>(distance_kernel(nodes.cols())));
  GraphConvCache cache;
  graphconv_forward(nodes, adjacency, p, &cache);
  const GraphConvBackward g = graphconv_backward(cache, adjacency, p, r);
  return {"graphconv", tensor,
          finite_diff_check([&](const Matrix& t) { return dot(graphconv_forward(t, adjacency, p), r); },
                            nodes, g.d_input)};
}

Entries check_graphconv(std::mt19937_64& rng) {
  const std::size_t in = pick(rng, 1, 4), out = pick(rng, 1, 4), n = pick(rng, 2, 8);
  const Matrix nodes = random_matrix(rng, in, n);
  const Matrix amplitudes = random_matrix(rng, 1, n, 0.0, 1.0);
  const Matrix adjacency = build_adjacency(amplitudes.values());
  const GraphConvParams p{random_matrix(rng, out, in), random_matrix(rng, out, in),
                          random_matrix(rng, out, n)};
  const Matrix r = random_matrix(rng, out, n);
  GraphConvCache cache;
  graphconv_forward(nodes, adjacency, p, &cache);
  const GraphConvBackward g = graphconv_backward(cache, adjacency, p, r);
  auto with = [&](Matrix GraphConvParams::*field) {
    return [&, field](const Matrix& t) {
      GraphConvParams q = p;
      q.*field = t;
      return dot(graphconv_forward(nodes, adjacency, q), r);
    };
  };
  return {
      {"graphconv", "input",
       finite_diff_check([&](const Matrix& t) { return dot(graphconv_forward(t, adjacency, p), r); },
                         nodes, g.d_input)},
      {"graphconv", "w1", finite_diff_check(with(&GraphConvParams::w1), p.w1, g.d_params.w1)},
      {"graphconv", "w2", finite_diff_check(with(&GraphConvParams::w2), p.w2, g.d_params.w2)},
      {"graphconv", "bias", finite_diff_check(with(&GraphConvParams::bias), p.bias, g.d_params.bias)},
      check_factored_graphconv(nodes, amplitudes, p, r, "input[factored]"),
  };
}

Entries check_attention(std::mt19937_64& rng) {
  const std::size_t f = pick(rng, 1, 4), n = pick(rng, 1, 8);
  const Matrix nodes = random_matrix(rng, f, n);
  const AttentionParams p{random_matrix(rng, f, 1), random_matrix(rng, 1, 1)};
  const Matrix r = random_matrix(rng, f, 1);
  AttentionCache cache;
  attention_pool(nodes, p, &cache);
  const AttentionBackward g = attention_backward(cache, p, r.values());
  auto with = [&](Matrix AttentionParams::*field) {
    return [&, field](const Matrix& t) {
      AttentionParams q = p;
      q.*field = t;
      return dot(attention_pool(nodes, q), r.values());
    };
  };
  return {
      {"attention", "input",
       finite_diff_check([&](const Matrix& t) { return dot(attention_pool(t, p), r.values()); },
                         nodes, g.d_input)},
      {"attention", "weight", finite_diff_check(with(&AttentionParams::weight), p.weight, g.d_params.weight)},
      {"attention", "bias", finite_diff_check(with(&AttentionParams::bias), p.bias, g.d_params.bias)},
  };
}

Entries check_dense(std::mt19937_64& rng) {
  const std::size_t in = pick(rng, 1, 4), out = pick(rng, 1, 4);
  const DenseParams p{random_matrix(rng, out, in), random_matrix(rng, out, 1)};
  const Matrix v = random_matrix(rng, in, 1);
  const Matrix r = random_matrix(rng, out, 1);
  DenseCache cache;
  dense_forward(v.values(), p, &cache);
  const DenseBackward g = dense_backward(cache, p, r.values());
  auto with = [&](Matrix DenseParams::*field) {
    return [&, field](const Matrix& t) {
      DenseParams q = p;
      q.*field = t;
      return dot(dense_forward(v.values(), q), r.values());
    };
  };
  return {
      {"dense", "input",
       finite_diff_check([&](const Matrix& t) { return dot(dense_forward(t.values(), p), r.values()); },
                         v, Matrix::column(g.d_input))},
      {"dense", "weight", finite_diff_check(with(&DenseParams::weight), p.weight, g.d_params.weight)},
      {"dense", "bias", finite_diff_check(with(&DenseParams::bias), p.bias, g.d_params.bias)},
  };
}

Entries check_model(std::mt19937_64& rng) {
  Entries out;
  for (const AblationConfig& ab : AblationConfig::table_rows()) {
    ModelConfig config;
    config.cells = pick(rng, 3, 8);
    config.conv_channels = pick(rng, 1, 4);
    config.graph_channels = pick(rng, 1, 4);
    config.classes = 3;
    config.ablation = ab;
    config.seed = rng();
    ModelParams params = init_params(config);
    // Nonzero biases and BN affine terms so every path carries signal.
    for (const TensorRef& t : params.trainable()) {
      for (double& v : t.value->values()) v += std::uniform_real_distribution<double>(-0.3, 0.3)(rng);
    }

    const std::size_t batch = 3;
    std::vector<HrrpSample> samples;
    std::vector<std::size_t> labels;
    for (std::size_t b = 0; b < batch; ++b) {
      const Matrix h = random_matrix(rng, 1, config.cells, 0.0, 1.0);
      samples.push_back({std::vector<double>(h.values().begin(), h.values().end()),
                         pick(rng, 0, config.classes - 1)});
      labels.push_back(samples.back().label);
    }

    BatchForward fwd = forward_batch(samples, params, config, true);
    backward(fwd.cache, labels, params);

    const std::string layer = "model[" + ab.code() + "]";
    for (const TensorRef& t : params.trainable()) {
      const std::string name(t.name);
      const Matrix analytic = *t.grad;
      auto f = [&](const Matrix& probe) {
        ModelParams q = params;
        q.tensor(name) = probe;
        return batch_loss(forward_batch(samples, q, config, true).log_probs, labels);
      };
      out.push_back({layer, name, finite_diff_check(f, *t.value, analytic)});
    }
  }
  return out;
}

}  // namespace

const std::vector<std::string>& gradcheck_layers() {
  static const std::vector<std::string> layers{"conv1d", "batchnorm", "graphconv",
                                               "attention", "dense", "model"};
  return layers;
}

std::vector<GradcheckEntry> run_gradient_checks(std::string_view layer, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  if (layer == "conv1d") return check_conv(rng);
  if (layer == "batchnorm") return check_batchnorm(rng);
  if (layer == "graphconv") return check_graphconv(rng);
  if (layer == "attention") return check_attention(rng);
  if (layer == "dense") return check_dense(rng);
  if (layer == "model") return check_model(rng);
  throw ConfigError("unknown layer \"" + std::string(layer) +
                    "\" (expected conv1d, batchnorm, graphconv, attention, dense or model)");
}

}  // namespace hrrpgnet
