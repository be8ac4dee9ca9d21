#include "hrrpgnet/layers.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <memory>
#include <numeric>
#include <random>

#include "hrrpgnet/error.hpp"
#include "hrrpgnet/gradcheck.hpp"
#include "hrrpgnet/graphgen.hpp"
#include "test_support.hpp"

namespace hrrpgnet {
namespace {

using testing::random_matrix;
using testing::random_vector;
using testing::weighted_sum;

constexpr int kSeeds = 20;

// ---------------------------------------------------------------------------
// conv1d

TEST(Conv1d, HandEvaluatedDifferenceKernel) {
  Conv1dParams p = Conv1dParams::zeros(1, 1);
  p.kernels = Matrix{{1.0, 0.0, -1.0}};
  EXPECT_EQ(conv1d_forward(Matrix{{1, 2, 3, 4}}, p), (Matrix{{-2, -2, -2, 3}}));
}

TEST(Conv1d, DeltaKernelIsIdentity) {
  std::mt19937_64 rng(1);
  Conv1dParams p = Conv1dParams::zeros(1, 1);
  p.kernels = Matrix{{0.0, 1.0, 0.0}};
  const Matrix x = random_matrix(rng, 1, 9);
  EXPECT_EQ(conv1d_forward(x, p), x);
}

TEST(Conv1d, ZeroInputYieldsBias) {
  std::mt19937_64 rng(2);
  Conv1dParams p{random_matrix(rng, 3, 6), Matrix{{0.5}, {-1.0}, {2.0}}};
  const Matrix y = conv1d_forward(Matrix(2, 5), p);
  for (std::size_t o = 0; o < 3; ++o)
    for (std::size_t n = 0; n < 5; ++n) EXPECT_EQ(y(o, n), p.bias(o, 0));
}

TEST(Conv1d, ChannelMismatchIsAShapeError) {
  EXPECT_THROW(conv1d_forward(Matrix(2, 5), Conv1dParams::zeros(1, 3)), ShapeError);
}

TEST(Conv1d, IsLinearWithoutBias) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    Conv1dParams p{random_matrix(rng, 3, 6), Matrix(3, 1)};
    const Matrix x = random_matrix(rng, 2, 7);
    const Matrix y = random_matrix(rng, 2, 7);
    const double a = 1.7, b = -0.3;
    const Matrix lhs = conv1d_forward(a * x + b * y, p);
    const Matrix rhs = a * conv1d_forward(x, p) + b * conv1d_forward(y, p);
    EXPECT_LE(max_abs_difference(lhs, rhs), 1e-10);
  }
}

TEST(Conv1d, BackwardWithoutCacheIsAUsageError) {
  EXPECT_THROW(conv1d_backward(Conv1dCache{}, Conv1dParams::zeros(1, 1), Matrix(1, 4)), UsageError);
}

TEST(Conv1d, ZeroUpstreamGivesZeroGradients) {
  std::mt19937_64 rng(4);
  Conv1dParams p{random_matrix(rng, 2, 3), random_matrix(rng, 2, 1)};
  Conv1dCache cache;
  conv1d_forward(random_matrix(rng, 1, 6), p, &cache);
  const auto g = conv1d_backward(cache, p, Matrix(2, 6));
  EXPECT_EQ(g.d_input, Matrix(1, 6));
  EXPECT_EQ(g.d_params.kernels, Matrix(2, 3));
  EXPECT_EQ(g.d_params.bias, Matrix(2, 1));
}

TEST(Conv1d, GradientsMatchFiniteDifferences) {
  for (int seed = 0; seed < kSeeds; ++seed) {
    std::mt19937_64 rng(seed);
    const std::size_t in = 1 + seed % 3, out = 1 + (seed / 3) % 4, n = 3 + seed % 6;
    const Conv1dParams p{random_matrix(rng, out, in * 3), random_matrix(rng, out, 1)};
    const Matrix x = random_matrix(rng, in, n);
    const Matrix r = random_matrix(rng, out, n);
    Conv1dCache cache;
    conv1d_forward(x, p, &cache);
    const auto g = conv1d_backward(cache, p, r);

    EXPECT_LE(finite_diff_check([&](const Matrix& t) { return weighted_sum(conv1d_forward(t, p), r); },
                                x, g.d_input),
              kGradientTolerance);
    EXPECT_LE(finite_diff_check(
                  [&](const Matrix& t) {
                    Conv1dParams q = p;
                    q.kernels = t;
                    return weighted_sum(conv1d_forward(x, q), r);
                  },
                  p.kernels, g.d_params.kernels),
              kGradientTolerance);
    EXPECT_LE(finite_diff_check(
                  [&](const Matrix& t) {
                    Conv1dParams q = p;
                    q.bias = t;
                    return weighted_sum(conv1d_forward(x, q), r);
                  },
                  p.bias, g.d_params.bias),
              kGradientTolerance);
  }
}

// ---------------------------------------------------------------------------
// batch norm

TEST(BatchNorm, TwoValueBatchStandardizes) {
  BatchNormParams p = BatchNormParams::make(1);
  const std::vector<Matrix> batch{Matrix{{1.0}}, Matrix{{3.0}}};
  const auto y = batchnorm_forward(batch, p, true);
  const double expected = 1.0 / std::sqrt(1.0 + 1e-5);
  EXPECT_NEAR(y[0](0, 0), -expected, 1e-15);
  EXPECT_NEAR(y[1](0, 0), expected, 1e-15);
  EXPECT_NEAR(y[1](0, 0), 0.99999, 1e-5);
}

TEST(BatchNorm, ZeroGammaOutputsBeta) {
  std::mt19937_64 rng(5);
  BatchNormParams p = BatchNormParams::make(2);
  p.gamma.fill(0.0);
  p.beta = Matrix{{0.25}, {-4.0}};
  const std::vector<Matrix> batch{random_matrix(rng, 2, 4), random_matrix(rng, 2, 4)};
  for (const Matrix& y : batchnorm_forward(batch, p, true)) {
    for (std::size_t n = 0; n < 4; ++n) {
      EXPECT_EQ(y(0, n), 0.25);
      EXPECT_EQ(y(1, n), -4.0);
    }
  }
}

TEST(BatchNorm, EvalWithIdentityStatisticsIsNearIdentity) {
  std::mt19937_64 rng(6);
  const BatchNormParams p = BatchNormParams::make(3);
  const std::vector<Matrix> batch{random_matrix(rng, 3, 5)};
  const auto y = batchnorm_forward(batch, p, false);
  const double factor = 1.0 / std::sqrt(1.0 + p.eps);
  for (std::size_t i = 0; i < batch[0].size(); ++i) {
    EXPECT_NEAR(y[0].values()[i], batch[0].values()[i] * factor, 1e-15);
  }
}

TEST(BatchNorm, TrainingNeedsTwoSamples) {
  const std::vector<Matrix> batch{Matrix(1, 4)};
  EXPECT_THROW(batchnorm_forward(batch, BatchNormParams::make(1), true), ConfigError);
}

TEST(BatchNorm, RunningStatsFollowMomentum) {
  BatchNormParams p = BatchNormParams::make(1, 1e-5, 0.1);
  BatchNormCache cache;
  const std::vector<Matrix> batch{Matrix{{1.0, 3.0}}, Matrix{{5.0, 7.0}}};
  batchnorm_forward(batch, p, true, &cache);
  batchnorm_update_running_stats(p, cache);
  // batch mean 4, population variance 5
  EXPECT_NEAR(p.running_mean(0, 0), 0.4, 1e-15);
  EXPECT_NEAR(p.running_var(0, 0), 0.9 + 0.5, 1e-15);
}

TEST(BatchNorm, BackwardWithoutCacheIsAUsageError) {
  const std::vector<Matrix> up{Matrix(1, 2)};
  EXPECT_THROW(batchnorm_backward(BatchNormCache{}, BatchNormParams::make(1), up), UsageError);
}

TEST(BatchNorm, GradientsMatchFiniteDifferencesInBothModes) {
  for (int seed = 0; seed < kSeeds; ++seed) {
    std::mt19937_64 rng(100 + seed);
    const std::size_t ch = 1 + seed % 4, n = 3 + seed % 6, batch = 2 + seed % 3;
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
    for (bool training : {true, false}) {
      auto loss = [&](const std::vector<Matrix>& xs, const BatchNormParams& q) {
        const auto y = batchnorm_forward(xs, q, training);
        double s = 0.0;
        for (std::size_t b = 0; b < y.size(); ++b) s += weighted_sum(y[b], r[b]);
        return s;
      };
      BatchNormCache cache;
      batchnorm_forward(x, p, training, &cache);
      const auto g = batchnorm_backward(cache, p, r);

      for (std::size_t b = 0; b < batch; ++b) {
        EXPECT_LE(finite_diff_check(
                      [&](const Matrix& t) {
                        auto xs = x;
                        xs[b] = t;
                        return loss(xs, p);
                      },
                      x[b], g.d_input[b]),
                  kGradientTolerance)
            << "seed " << seed << " training " << training;
      }
      EXPECT_LE(finite_diff_check(
                    [&](const Matrix& t) {
                      BatchNormParams q = p;
                      q.gamma = t;
                      return loss(x, q);
                    },
                    p.gamma, g.d_gamma),
                kGradientTolerance);
      EXPECT_LE(finite_diff_check(
                    [&](const Matrix& t) {
                      BatchNormParams q = p;
                      q.beta = t;
                      return loss(x, q);
                    },
                    p.beta, g.d_beta),
                kGradientTolerance);
    }
  }
}

// ---------------------------------------------------------------------------
// graph convolution

TEST(GraphConv, HandEvaluatedTwoNodeGraph) {
  GraphConvParams p{Matrix{{2.0}}, Matrix{{1.0}}, Matrix(1, 2)};
  const Matrix out = graphconv_forward(Matrix{{1, 3}}, Matrix{{1, 1.5}, {1.5, 9}}, p);
  EXPECT_EQ(out, (Matrix{{7.5, 34.5}}));
}

TEST(GraphConv, ZeroW2OrZeroAdjacencyDecouplesNodes) {
  std::mt19937_64 rng(7);
  const Matrix nodes = random_matrix(rng, 3, 5);
  const Matrix adjacency = build_adjacency(random_vector(rng, 5, 0.0, 1.0));
  GraphConvParams p{random_matrix(rng, 4, 3), Matrix(4, 3), random_matrix(rng, 4, 5)};
  Matrix expected = matmul(p.w1, nodes) + p.bias;
  EXPECT_LE(max_abs_difference(graphconv_forward(nodes, adjacency, p), expected), 1e-15);

  p.w2 = random_matrix(rng, 4, 3);
  EXPECT_LE(max_abs_difference(graphconv_forward(nodes, Matrix(5, 5), p), expected), 1e-15);
}

TEST(GraphConv, MismatchedNodeCountsAreShapeErrors) {
  const GraphConvParams p = GraphConvParams::zeros(1, 2, 4);
  EXPECT_THROW(graphconv_forward(Matrix(1, 4), Matrix(3, 3), p), ShapeError);
  EXPECT_THROW(graphconv_forward(Matrix(1, 5), Matrix(5, 5), p), ShapeError);
  EXPECT_THROW(graphconv_forward(Matrix(2, 4), Matrix(4, 4), p), ShapeError);
}

TEST(GraphConv, SharedBiasBroadcastsOverNodes) {
  std::mt19937_64 rng(8);
  GraphConvParams p{random_matrix(rng, 2, 1), random_matrix(rng, 2, 1), Matrix{{1.0}, {-1.0}}};
  const Matrix nodes = random_matrix(rng, 1, 6);
  const Matrix adjacency = build_adjacency(random_vector(rng, 6, 0.0, 1.0));
  GraphConvParams per_node = p;
  per_node.bias = Matrix(2, 6);
  for (std::size_t i = 0; i < 6; ++i) {
    per_node.bias(0, i) = 1.0;
    per_node.bias(1, i) = -1.0;
  }
  EXPECT_EQ(graphconv_forward(nodes, adjacency, p), graphconv_forward(nodes, adjacency, per_node));
}

TEST(GraphConv, PermutingNodesPermutesOutput) {
  std::mt19937_64 rng(9);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = 6, in = 3, out = 2;
    const Matrix nodes = random_matrix(rng, in, n);
    const Matrix adjacency = build_adjacency(random_vector(rng, n, 0.0, 1.0));
    const GraphConvParams p{random_matrix(rng, out, in), random_matrix(rng, out, in),
                            random_matrix(rng, out, n)};
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);

    Matrix nodes_p(in, n), adjacency_p(n, n), bias_p(out, n);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t f = 0; f < in; ++f) nodes_p(f, i) = nodes(f, perm[i]);
      for (std::size_t o = 0; o < out; ++o) bias_p(o, i) = p.bias(o, perm[i]);
      for (std::size_t j = 0; j < n; ++j) adjacency_p(i, j) = adjacency(perm[i], perm[j]);
    }
    GraphConvParams pp = p;
    pp.bias = bias_p;
    const Matrix y = graphconv_forward(nodes, adjacency, p);
    const Matrix yp = graphconv_forward(nodes_p, adjacency_p, pp);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t o = 0; o < out; ++o) EXPECT_NEAR(yp(o, i), y(o, perm[i]), 1e-12);
  }
}

TEST(GraphConv, BackwardWithoutCacheIsAUsageError) {
  EXPECT_THROW(graphconv_backward(GraphConvCache{}, Matrix(2, 2), GraphConvParams::zeros(1, 1, 2),
                                  Matrix(1, 2)),
               UsageError);
}

TEST(GraphConv, GradientsMatchFiniteDifferences) {
  for (int seed = 0; seed < kSeeds; ++seed) {
    std::mt19937_64 rng(200 + seed);
    const std::size_t in = 1 + seed % 4, out = 1 + (seed / 4) % 4, n = 2 + seed % 7;
    const bool shared = seed % 5 == 0;
    const Matrix nodes = random_matrix(rng, in, n);
    const Matrix adjacency = build_adjacency(random_vector(rng, n, 0.0, 1.0));
    const GraphConvParams p{random_matrix(rng, out, in), random_matrix(rng, out, in),
                            random_matrix(rng, out, shared ? 1 : n)};
    const Matrix r = random_matrix(rng, out, n);
    GraphConvCache cache;
    graphconv_forward(nodes, adjacency, p, &cache);
    const auto g = graphconv_backward(cache, adjacency, p, r);

    auto with = [&](Matrix GraphConvParams::*field) {
      return [&, field](const Matrix& t) {
        GraphConvParams q = p;
        q.*field = t;
        return weighted_sum(graphconv_forward(nodes, adjacency, q), r);
      };
    };
    EXPECT_LE(finite_diff_check(
                  [&](const Matrix& t) { return weighted_sum(graphconv_forward(t, adjacency, p), r); },
                  nodes, g.d_input),
              kGradientTolerance);
    EXPECT_LE(finite_diff_check(with(&GraphConvParams::w1), p.w1, g.d_params.w1), kGradientTolerance);
    EXPECT_LE(finite_diff_check(with(&GraphConvParams::w2), p.w2, g.d_params.w2), kGradientTolerance);
    EXPECT_LE(finite_diff_check(with(&GraphConvParams::bias), p.bias, g.d_params.bias),
              kGradientTolerance);
  }
}

TEST(GraphConv, FactoredAdjacencyMatchesDenseForwardAndBackward) {
  for (int seed = 0; seed < kSeeds; ++seed) {
    std::mt19937_64 rng(250 + seed);
    const std::size_t in = 1 + seed % 4, out = 1 + (seed / 4) % 4, n = 1 + seed % 9;
    const auto h = random_vector(rng, n, 0.0, 1.0);
    const Matrix dense = build_adjacency(h);
    const FactoredAdjacency factored(h, std::make_shared<const Matrix>(distance_kernel(n)));
    const Matrix nodes = random_matrix(rng, in, n);
    const GraphConvParams p{random_matrix(rng, out, in), random_matrix(rng, out, in),
                            random_matrix(rng, out, n)};
    const Matrix r = random_matrix(rng, out, n);
    GraphConvCache dc, fc;
    EXPECT_LE(max_abs_difference(graphconv_forward(nodes, dense, p, &dc),
                                 graphconv_forward(nodes, factored, p, &fc)),
              1e-13);
    const auto gd = graphconv_backward(dc, dense, p, r);
    const auto gf = graphconv_backward(fc, factored, p, r);
    EXPECT_LE(max_abs_difference(gd.d_input, gf.d_input), 1e-13);
    EXPECT_LE(max_abs_difference(gd.d_params.w2, gf.d_params.w2), 1e-13);
  }
}

// ---------------------------------------------------------------------------
// attention pooling

TEST(Attention, ZeroWeightsGiveTheNodeMean) {
  std::mt19937_64 rng(10);
  const Matrix nodes = random_matrix(rng, 3, 7);
  AttentionParams p = AttentionParams::zeros(3);
  p.bias(0, 0) = 2.5;
  const auto pooled = attention_pool(nodes, p);
  const auto mean = mean_pool(nodes);
  for (std::size_t f = 0; f < 3; ++f) EXPECT_NEAR(pooled[f], mean[f], 1e-15);
}

TEST(Attention, SingleNodeReturnsThatNode) {
  std::mt19937_64 rng(11);
  const Matrix nodes = random_matrix(rng, 4, 1);
  const AttentionParams p{random_matrix(rng, 4, 1), Matrix{{0.3}}};
  const auto pooled = attention_pool(nodes, p);
  for (std::size_t f = 0; f < 4; ++f) EXPECT_EQ(pooled[f], nodes(f, 0));
}

TEST(Attention, HandEvaluatedTwoNodeExample) {
  const AttentionParams p{Matrix{{std::log(3.0)}}, Matrix{{0.0}}};
  const auto alpha = attention_weights(Matrix{{1, 3}}, p);
  EXPECT_NEAR(alpha[0], 0.1, 1e-15);
  EXPECT_NEAR(alpha[1], 0.9, 1e-15);
  EXPECT_NEAR(attention_pool(Matrix{{1, 3}}, p)[0], 2.8, 1e-14);
}

TEST(Attention, OutputStaysInsideNodeHullAndIgnoresScoreShift) {
  std::mt19937_64 rng(12);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t f = 1 + trial % 4, n = 1 + trial % 9;
    const Matrix nodes = random_matrix(rng, f, n, -3.0, 3.0);
    AttentionParams p{random_matrix(rng, f, 1, -2.0, 2.0), random_matrix(rng, 1, 1)};
    const auto alpha = attention_weights(nodes, p);
    EXPECT_NEAR(std::accumulate(alpha.begin(), alpha.end(), 0.0), 1.0, 1e-12);
    const auto pooled = attention_pool(nodes, p);
    for (std::size_t k = 0; k < f; ++k) {
      auto row = nodes.row_span(k);
      EXPECT_GE(pooled[k], *std::min_element(row.begin(), row.end()) - 1e-12);
      EXPECT_LE(pooled[k], *std::max_element(row.begin(), row.end()) + 1e-12);
    }
    p.bias(0, 0) += 41.0;
    const auto shifted = attention_pool(nodes, p);
    for (std::size_t k = 0; k < f; ++k) EXPECT_NEAR(shifted[k], pooled[k], 1e-12);
  }
}

TEST(Attention, BackwardWithoutCacheIsAUsageError) {
  const std::vector<double> up{1.0};
  EXPECT_THROW(attention_backward(AttentionCache{}, AttentionParams::zeros(1), up), UsageError);
}

TEST(Attention, GradientsMatchFiniteDifferences) {
  for (int seed = 0; seed < kSeeds; ++seed) {
    std::mt19937_64 rng(300 + seed);
    const std::size_t f = 1 + seed % 4, n = 1 + seed % 8;
    const Matrix nodes = random_matrix(rng, f, n);
    const AttentionParams p{random_matrix(rng, f, 1), random_matrix(rng, 1, 1)};
    const auto r = random_vector(rng, f);
    AttentionCache cache;
    attention_pool(nodes, p, &cache);
    const auto g = attention_backward(cache, p, r);

    EXPECT_LE(finite_diff_check([&](const Matrix& t) { return weighted_sum(attention_pool(t, p), r); },
                                nodes, g.d_input),
              kGradientTolerance);
    EXPECT_LE(finite_diff_check(
                  [&](const Matrix& t) {
                    AttentionParams q = p;
                    q.weight = t;
                    return weighted_sum(attention_pool(nodes, q), r);
                  },
                  p.weight, g.d_params.weight),
              kGradientTolerance);
    EXPECT_LE(finite_diff_check(
                  [&](const Matrix& t) {
                    AttentionParams q = p;
                    q.bias = t;
                    return weighted_sum(attention_pool(nodes, q), r);
                  },
                  p.bias, g.d_params.bias),
              kGradientTolerance);
  }
}

TEST(MeanPool, BackwardSpreadsUniformly) {
  const std::vector<double> up{2.0, -4.0};
  const Matrix g = mean_pool_backward(4, up);
  for (std::size_t i = 0; i < 4; ++i) {
    EXPECT_EQ(g(0, i), 0.5);
    EXPECT_EQ(g(1, i), -1.0);
  }
}

// ---------------------------------------------------------------------------
// dense

TEST(Dense, IdentityAndBiasOnly) {
  const std::vector<double> v{3.0, -1.0};
  const DenseParams identity{Matrix::identity(2), Matrix(2, 1)};
  EXPECT_EQ(dense_forward(v, identity), v);
  const DenseParams bias_only{Matrix{{5, 6}, {7, 8}}, Matrix{{0.5}, {1.5}}};
  EXPECT_EQ(dense_forward(std::vector<double>{0.0, 0.0}, bias_only), (std::vector<double>{0.5, 1.5}));
}

TEST(Dense, HandEvaluatedAffineMap) {
  const DenseParams p{Matrix{{1, 1}, {0, 2}}, Matrix{{0}, {1}}};
  EXPECT_EQ(dense_forward(std::vector<double>{3, 4}, p), (std::vector<double>{7, 9}));
}

TEST(Dense, ShapeMismatchAndMissingCache) {
  const DenseParams p = DenseParams::zeros(3, 2);
  EXPECT_THROW(dense_forward(std::vector<double>{1.0}, p), ShapeError);
  EXPECT_THROW(dense_backward(DenseCache{}, p, std::vector<double>{1.0, 1.0}), UsageError);
}

TEST(Dense, BiasGradientEqualsUpstream) {
  std::mt19937_64 rng(13);
  const DenseParams p{random_matrix(rng, 3, 4), random_matrix(rng, 3, 1)};
  DenseCache cache;
  dense_forward(random_vector(rng, 4), p, &cache);
  const auto up = random_vector(rng, 3);
  const auto g = dense_backward(cache, p, up);
  for (std::size_t o = 0; o < 3; ++o) EXPECT_EQ(g.d_params.bias(o, 0), up[o]);

  const auto zero = dense_backward(cache, p, std::vector<double>(3, 0.0));
  EXPECT_EQ(zero.d_params.weight, Matrix(3, 4));
  for (double d : zero.d_input) EXPECT_EQ(d, 0.0);
}

TEST(Dense, GradientsMatchFiniteDifferences) {
  for (int seed = 0; seed < kSeeds; ++seed) {
    std::mt19937_64 rng(400 + seed);
    const std::size_t in = 1 + seed % 4, out = 1 + (seed / 4) % 4;
    const DenseParams p{random_matrix(rng, out, in), random_matrix(rng, out, 1)};
    const auto v = random_vector(rng, in);
    const auto r = random_vector(rng, out);
    DenseCache cache;
    dense_forward(v, p, &cache);
    const auto g = dense_backward(cache, p, r);
    EXPECT_LE(finite_diff_check(
                  [&](const Matrix& t) {
                    return weighted_sum(dense_forward(t.values(), p), r);
                  },
                  Matrix::column(v), Matrix::column(g.d_input)),
              kGradientTolerance);
    EXPECT_LE(finite_diff_check(
                  [&](const Matrix& t) {
                    DenseParams q = p;
                    q.weight = t;
                    return weighted_sum(dense_forward(v, q), r);
                  },
                  p.weight, g.d_params.weight),
              kGradientTolerance);
  }
}

}  // namespace
}  // namespace hrrpgnet
