#include "hrrpgnet/graphgen.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <memory>
#include <random>

#include "hrrpgnet/error.hpp"
#include "test_support.hpp"

namespace hrrpgnet {
namespace {

TEST(BuildAdjacency, ZeroAmplitudesGiveZeroMatrix) {
  EXPECT_EQ(build_adjacency(std::vector<double>{0, 0, 0}), Matrix(3, 3));
}

TEST(BuildAdjacency, TwoCellHandEvaluation) {
  const Matrix e = build_adjacency(std::vector<double>{1, 3});
  EXPECT_EQ(e, (Matrix{{1.0, 1.5}, {1.5, 9.0}}));
}

TEST(BuildAdjacency, SingleNodeIsSquaredAmplitude) {
  EXPECT_EQ(build_adjacency(std::vector<double>{2}), (Matrix{{4.0}}));
}

TEST(BuildAdjacency, WeightDecreasesWithRangeDistance) {
  std::vector<double> h(40, 0.7);
  const Matrix e = build_adjacency(h);
  for (std::size_t d = 1; d < h.size(); ++d) EXPECT_LT(e(0, d), e(0, d - 1));
}

TEST(BuildGraph, NodesAreTheAmplitudeRow) {
  const HrrpGraph g = build_graph({{1, 3}, 0});
  EXPECT_EQ(g.node_features, (Matrix{{1.0, 3.0}}));
  EXPECT_EQ(g.adjacency, (Matrix{{1.0, 1.5}, {1.5, 9.0}}));

  const HrrpGraph zero = build_graph({std::vector<double>(5, 0.0), 1});
  EXPECT_EQ(zero.node_features, Matrix(1, 5));
  EXPECT_EQ(zero.adjacency, Matrix(5, 5));
}

TEST(BuildGraph, ShapesFollowCellCount) {
  std::mt19937_64 rng(3);
  for (std::size_t n : {1u, 4u, 33u}) {
    const HrrpGraph g = build_graph(testing::random_sample(rng, n, 2));
    EXPECT_EQ(g.node_features.rows(), 1u);
    EXPECT_EQ(g.node_features.cols(), n);
    EXPECT_EQ(g.adjacency.rows(), n);
    EXPECT_EQ(g.adjacency.cols(), n);
  }
}

TEST(BuildAdjacency, ScalingAmplitudesScalesWeightsQuadratically) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    const auto h = testing::random_vector(rng, 17, 0.0, 2.0);
    const double c = 0.1 + 3.0 * std::uniform_real_distribution<double>(0, 1)(rng);
    auto scaled = h;
    for (double& v : scaled) v *= c;
    const Matrix e = build_adjacency(h);
    const Matrix es = build_adjacency(scaled);
    for (std::size_t i = 0; i < e.size(); ++i) {
      EXPECT_NEAR(es.values()[i], c * c * e.values()[i], 1e-12);
    }
  }
}

TEST(DistanceKernel, ReciprocalOfRangeDistance) {
  const Matrix k = distance_kernel(4);
  EXPECT_EQ(k(0, 0), 1.0);
  EXPECT_EQ(k(0, 1), 0.5);
  EXPECT_EQ(k(3, 0), 0.25);
  EXPECT_EQ(k, k.transposed());
  EXPECT_THROW(distance_kernel(0), ShapeError);
}

TEST(FactoredAdjacency, RightMultiplyMatchesDenseProduct) {
  std::mt19937_64 rng(6);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = 1 + rng() % 30;
    const auto h = testing::random_vector(rng, n, 0.0, 1.0);
    const FactoredAdjacency e(h, std::make_shared<const Matrix>(distance_kernel(n)));
    EXPECT_EQ(e.dense(), build_adjacency(h));
    const Matrix x = testing::random_matrix(rng, 3, n);
    EXPECT_LE(max_abs_difference(e.right_multiply(x), matmul(x, build_adjacency(h))), 1e-13);
  }
}

TEST(FactoredAdjacency, RejectsBadInput) {
  auto k3 = std::make_shared<const Matrix>(distance_kernel(3));
  EXPECT_THROW(FactoredAdjacency(std::vector<double>{1.0, 2.0}, k3), ShapeError);
  EXPECT_THROW(FactoredAdjacency(std::vector<double>{1.0, NAN, 2.0}, k3), NumericError);
  EXPECT_THROW(FactoredAdjacency(std::vector<double>{1.0, 2.0, 3.0}, nullptr), ShapeError);
  const FactoredAdjacency e(std::vector<double>{1.0, 2.0, 3.0}, k3);
  EXPECT_THROW(e.right_multiply(Matrix(2, 4)), ShapeError);
}

}  // namespace
}  // namespace hrrpgnet
