#include <benchmark/benchmark.h>

#include <memory>
#include <random>
#include <vector>

#include "hrrpgnet/data.hpp"
#include "hrrpgnet/graphgen.hpp"
#include "hrrpgnet/layers.hpp"
#include "hrrpgnet/model.hpp"

namespace {

using namespace hrrpgnet;

std::vector<double> random_profile(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> h(n);
  for (double& v : h) v = u(rng);
  return h;
}

Matrix random_features(std::size_t rows, std::size_t cols, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Matrix m(rows, cols);
  for (double& v : m.values()) v = u(rng);
  return m;
}

void BM_BuildAdjacency(benchmark::State& state) {
  const auto h = random_profile(static_cast<std::size_t>(state.range(0)), 1);
  for (auto _ : state) benchmark::DoNotOptimize(build_adjacency(h));
}
BENCHMARK(BM_BuildAdjacency)->Arg(64)->Arg(501);

void BM_GraphConvDense(benchmark::State& state) {
  const std::size_t n = 501, in = 16, out = 32;
  const auto h = random_profile(n, 2);
  const Matrix e = build_adjacency(h);
  const Matrix v = random_features(in, n, 3);
  const GraphConvParams p{random_features(out, in, 4), random_features(out, in, 5), Matrix(out, n)};
  const Matrix up = random_features(out, n, 6);
  for (auto _ : state) {
    GraphConvCache cache;
    benchmark::DoNotOptimize(graphconv_forward(v, e, p, &cache));
    benchmark::DoNotOptimize(graphconv_backward(cache, e, p, up));
  }
}
BENCHMARK(BM_GraphConvDense)->Unit(benchmark::kMillisecond);

void BM_GraphConvFactored(benchmark::State& state) {
  const std::size_t n = 501, in = 16, out = 32;
  const FactoredAdjacency e(random_profile(n, 2), std::make_shared<const Matrix>(distance_kernel(n)));
  const Matrix v = random_features(in, n, 3);
  const GraphConvParams p{random_features(out, in, 4), random_features(out, in, 5), Matrix(out, n)};
  const Matrix up = random_features(out, n, 6);
  for (auto _ : state) {
    GraphConvCache cache;
    benchmark::DoNotOptimize(graphconv_forward(v, e, p, &cache));
    benchmark::DoNotOptimize(graphconv_backward(cache, e, p, up));
  }
}
BENCHMARK(BM_GraphConvFactored)->Unit(benchmark::kMillisecond);

void BM_ModelTrainStep(benchmark::State& state) {
  ModelConfig config;
  config.ablation = AblationConfig::parse(state.range(0) == 0 ? "abc" : "b");
  ModelParams params = init_params(config);
  const auto bench = generate_benchmark(default_three_class_spec(), 11, 7);
  std::vector<HrrpSample> batch(bench.train.samples.begin(), bench.train.samples.begin() + 32);
  std::vector<std::size_t> labels;
  for (const auto& s : batch) labels.push_back(s.label);
  for (auto _ : state) {
    BatchForward fwd = forward_batch(batch, params, config, true);
    backward(fwd.cache, labels, params);
  }
  state.SetItemsProcessed(state.iterations() * 32);
}
BENCHMARK(BM_ModelTrainStep)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

void BM_ModelPredict(benchmark::State& state) {
  ModelConfig config;
  const ModelParams params = init_params(config);
  const HrrpSample s{random_profile(config.cells, 8), 0};
  for (auto _ : state) benchmark::DoNotOptimize(predict(s, params, config));
}
BENCHMARK(BM_ModelPredict)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
