#include <random>
#include <vector>

#include <benchmark/benchmark.h>

#include "bondrisk/boosting.hpp"
#include "bondrisk/models.hpp"
#include "bondrisk/nn/layers.hpp"
#include "bondrisk/vbgmm.hpp"

using namespace bondrisk;

namespace {

std::vector<double> random_vector(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> z;
  std::vector<double> v(n);
  for (auto& x : v) x = z(rng);
  return v;
}

void BM_NetworkStep(benchmark::State& state, Variant variant) {
  ArchitectureConfig cfg;
  cfg.variant = variant;
  cfg.window = static_cast<int>(state.range(0));
  Network net(cfg);
  const auto x = random_vector(static_cast<std::size_t>(cfg.window) * cfg.n_features, 1);
  nn::Rng rng(2);
  for (auto _ : state) {
    const double p = net.forward(x, nn::Mode::Train, &rng);
    net.backward(p - 0.3);
    benchmark::DoNotOptimize(p);
  }
  state.SetItemsProcessed(state.iterations());
}

void BM_ConvLstmForward(benchmark::State& state) {
  nn::ConvLstmLayer layer(kNumFeatures, 1, 8, 3);
  nn::Rng rng(3);
  layer.init(rng);
  nn::Sequence x(static_cast<std::size_t>(state.range(0)), kNumFeatures);
  x.data = random_vector(x.data.size(), 4);
  for (auto _ : state) benchmark::DoNotOptimize(layer.forward(x));
}

void BM_LstmForwardBackward(benchmark::State& state) {
  const auto hidden = static_cast<std::size_t>(state.range(0));
  nn::LstmLayer layer(hidden, hidden);
  nn::Rng rng(5);
  layer.init(rng);
  nn::Sequence x(5, hidden);
  x.data = random_vector(x.data.size(), 6);
  nn::Sequence dy(5, hidden, 0.1);
  for (auto _ : state) {
    benchmark::DoNotOptimize(layer.forward(x));
    benchmark::DoNotOptimize(layer.backward(dy));
  }
}

void BM_VbGmmFit(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const std::size_t d = 8;
  FeatureMatrix X(n, d, 0.0);
  std::mt19937_64 rng(7);
  std::normal_distribution<double> z;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) X(i, j) = z(rng) + 6.0 * static_cast<double>(i % 4);
  VbGmmOptions opt;
  opt.components = 8;
  opt.max_iter = 50;
  for (auto _ : state) benchmark::DoNotOptimize(fit_vb_gmm(X, opt));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n));
}

void BM_BoostingFit(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const std::size_t d = 106;
  std::mt19937_64 rng(8);
  std::normal_distribution<float> z;
  std::vector<float> X(n * d);
  for (auto& v : X) v = z(rng);
  std::vector<double> y(n);
  for (std::size_t i = 0; i < n; ++i) y[i] = 0.5 + 0.1 * X[i * d] - 0.05 * X[i * d + 3];
  BoostingParams p;
  p.rounds = 20;
  for (auto _ : state) {
    GradientBoosting g(p);
    g.fit(X, d, y);
    benchmark::DoNotOptimize(g.base());
  }
}

}  // namespace

BENCHMARK_CAPTURE(BM_NetworkStep, ours, Variant::Ours)->Arg(2)->Arg(10);
BENCHMARK_CAPTURE(BM_NetworkStep, rnn, Variant::Rnn)->Arg(2)->Arg(10);
BENCHMARK_CAPTURE(BM_NetworkStep, lstm, Variant::Lstm)->Arg(2);
BENCHMARK_CAPTURE(BM_NetworkStep, pconvlstm, Variant::PConvLstm)->Arg(2);
BENCHMARK(BM_ConvLstmForward)->Arg(2)->Arg(10);
BENCHMARK(BM_LstmForwardBackward)->Arg(32)->Arg(128);
BENCHMARK(BM_VbGmmFit)->Arg(4000);
BENCHMARK(BM_BoostingFit)->Arg(5000);

BENCHMARK_MAIN();
