#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "sacnet/acm.hpp"
#include "sacnet/afsm.hpp"
#include "sacnet/datagen.hpp"
#include "sacnet/metrics.hpp"
#include "sacnet/network.hpp"
#include "sacnet/tensor.hpp"

using namespace sacnet;

namespace {

Tensor random_tensor(Shape shape, std::uint64_t seed, double lo = -1.0, double hi = 1.0) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(lo, hi);
  std::vector<double> v(shape_numel(shape));
  for (double& x : v) x = u(rng);
  return Tensor(std::move(shape), std::move(v));
}

void BM_Conv2d(benchmark::State& state) {
  const auto side = static_cast<std::size_t>(state.range(0));
  const Tensor x = random_tensor({32, side, side}, 1);
  const Tensor w = random_tensor({32, 32, 3, 3}, 2);
  const Tensor b = random_tensor({32}, 3);
  for (auto _ : state) benchmark::DoNotOptimize(conv2d(x, w, b, 1, 1));
}
BENCHMARK(BM_Conv2d)->Arg(16)->Arg(32);

void BM_DeformableConv(benchmark::State& state) {
  const auto side = static_cast<std::size_t>(state.range(0));
  const Tensor x = random_tensor({32, side, side}, 4);
  const Tensor off = random_tensor({18, side, side}, 5, -1.5, 1.5);
  const Tensor w = random_tensor({32, 32, 3, 3}, 6);
  const Tensor b = random_tensor({32}, 7);
  for (auto _ : state) benchmark::DoNotOptimize(deformable_conv2d(x, off, w, b));
}
BENCHMARK(BM_DeformableConv)->Arg(16)->Arg(32);

void BM_Correlation(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  ParamStore store;
  Initializer init(8);
  const CorrelationParams p = make_correlation_params(store, init, "c", 64);
  const Tensor q = random_tensor({n, 64}, 9);
  const Tensor kv = random_tensor({n * 2, 64}, 10);
  for (auto _ : state) benchmark::DoNotOptimize(correlation(q, kv, p));
}
BENCHMARK(BM_Correlation)->Arg(16)->Arg(256);

void BM_AcmForward(benchmark::State& state) {
  ParamStore store;
  Initializer init(11);
  const AcmParams p = make_acm_params(store, init, "acm", 32);
  const Tensor a = random_tensor({32, 16, 16}, 12), b = random_tensor({32, 16, 16}, 13);
  const WindowPairGrid g = build_window_grid(16, 16, 4, 6);
  for (auto _ : state) benchmark::DoNotOptimize(acm_forward(a, b, a, b, g, p));
}
BENCHMARK(BM_AcmForward);

void BM_Forward64(benchmark::State& state) {
  SACNetConfig cfg;
  cfg.input_size = 64;
  const SACNet net(cfg);
  const Tensor rgb = random_tensor({3, 64, 64}, 14, 0.0, 1.0), th = random_tensor({3, 64, 64}, 15, 0.0, 1.0);
  for (auto _ : state) benchmark::DoNotOptimize(net.forward(rgb, th));
}
BENCHMARK(BM_Forward64)->Unit(benchmark::kMillisecond);

void BM_Metrics(benchmark::State& state) {
  const auto side = static_cast<std::size_t>(state.range(0));
  const Scene sc = gen_scene(16, SceneConfig{side});
  const Tensor s = random_tensor({1, side, side}, 17, 0.0, 1.0);
  for (auto _ : state) {
    benchmark::DoNotOptimize(s_measure(s, sc.gt));
    benchmark::DoNotOptimize(e_measure(s, sc.gt));
    benchmark::DoNotOptimize(weighted_f(s, sc.gt));
  }
}
BENCHMARK(BM_Metrics)->Arg(64)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
