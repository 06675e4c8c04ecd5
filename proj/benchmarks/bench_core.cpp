#include <benchmark/benchmark.h>

#include "fdnet/data.hpp"
#include "fdnet/model.hpp"
#include "fdnet/train.hpp"

using namespace fdnet;

namespace {

void BM_gemm(benchmark::State& state) {
  const int64_t n = state.range(0);
  Rng rng(1);
  auto a = rand_uniform<float>({n, n}, rng);
  auto b = rand_uniform<float>({n, n}, rng);
  for (auto _ : state) {
    NoGradGuard ng;
    auto c = matmul(a, b);
    benchmark::DoNotOptimize(c.values().data());
  }
  state.SetItemsProcessed(state.iterations() * 2 * n * n * n);
}
BENCHMARK(BM_gemm)->Arg(64)->Arg(128)->Arg(256);

void BM_conv2d_forward(benchmark::State& state) {
  Rng rng(2);
  auto layer = Conv2d<float>::make(16, 16, 3, 1, 1);
  he_normal_fill(layer.weight, layer.fan_in(), rng);
  auto x = rand_uniform<float>({8, 16, 32, 32}, rng);
  for (auto _ : state) {
    NoGradGuard ng;
    auto y = conv2d(x, layer);
    benchmark::DoNotOptimize(y.values().data());
  }
}
BENCHMARK(BM_conv2d_forward);

void BM_gaussian_filter(benchmark::State& state) {
  const int64_t k = state.range(0);
  Rng rng(3);
  auto x = rand_uniform<float>({8, 16, 32, 32}, rng);
  auto kernel = Tensor32::from({k}, gaussian_kernel_1d<float>(k, 1.0f));
  for (auto _ : state) {
    NoGradGuard ng;
    auto y = separable_filter(x, kernel);
    benchmark::DoNotOptimize(y.values().data());
  }
}
BENCHMARK(BM_gaussian_filter)->Arg(3)->Arg(5)->Arg(7);

void BM_fdresnet_tiny_forward(benchmark::State& state) {
  auto model = build_model<float>(fdresnet_tiny(), 1);
  Rng rng(4);
  auto x = rand_uniform<float>({64, 3, 32, 32}, rng);
  for (auto _ : state) {
    NoGradGuard ng;
    auto y = model.forward(x, Mode::Eval);
    benchmark::DoNotOptimize(y.values().data());
  }
  state.SetItemsProcessed(state.iterations() * 64);
}
BENCHMARK(BM_fdresnet_tiny_forward);

void BM_fdresnet_tiny_train_step(benchmark::State& state) {
  auto model = build_model<float>(fdresnet_tiny(4), 1);
  auto params = model.named_parameters();
  SgdStateT<float> opt;
  opt.init(params);
  Rng rng(5);
  auto x = rand_uniform<float>({64, 3, 32, 32}, rng);
  std::vector<int> labels(64);
  for (auto& l : labels) l = static_cast<int>(rng.below(4));
  for (auto _ : state) {
    for (auto& p : params) p.tensor.zero_grad();
    auto loss = cross_entropy(model.forward(x, Mode::Train), labels);
    loss.backward();
    sgd_step(params, opt, 0.1, 0.9, 5e-4);
    benchmark::DoNotOptimize(loss.value());
  }
  state.SetItemsProcessed(state.iterations() * 64);
}
BENCHMARK(BM_fdresnet_tiny_train_step);

}  // namespace

BENCHMARK_MAIN();
