#include <benchmark/benchmark.h>

#include <random>

#include "mtseg/losses.hpp"
#include "mtseg/model.hpp"
#include "mtseg/ops.hpp"
#include "mtseg/optim.hpp"

namespace {

using namespace mtseg;

Tensor random_tensor(Shape s, std::uint64_t seed, bool requires_grad = false) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<float> u(-1.0f, 1.0f);
  std::vector<Real> v(s.count());
  for (auto& x : v) x = u(rng);
  return Tensor(s, std::move(v), requires_grad);
}

// Args: spatial edge, in channels, out channels.
void BM_Conv3dForward(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const int ci = static_cast<int>(state.range(1));
  const int co = static_cast<int>(state.range(2));
  const Tensor x = random_tensor({2, ci, n, n, n}, 1);
  const Tensor w = random_tensor({co, ci, 3, 3, 3}, 2);
  const Tensor b = random_tensor({1, co, 1, 1, 1}, 3);
  NoGradGuard guard;
  for (auto _ : state) benchmark::DoNotOptimize(conv3d(x, w, b));
  state.counters["FLOP/s"] = benchmark::Counter(2.0 * 2 * n * n * n * ci * co * 27 * state.iterations(),
                                                 benchmark::Counter::kIsRate);
}
BENCHMARK(BM_Conv3dForward)->Args({16, 8, 8})->Args({8, 16, 16})->Args({4, 32, 64})->Unit(benchmark::kMicrosecond);

void BM_Conv3dBackward(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const int ci = static_cast<int>(state.range(1));
  const int co = static_cast<int>(state.range(2));
  Tensor x = random_tensor({2, ci, n, n, n}, 1, true);
  Tensor w = random_tensor({co, ci, 3, 3, 3}, 2, true);
  Tensor b = random_tensor({1, co, 1, 1, 1}, 3, true);
  for (auto _ : state) {
    const Tensor y = conv3d(x, w, b);
    backward(l2(y, Tensor::zeros(y.shape())));
    x.zero_grad();
    w.zero_grad();
    b.zero_grad();
  }
}
BENCHMARK(BM_Conv3dBackward)->Args({16, 8, 8})->Args({8, 16, 16})->Unit(benchmark::kMicrosecond);

// One optimizer step of the default multi-task U-Net on a batch of two 16^3 patches.
void BM_TrainStep(benchmark::State& state) {
  UnetConfig cfg;
  cfg.multitask = state.range(0) != 0;
  MtUnet model = build_model(cfg);
  auto params = model.parameters();
  AdamState adam;
  const Tensor x = random_tensor({2, 1, 16, 16, 16}, 4);
  std::vector<Real> labels(2 * 2 * 16 * 16 * 16);
  for (std::size_t i = 0; i < labels.size(); ++i) labels[i] = (i / 7) % 3 == 0 ? 1.0f : 0.0f;
  const Tensor t({2, 2, 16, 16, 16}, labels);
  for (auto _ : state) {
    const ForwardResult out = model.forward(x, Mode::train);
    const Tensor loss = cfg.multitask ? loss2(out.seg, t, *out.recon, x, 0.8) : loss1(out.seg, t);
    backward(loss);
    adam_step(params, adam, 1e-3);
    model.zero_grad();
  }
}
BENCHMARK(BM_TrainStep)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

}  // namespace
