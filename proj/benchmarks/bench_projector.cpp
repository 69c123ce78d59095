#include <benchmark/benchmark.h>

#include <random>

#include "mtseg/fdk.hpp"
#include "mtseg/phantom.hpp"
#include "mtseg/projector.hpp"

namespace {

using namespace mtseg;

void BM_RayIntegral(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const Phantom ph = make_phantom({n, n, n}, 1);
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(-n, n);
  std::vector<std::pair<Vec3, Vec3>> rays(256);
  for (auto& r : rays) r = {{-2.0 * n, u(rng), u(rng)}, {2.0 * n, u(rng), u(rng)}};
  std::size_t i = 0;
  for (auto _ : state) {
    const auto& r = rays[i++ % rays.size()];
    benchmark::DoNotOptimize(ray_integral(ph.volume, r.first, r.second));
  }
  state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_RayIntegral)->Arg(32)->Arg(64);

void BM_Simulate(benchmark::State& state) {
  const Phantom ph = make_phantom({32, 32, 32}, 1);
  const ConeBeamGeometry g = default_geometry(ph.volume.grid, static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(simulate_projections(ph.volume, g));
  state.SetItemsProcessed(state.iterations() * g.n_proj);
}
BENCHMARK(BM_Simulate)->Arg(32)->Unit(benchmark::kMillisecond);

void BM_Fdk(benchmark::State& state) {
  const Phantom ph = make_phantom({32, 32, 32}, 1);
  const ProjectionSet p = simulate_projections(ph.volume, default_geometry(ph.volume.grid, static_cast<int>(state.range(0))));
  for (auto _ : state) benchmark::DoNotOptimize(fdk_reconstruct(p, ph.volume.grid));
  state.SetItemsProcessed(state.iterations() * p.geometry.n_proj);
}
BENCHMARK(BM_Fdk)->Arg(32)->Arg(128)->Unit(benchmark::kMillisecond);

}  // namespace
