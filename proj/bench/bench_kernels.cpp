// Serial reference vs OpenMP for each hot kernel. Thread count comes from
// OMP_NUM_THREADS.
#include <benchmark/benchmark.h>

#include <vector>

#include "salcal/kernels.hpp"
#include "salcal/lossmap.hpp"
#include "salcal/rng.hpp"

namespace {

using namespace salcal;

std::vector<double> random_values(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<double> v(n);
  for (double& x : v) x = rng.uniform(0, 10);
  return v;
}

BinaryMask sparse_mask(const GridSpec& g, double density, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<std::uint8_t> bits(g.cell_count(), 1);
  for (auto& b : bits) b = rng.bernoulli(density) ? 0 : 1;
  bits[bits.size() / 2] = 0;
  return BinaryMask(g, std::move(bits));
}

template <auto Kernel>
void BM_Upwind(benchmark::State& state) {
  const kernels::Dims d{static_cast<int>(state.range(0)), static_cast<int>(state.range(0))};
  const auto u = random_values(d.count(), 1);
  std::vector<double> ux(d.count()), uy(d.count());
  for (auto _ : state) {
    Kernel(u, d, ux, uy);
    benchmark::DoNotOptimize(ux.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<long>(d.count()));
}
BENCHMARK(BM_Upwind<kernels::upwind_gradient_serial>)->Name("upwind/serial")->Arg(101)->Arg(401);
BENCHMARK(BM_Upwind<kernels::upwind_gradient_omp>)->Name("upwind/omp")->Arg(101)->Arg(401);

template <auto Kernel>
void BM_ReinitStep(benchmark::State& state) {
  const kernels::Dims d{static_cast<int>(state.range(0)), static_cast<int>(state.range(0))};
  const std::size_t padded_count = static_cast<std::size_t>(d.width + 2) * (d.height + 2);
  auto padded = random_values(padded_count, 2);
  kernels::refresh_ghosts(padded, d);
  std::vector<std::uint8_t> mask(d.count(), 1);
  std::vector<double> next(padded_count);
  for (auto _ : state) {
    benchmark::DoNotOptimize(Kernel(padded, mask, d, 0.1, next));
  }
  state.SetItemsProcessed(state.iterations() * static_cast<long>(d.count()));
}
BENCHMARK(BM_ReinitStep<kernels::reinit_step_serial>)->Name("reinit_step/serial")->Arg(101)->Arg(401);
BENCHMARK(BM_ReinitStep<kernels::reinit_step_omp>)->Name("reinit_step/omp")->Arg(101)->Arg(401);

template <auto Kernel>
void BM_MinDistance(benchmark::State& state) {
  const GridSpec g;
  Rng rng(3);
  std::vector<Point2> targets(static_cast<std::size_t>(state.range(0)));
  for (Point2& p : targets) p = {rng.uniform(g.x_min, g.x_max), rng.uniform(g.y_min, g.y_max)};
  std::vector<double> out(g.cell_count());
  for (auto _ : state) {
    Kernel(g, targets, out);
    benchmark::DoNotOptimize(out.data());
  }
}
BENCHMARK(BM_MinDistance<kernels::min_distance_serial>)->Name("min_distance/serial")->Arg(100)->Arg(1000);
BENCHMARK(BM_MinDistance<kernels::min_distance_omp>)->Name("min_distance/omp")->Arg(100)->Arg(1000);

void BM_Reinitialize(benchmark::State& state) {
  const BinaryMask m = sparse_mask(GridSpec{}, 0.02, 4);
  ReinitConfig cfg;
  cfg.backend = state.range(0) ? Backend::OpenMP : Backend::Serial;
  for (auto _ : state) benchmark::DoNotOptimize(reinitialize(m, cfg).iterations);
}
BENCHMARK(BM_Reinitialize)->Name("reinitialize/serial")->Arg(0)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Reinitialize)->Name("reinitialize/omp")->Arg(1)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
