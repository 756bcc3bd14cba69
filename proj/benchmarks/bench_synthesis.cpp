#include <benchmark/benchmark.h>

#include <numbers>

#include "cgff/capacity.hpp"
#include "cgff/field.hpp"
#include "cgff/kernel.hpp"
#include "cgff/spectra.hpp"

namespace {

void BM_TorusSample(benchmark::State& state) {
  const int N = int(state.range(0));
  const double L = double(N / 2 - 1) * double(N / 2 - 1);
  const cgff::CgffSampler sampler(cgff::SurfaceModel::torus(), {0.0, L}, N);
  std::uint64_t seed = 0;
  for (auto _ : state) {
    auto s = sampler.sample(seed++, false);
    benchmark::DoNotOptimize(s.grid.values().data());
  }
  state.counters["modes"] = double(sampler.size());
}
BENCHMARK(BM_TorusSample)->Arg(128)->Arg(256)->Arg(512)->Unit(benchmark::kMillisecond);

void BM_RectangleSample(benchmark::State& state) {
  const int N = int(state.range(0));
  const double L = double(N - 1) * double(N - 1);
  const cgff::CgffSampler sampler(cgff::SurfaceModel::dirichlet_rectangle(), {0.0, L}, N);
  std::uint64_t seed = 0;
  for (auto _ : state) {
    auto s = sampler.sample(seed++, false);
    benchmark::DoNotOptimize(s.grid.values().data());
  }
}
BENCHMARK(BM_RectangleSample)->Arg(128)->Arg(256)->Arg(512)->Unit(benchmark::kMillisecond);

void BM_Enumerate(benchmark::State& state) {
  const double L = double(state.range(0));
  for (auto _ : state) {
    auto b = cgff::enumerate_eigenpairs(cgff::SurfaceModel::torus(), L);
    benchmark::DoNotOptimize(b.size());
  }
}
BENCHMARK(BM_Enumerate)->Arg(1000)->Arg(100000)->Unit(benchmark::kMillisecond);

void BM_Covariance(benchmark::State& state) {
  const double L = double(state.range(0));
  const auto m = cgff::SurfaceModel::torus();
  cgff::covariance(m, L, {0.1, 0.2}, {0.3, 0.4});
  for (auto _ : state) benchmark::DoNotOptimize(cgff::covariance(m, L, {0.1, 0.2}, {0.3, 0.4}));
}
BENCHMARK(BM_Covariance)->Arg(1000)->Arg(10000)->Unit(benchmark::kMicrosecond);

void BM_CapacityRectangle(benchmark::State& state) {
  const int N = int(state.range(0));
  const auto m = cgff::SurfaceModel::dirichlet_rectangle();
  const cgff::Shape d = cgff::Disk{std::numbers::pi / 2, std::numbers::pi / 2, 0.1 * std::numbers::pi};
  const auto mask = cgff::DomainMask::from_shapes(cgff::GridGeometry(m, N), std::span(&d, 1));
  for (auto _ : state) benchmark::DoNotOptimize(cgff::solve_capacity_primal(mask).primal);
}
BENCHMARK(BM_CapacityRectangle)->Arg(64)->Arg(128)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
