#include <benchmark/benchmark.h>

#include <vector>

#include "distort/density.hpp"
#include "distort/dynamics.hpp"
#include "distort/philox.hpp"
#include "distort/tree.hpp"

using namespace distort;

namespace {

std::vector<double> ramp(std::size_t n) {
  std::vector<double> g(n + 1);
  for (std::size_t j = 0; j <= n; ++j) g[j] = static_cast<double>(j) / static_cast<double>(n);
  return g;
}

void BM_DistortTree(benchmark::State& state) {
  const auto N = static_cast<std::size_t>(state.range(0));
  const auto tree = lattice_from_diffusion(DiffusionSpec::brownian(0.0, 1.0), N);
  const auto d = DistortionSpec::wang(0.5);
  for (auto _ : state) benchmark::DoNotOptimize(distort_tree(tree, d));
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_DistortTree)->RangeMultiplier(4)->Range(64, 4096)->Unit(benchmark::kMillisecond)->Complexity();

void BM_BackwardInduction(benchmark::State& state) {
  const auto N = static_cast<std::size_t>(state.range(0));
  const auto dt = distort_tree(lattice_from_diffusion(DiffusionSpec::brownian(0.0, 1.0), N), DistortionSpec::wang(0.5));
  const auto g = ramp(N);
  for (auto _ : state) benchmark::DoNotOptimize(backward_induction(dt, g, N));
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_BackwardInduction)->RangeMultiplier(4)->Range(64, 4096)->Unit(benchmark::kMillisecond)->Complexity();

void BM_TwoPeriodStatic(benchmark::State& state) {
  const auto tree = TreeModel::symmetric(2, 0.0, 1.0, 1.0);
  const auto d = DistortionSpec::power(2.0);
  const std::vector<double> g{0.0, 1.0, 2.0};
  for (auto _ : state) {
    benchmark::DoNotOptimize(naive_nested_expectation(tree, d, g));
    benchmark::DoNotOptimize(static_expectation(tree, d, g));
  }
}
BENCHMARK(BM_TwoPeriodStatic);

void BM_SurvivalPde(benchmark::State& state) {
  const auto spec = DiffusionSpec::tanh_drift(0.8, 1.0);
  const auto x = uniform_grid(-8.0, 8.0, static_cast<std::size_t>(state.range(0)));
  SurvivalPdeOptions opt;
  opt.steps = 400;
  for (auto _ : state) benchmark::DoNotOptimize(solve_survival_pde(spec, {0.01, 0.5, 1.0}, x, opt));
}
BENCHMARK(BM_SurvivalPde)->Arg(801)->Arg(1601)->Unit(benchmark::kMillisecond);

void BM_DistortedPde(benchmark::State& state) {
  const auto spec = DiffusionSpec::brownian(0.0, 1.0);
  const GaussianDensity density(spec);
  const auto mu = compute_mu(DistortionSpec::wang(0.5), density, spec.drift, uniform_grid(0.1, 1.0, 91),
                             uniform_grid(-8.0, 8.0, 321));
  const auto g = MonotoneGrid::sample([](double x) { return x > 0 ? 1.0 : 0.0; }, uniform_grid(-10.0, 10.0, 2001),
                                      Direction::Increasing);
  PdeGrid grid;
  grid.nx = static_cast<std::size_t>(state.range(0));
  grid.steps = 400;
  for (auto _ : state) benchmark::DoNotOptimize(solve_distorted_pde(mu.as_function(), g, 0.1, 1.0, grid));
}
BENCHMARK(BM_DistortedPde)->Arg(801)->Arg(1601)->Unit(benchmark::kMillisecond);

void BM_BridgeDensity(benchmark::State& state) {
  const auto spec = DiffusionSpec::tanh_drift(0.8, 1.0);
  BridgeOptions opt;
  opt.paths = static_cast<std::size_t>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(bridge_density_mc(spec, 1.0, 0.3, opt));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_BridgeDensity)->Arg(10000)->Arg(100000)->Unit(benchmark::kMillisecond);

void BM_PhiloxNormal(benchmark::State& state) {
  PathRng rng(1, 0);
  for (auto _ : state) benchmark::DoNotOptimize(rng.normal());
  state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_PhiloxNormal);

}  // namespace

BENCHMARK_MAIN();
