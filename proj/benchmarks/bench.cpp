#include <benchmark/benchmark.h>

#include "fieldreg/dependence.hpp"
#include "fieldreg/field_sim.hpp"
#include "fieldreg/inference.hpp"
#include "fieldreg/regression.hpp"

using namespace fieldreg;

static void BM_EstimateGrid2d(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const Lattice lat(n, 2);
  const Kernel kernel = Kernel::epanechnikov_paper(2);
  const double h = std::pow(n, -0.25);
  const Field y = simulate(FieldSpec::iid(1.0, 42), lat, 1);
  for (auto _ : state) {
    auto grid = estimate_grid(y.values, lat, kernel, h, 1);
    benchmark::DoNotOptimize(grid.values.data());
  }
  state.SetItemsProcessed(state.iterations() * lat.size());
}
BENCHMARK(BM_EstimateGrid2d)->Arg(32)->Arg(64)->Arg(128);

static void BM_SimulateSpectral(benchmark::State& state) {
  const int m = static_cast<int>(state.range(0));
  const Lattice lat(64, 2);
  const FieldSpec spec = FieldSpec::exp_spectral(200.0, 1.0, m, 7);
  for (auto _ : state) {
    auto field = simulate(spec, lat, 1);
    benchmark::DoNotOptimize(field.values.data());
  }
  state.SetItemsProcessed(state.iterations() * lat.size() * m);
}
BENCHMARK(BM_SimulateSpectral)->Arg(256)->Arg(1024)->Arg(4096);

static void BM_EstimateEta(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const Lattice lat(n, 2);
  const Field eps = simulate(FieldSpec::iid(1.0, 3), lat, 1);
  const int rho = default_rho(n, 2);
  for (auto _ : state) {
    auto eta = estimate_eta(eps, rho, 1);
    benchmark::DoNotOptimize(eta.value);
  }
}
BENCHMARK(BM_EstimateEta)->Arg(64)->Arg(128)->Arg(256);

static void BM_ChiSquarePvalue(benchmark::State& state) {
  double z = 0.0;
  for (auto _ : state) {
    z += 1e-6;
    benchmark::DoNotOptimize(chi_square_pvalue(z));
  }
}
BENCHMARK(BM_ChiSquarePvalue);

static void BM_KernelEvaluate(benchmark::State& state) {
  const Kernel kernel = Kernel::epanechnikov_paper(2);
  double u[2] = {0.1, 0.2};
  for (auto _ : state) {
    u[0] = u[0] < 0.9 ? u[0] + 1e-7 : 0.1;
    benchmark::DoNotOptimize(kernel.evaluate(u));
  }
}
BENCHMARK(BM_KernelEvaluate);

BENCHMARK_MAIN();
