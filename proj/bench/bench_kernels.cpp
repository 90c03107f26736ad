// Serial reference vs OpenMP kernels.
#include <benchmark/benchmark.h>

#include <vector>

#include "vastopo/edt.hpp"
#include "vastopo/phantom.hpp"
#include "vastopo/seed.hpp"
#include "vastopo/tensor.hpp"

using namespace vastopo;

namespace {

Exec exec_of(const benchmark::State& s) { return s.range(1) ? Exec::Parallel : Exec::Serial; }

void BM_SquaredEdt(benchmark::State& state) {
  PhantomSpec spec;
  const int n = static_cast<int>(state.range(0));
  spec.dims = {n, n, n};
  const auto mask = make_phantom(spec).vessel_mask;
  for (auto _ : state) benchmark::DoNotOptimize(squared_edt(mask, exec_of(state)));
  state.SetItemsProcessed(state.iterations() * static_cast<long>(mask.size()));
}

void BM_Gemm(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  CounterRng rng(1);
  std::vector<double> a(n * n), b(n * n), c(n * n);
  for (auto& v : a) v = rng.uniform(-1, 1);
  for (auto& v : b) v = rng.uniform(-1, 1);
  for (auto _ : state) {
    nn::gemm(a, false, b, false, c, n, n, n, false, exec_of(state));
    benchmark::DoNotOptimize(c.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<long>(2 * n * n * n));
}

}  // namespace

BENCHMARK(BM_SquaredEdt)->ArgsProduct({{32, 64, 96}, {0, 1}})->ArgNames({"n", "omp"})->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Gemm)->ArgsProduct({{64, 256, 512}, {0, 1}})->ArgNames({"n", "omp"})->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
