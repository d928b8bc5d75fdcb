// Serial reference kernels vs the OpenMP kernels on the shapes that dominate
// training: pixel batches through the field layers and their gradients.
#include <benchmark/benchmark.h>

#include <vector>

#include "inrv/field.hpp"
#include "inrv/graph.hpp"
#include "inrv/kernels.hpp"
#include "inrv/rng.hpp"

namespace {

std::vector<double> random_values(std::size_t n, std::uint64_t seed) {
  inrv::Philox rng(seed);
  std::vector<double> v(n);
  for (auto& x : v) x = rng.uniform() - 0.5;
  return v;
}

template <void (*Kernel)(std::span<const double>, std::span<const double>, std::span<double>, std::size_t,
                         std::size_t, std::size_t)>
void BM_Matmul(benchmark::State& state) {
  const auto m = static_cast<std::size_t>(state.range(0));
  const auto k = static_cast<std::size_t>(state.range(1));
  const auto n = static_cast<std::size_t>(state.range(2));
  const auto a = random_values(m * k, 1);
  const auto b = random_values(k * n, 2);
  std::vector<double> c(m * n);
  for (auto _ : state) {
    Kernel(a, b, c, m, k, n);
    benchmark::DoNotOptimize(c.data());
  }
  state.counters["GMAC/s"] =
      benchmark::Counter(static_cast<double>(m * k * n) * 1e-9, benchmark::Counter::kIsIterationInvariantRate);
}

template <void (*Kernel)(std::span<const double>, std::span<const double>, std::span<double>, std::size_t,
                         std::size_t, std::size_t)>
void BM_MatmulTn(benchmark::State& state) {
  const auto m = static_cast<std::size_t>(state.range(0));
  const auto k = static_cast<std::size_t>(state.range(1));
  const auto n = static_cast<std::size_t>(state.range(2));
  const auto a = random_values(m * k, 1);
  const auto b = random_values(m * n, 2);
  std::vector<double> c(k * n);
  for (auto _ : state) {
    Kernel(a, b, c, m, k, n);
    benchmark::DoNotOptimize(c.data());
  }
  state.counters["GMAC/s"] =
      benchmark::Counter(static_cast<double>(m * k * n) * 1e-9, benchmark::Counter::kIsIterationInvariantRate);
}

void shapes(benchmark::internal::Benchmark* b) {
  b->Args({1024, 24, 64})->Args({1024, 64, 64})->Args({1024, 64, 3})->Args({10, 128, 4160});
}

BENCHMARK(BM_Matmul<inrv::kernels::serial::matmul>)->Apply(shapes);
BENCHMARK(BM_Matmul<inrv::kernels::matmul>)->Apply(shapes);
BENCHMARK(BM_Matmul<inrv::kernels::serial::matmul_nt>)->Apply(shapes);
BENCHMARK(BM_Matmul<inrv::kernels::matmul_nt>)->Apply(shapes);
BENCHMARK(BM_MatmulTn<inrv::kernels::serial::matmul_tn>)->Apply(shapes);
BENCHMARK(BM_MatmulTn<inrv::kernels::matmul_tn>)->Apply(shapes);

// One forward + backward pass of the test-profile field over a pixel batch.
void BM_FieldStep(benchmark::State& state) {
  const auto batch = static_cast<std::size_t>(state.range(0));
  const inrv::ThetaLayout layout(inrv::FieldArch{4, 64});
  inrv::Tensor theta = inrv::init_theta(layout, 3);
  inrv::Tensor coords({batch, 3});
  inrv::Philox rng(4);
  for (auto& v : coords.data()) v = 2.0 * rng.uniform() - 1.0;
  const inrv::Tensor feats = inrv::positional_encode(coords, 4);
  const inrv::Tensor target({batch, 3}, 0.5);
  for (auto _ : state) {
    inrv::Graph g;
    const auto th = g.leaf(inrv::Tensor(theta).set_requires_grad(true));
    const auto f = g.leaf(feats);
    const auto y = g.leaf(target);
    const auto loss = g.reduce_mean(g.square(g.sub(inrv::build_field(g, th, f, layout), y)));
    g.evaluate(loss);
    auto grads = g.backward(loss);
    benchmark::DoNotOptimize(grads.size());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(batch));
}
BENCHMARK(BM_FieldStep)->Arg(1024)->Arg(4096);

}  // namespace

BENCHMARK_MAIN();
