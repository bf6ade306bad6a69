#include <benchmark/benchmark.h>

#include "gkfp/estimates.hpp"
#include "gkfp/geometry.hpp"
#include "gkfp/operators.hpp"
#include "gkfp/partitions.hpp"

using namespace gkfp;

static void BM_OscillatorAssembly(benchmark::State& state) {
  const int N = static_cast<int>(state.range(0));
  HermiteBasis basis = HermiteBasis::make(2, N);
  RealMatrix g(2, 2);
  g << 2.0, 0.3, 0.3, 0.75;
  for (auto _ : state) {
    FiberOperator op = assemble_oscillator(basis, g);
    benchmark::DoNotOptimize(op.matrix.data());
  }
  state.SetComplexityN(N);
}
BENCHMARK(BM_OscillatorAssembly)->RangeMultiplier(2)->Range(8, 32)->Complexity();

static void BM_MinConstant(benchmark::State& state) {
  const int N = static_cast<int>(state.range(0));
  HermiteBasis basis = HermiteBasis::make(1, N);
  QuadraticFormBundle bundle;
  bundle.L = op_number(basis).matrix + Matrix::Identity(N, N);
  bundle.rhs = {op_number(basis).matrix, op_position(basis, 0).matrix};
  bundle.weights = {1.0, 0.5};
  for (auto _ : state) {
    MinConstantResult r = min_constant(bundle);
    benchmark::DoNotOptimize(r.c);
  }
  state.SetComplexityN(N);
}
BENCHMARK(BM_MinConstant)->RangeMultiplier(2)->Range(32, 256)->Complexity();

static void BM_ResolventNorm(benchmark::State& state) {
  const int M = static_cast<int>(state.range(0));
  PGrid grid = PGrid::make(12.0, M, PGrid::Boundary::dirichlet);
  FiberOperator op = op_airy_grid(grid, 4.0, 0.0);
  for (auto _ : state) {
    const double rn = resolvent_norm(op, Complex(0, 0));
    benchmark::DoNotOptimize(rn);
  }
  state.SetComplexityN(M);
}
BENCHMARK(BM_ResolventNorm)->RangeMultiplier(2)->Range(64, 512)->Complexity();

static void BM_DyadicPartitionEval(benchmark::State& state) {
  DyadicPartition part = build_dyadic();
  double s = 0.1;
  for (auto _ : state) {
    double acc = 0;
    for (int i = 0; i < 1000; ++i) {
      acc += part.identity_sum(s);
      s = (s < 1e5) ? s * 1.01 : 0.1;
    }
    benchmark::DoNotOptimize(acc);
  }
}
BENCHMARK(BM_DyadicPartitionEval);

static void BM_ScaledAssembly(benchmark::State& state) {
  MetricField metric = MetricField::sin1d(0.1);
  HermiteBasis basis = HermiteBasis::make(1, static_cast<int>(state.range(0)));
  QGrid qgrid{16, 2.0 * M_PI};
  GkfpParams params;
  params.b = 1.0;
  for (auto _ : state) {
    FiberOperator op = assemble_scaled(params, 0, metric, qgrid, PRep::make_hermite(basis));
    benchmark::DoNotOptimize(op.matrix.data());
  }
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_ScaledAssembly)->RangeMultiplier(2)->Range(8, 32)->Complexity();

BENCHMARK_MAIN();
