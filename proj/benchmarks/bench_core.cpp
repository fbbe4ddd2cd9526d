#include <benchmark/benchmark.h>

#include "entrolab/analysis.hpp"
#include "entrolab/lattice_kernel.hpp"
#include "entrolab/scenario.hpp"

namespace {

using namespace entrolab;

const MeasureSpace& line_space() {
  static const MeasureSpace space = build_interval_grid(400, 8.0, Boundary::neumann);
  return space;
}

const Field& left_bump() {
  MarginalSpec spec;
  spec.preset = "gaussian_bump";
  spec.center = 2.5;
  spec.width = 0.6;
  static const Field f = build_marginal(line_space(), spec, "rho0");
  return f;
}

const Field& right_bump() {
  MarginalSpec spec;
  spec.preset = "gaussian_bump";
  spec.center = 5.5;
  spec.width = 0.6;
  static const Field f = build_marginal(line_space(), spec, "rho1");
  return f;
}

void kernel_build(benchmark::State& state) {
  const auto& space = line_space();
  for (auto _ : state) {
    benchmark::DoNotOptimize(make_log_heat_kernel(space, 0.05));
  }
}
BENCHMARK(kernel_build);

void kernel_apply(benchmark::State& state) {
  const auto& space = line_space();
  const LogHeatKernel kernel = make_log_heat_kernel(space, 0.05);
  const Vector log_field = left_bump().values.array().log();
  for (auto _ : state) {
    benchmark::DoNotOptimize(kernel.apply(log_field));
  }
}
BENCHMARK(kernel_apply);

void sinkhorn_solve(benchmark::State& state) {
  const auto& space = line_space();
  SinkhornOptions opts;
  opts.record_history = false;
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        solve_schrodinger_system(space, left_bump(), right_bump(), 0.2, opts));
  }
}
BENCHMARK(sinkhorn_solve);

void gamma_ops(benchmark::State& state) {
  const auto& space = line_space();
  const Vector f = left_bump().values.array().log();
  for (auto _ : state) {
    benchmark::DoNotOptimize(space.gamma_raw(f, f));
    benchmark::DoNotOptimize(space.apply_generator_raw(f));
  }
}
BENCHMARK(gamma_ops);

void curve_build(benchmark::State& state) {
  const auto& space = line_space();
  SinkhornOptions opts;
  opts.record_history = false;
  const SchrodingerSolution sol =
      solve_schrodinger_system(space, left_bump(), right_bump(), 0.2, opts);
  for (auto _ : state) {
    benchmark::DoNotOptimize(interpolate(space, sol, 32, 1));
  }
}
BENCHMARK(curve_build);

void quantile_distance(benchmark::State& state) {
  const auto& space = line_space();
  for (auto _ : state) {
    benchmark::DoNotOptimize(w2_distance_1d(space, left_bump(), right_bump()));
  }
}
BENCHMARK(quantile_distance);

}  // namespace

BENCHMARK_MAIN();
