// Serial reference kernels against their OpenMP forms.
//
//   bench_kernels --benchmark_filter=partition
//
// Range argument 0 runs the serial form, 1 the OpenMP form.

#include <benchmark/benchmark.h>

#include "ensdev/estimator.hpp"
#include "ensdev/mixing.hpp"
#include "ensdev/resonance.hpp"

using namespace ensdev;

namespace {

Exec exec_of(const benchmark::State& s) { return s.range(0) == 0 ? Exec::serial : Exec::openmp; }

struct Twist {
  Builtin b = builtin_system("twist2", 1e-3);
  ActionGrid grid = build_grid(b.system.domain, {120});
  EnsembleDensity f0 = EnsembleDensity::normalize(b.density, b.system.domain, grid);
};

const Twist& twist() {
  static const Twist t;
  return t;
}

void label(benchmark::State& s) { s.SetLabel(exec_name(exec_of(s))); }

void BM_build_partition(benchmark::State& s) {
  const auto& t = twist();
  const auto grid = build_grid(t.b.system.domain, {400});
  for (auto _ : s) benchmark::DoNotOptimize(build_partition(t.b.system.integrable, {3, 0.05}, grid, exec_of(s)));
  label(s);
}

void BM_resonant_mass(benchmark::State& s) {
  const auto& t = twist();
  const auto map = build_partition(t.b.system.integrable, {3, 0.05}, build_grid(t.b.system.domain, {400}));
  for (auto _ : s) benchmark::DoNotOptimize(resonant_mass(t.f0, map, exec_of(s)));
  label(s);
}

void BM_mode_l1_norms(benchmark::State& s) {
  const auto& t = twist();
  const FieldModeSource src(t.b.observable, t.f0.field);
  for (auto _ : s) benchmark::DoNotOptimize(mode_l1_norms(src, t.grid, exec_of(s)));
  label(s);
}

void BM_mixing_constant(benchmark::State& s) {
  const auto& t = twist();
  const FieldModeSource src(t.b.observable, t.f0.field);
  for (auto _ : s)
    benchmark::DoNotOptimize(
        mixing_constant(t.b.system.integrable, src, 2, t.grid, "ball", "density", kGammaFloor, exec_of(s)));
  label(s);
}

void BM_sample_density(benchmark::State& s) {
  const auto& t = twist();
  for (auto _ : s)
    benchmark::DoNotOptimize(sample_density(t.f0, t.b.system.domain, 20000, SeededRng(1, 0), exec_of(s)));
  label(s);
}

void BM_ensemble_series(benchmark::State& s) {
  const auto& t = twist();
  const auto samples = sample_density(t.f0, t.b.system.domain, 400, SeededRng(2, 0));
  const Flow flow = Flow::symplectic(std::make_shared<PerturbedHamiltonian>(t.b.system), 1e-2);
  const CompiledField G(t.b.observable);
  const std::vector<double> times{1.0, 2.0, 5.0, 10.0};
  for (auto _ : s) benchmark::DoNotOptimize(ensemble_series(G, flow, samples, times, exec_of(s)));
  label(s);
}

}  // namespace

BENCHMARK(BM_build_partition)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_resonant_mass)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_mode_l1_norms)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_mixing_constant)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_sample_density)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_ensemble_series)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
