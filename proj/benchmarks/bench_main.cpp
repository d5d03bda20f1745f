#include <spinmaser/analysis.hpp>
#include <spinmaser/assembler.hpp>
#include <spinmaser/dynamics.hpp>
#include <spinmaser/model.hpp>
#include <spinmaser/spectrum.hpp>

#include <benchmark/benchmark.h>

using namespace spinmaser;

namespace {

ModelSpec preset_with_pump(const char* name, double power) {
  ModelSpec m = build_preset(name);
  m.pump = PumpSchedule::constant(pump_rate_from_power(m.optics, power));
  return m;
}

const char* preset_name(int64_t i) { return i == 0 ? "nv" : "pentacene"; }

void BM_Completion(benchmark::State& state) {
  const ModelSpec m = build_preset(preset_name(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(complete_system(m));
}
BENCHMARK(BM_Completion)->Arg(0)->Arg(1)->Unit(benchmark::kMicrosecond);

void BM_Rhs(benchmark::State& state) {
  const auto sys = compile_rhs(complete_system(build_preset(preset_name(state.range(0)))));
  const Eigen::VectorXd y = thermal_initial_state(sys).y;
  Eigen::VectorXd dy(y.size());
  for (auto _ : state) {
    sys.rhs(y, 2.0e3, dy);
    benchmark::DoNotOptimize(dy.data());
  }
  state.counters["dim"] = sys.dimension();
}
BENCHMARK(BM_Rhs)->Arg(0)->Arg(1);

void BM_Jacobian(benchmark::State& state) {
  const auto sys = compile_rhs(complete_system(build_preset(preset_name(state.range(0)))));
  const Eigen::VectorXd y = thermal_initial_state(sys).y;
  Eigen::MatrixXd jac(y.size(), y.size());
  for (auto _ : state) {
    sys.jacobian(y, 2.0e3, jac);
    benchmark::DoNotOptimize(jac.data());
  }
}
BENCHMARK(BM_Jacobian)->Arg(0)->Arg(1);

void BM_NvPulse(benchmark::State& state) {
  ModelSpec m = build_preset("nv");
  m.pump = PumpSchedule::pulse(0.0, 12e-3, pump_rate_from_power(m.optics, 2.0));
  const auto sys = compile_rhs(complete_system(m));
  const auto start = thermal_initial_state(sys);
  for (auto _ : state) benchmark::DoNotOptimize(integrate(sys, start, 20e-3, {}));
}
BENCHMARK(BM_NvPulse)->Unit(benchmark::kMillisecond);

void BM_SteadyState(benchmark::State& state) {
  const ModelSpec m = preset_with_pump(preset_name(state.range(0)), state.range(0) == 0 ? 2.0 : 2.0e3);
  const auto sys = compile_rhs(complete_system(m));
  const auto start = thermal_initial_state(sys);
  const double xi = m.pump.rate_at(0.0);
  for (auto _ : state) benchmark::DoNotOptimize(find_steady_state(sys, start, xi));
}
BENCHMARK(BM_SteadyState)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

void BM_Spectrum(benchmark::State& state) {
  const ModelSpec m = preset_with_pump("nv", 2.0);
  const double xi = m.pump.rate_at(0.0);
  const auto sys = compile_rhs(complete_system(m));
  const auto steady = find_steady_state(sys, thermal_initial_state(sys), xi);
  const auto rs = build_regression_system(sys, steady.state, xi);
  for (auto _ : state) benchmark::DoNotOptimize(spectrum_and_linewidth(rs));
}
BENCHMARK(BM_Spectrum)->Unit(benchmark::kMicrosecond);

void BM_PumpSweep(benchmark::State& state) {
  const ModelSpec m = build_preset("nv");
  SweepOptions o;
  o.compute_spectrum = false;
  o.jobs = 1;
  const auto grid = log_grid(100.0, 1e7, 11);
  for (auto _ : state) benchmark::DoNotOptimize(pump_sweep(m, grid, o));
}
BENCHMARK(BM_PumpSweep)->Unit(benchmark::kMillisecond);

} // namespace
BENCHMARK_MAIN();
