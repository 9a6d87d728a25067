// Serial reference vs OpenMP kernels on the hot paths.

#include "stcorr/detectors.hpp"
#include "stcorr/factor_model.hpp"
#include "stcorr/spectra.hpp"
#include "stcorr/synth.hpp"

#include <benchmark/benchmark.h>

using namespace stcorr;

namespace {

Exec exec_of(const benchmark::State& state) { return state.range(0) == 0 ? Exec::serial : Exec::parallel; }

void label(benchmark::State& state) {
    state.SetLabel(state.range(0) == 0 ? "serial" : "parallel x" + std::to_string(num_threads()));
}

void BM_FrvCurve(benchmark::State& state) {
    Ar1ModelParams p{0.5, 33.0 / 200.0};
    p.with_default_grid();
    for (auto _ : state) benchmark::DoNotOptimize(frv_ar1_curve(p, exec_of(state)));
    label(state);
}

void BM_ModelCache(benchmark::State& state) {
    const auto b = FitGrid::make(1, 5, 0.0, 0.95, 0.05).b_values;
    for (auto _ : state) benchmark::DoNotOptimize(ModelDensityCache(33, 200, b, {}, exec_of(state)));
    label(state);
}

void BM_Fit(benchmark::State& state) {
    const auto grid = FitGrid::defaults();
    static const ModelDensityCache cache(57, 200, grid.b_values);
    const auto w = standardize_rows(plant_factors(57, 200, 3, 3.0, 0.5, 1).values());
    for (auto _ : state) benchmark::DoNotOptimize(fit_spatio_temporal(w, grid, {}, &cache, exec_of(state)));
    label(state);
}

void BM_Detection(benchmark::State& state) {
    DetectionConfig cfg;
    cfg.grid = FitGrid::make(1, 5, 0.0, 0.95, 0.05);
    ScenarioSpec spec = case1_preset(1);
    spec.samples = 400;
    spec.anomalies[0].onset = 300;
    const auto data = generate(spec);
    static const ModelDensityCache cache = make_model_cache(33, cfg);
    for (auto _ : state) benchmark::DoNotOptimize(run_detection(data, cfg, exec_of(state), &cache));
    label(state);
}

}  // namespace

BENCHMARK(BM_FrvCurve)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_ModelCache)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Fit)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Detection)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond)->Iterations(1);

BENCHMARK_MAIN();
