#include <benchmark/benchmark.h>

#include "timesql/data.hpp"
#include "timesql/losses.hpp"
#include "timesql/model.hpp"
#include "timesql/patching.hpp"
#include "timesql/rng.hpp"
#include "timesql/theory.hpp"
#include "timesql/training.hpp"

using namespace timesql;

namespace {

SeriesMatrix random_series(std::size_t n_vars, std::size_t n_steps, std::uint64_t seed) {
    Rng rng(seed);
    Matrix values(n_vars, n_steps);
    for (double& v : values.data) v = rng.uniform(-3.0, 3.0);
    return make_series(std::move(values));
}

ModelConfig bench_model(std::size_t n_vars, std::size_t hidden) {
    ModelConfig cfg;
    cfg.num_variables = n_vars;
    cfg.lookback = 336;
    cfg.horizon = 96;
    cfg.hidden = hidden;
    cfg.scales.scales = {{16, 8}, {48, 24}, {96, 48}};
    return cfg;
}

void BM_patch_single(benchmark::State& state) {
    const SeriesMatrix input = random_series(7, 336, 1);
    const PatchScaleSpec scale{16, 8};
    for (auto _ : state) {
        benchmark::DoNotOptimize(patch(input, scale));
    }
}
BENCHMARK(BM_patch_single);

void BM_multi_patch_triple(benchmark::State& state) {
    const SeriesMatrix input = random_series(7, 336, 2);
    const MultiScaleConfig config{{{16, 8}, {48, 24}, {96, 48}}};
    for (auto _ : state) {
        benchmark::DoNotOptimize(multi_patch(input, config));
    }
}
BENCHMARK(BM_multi_patch_triple);

void BM_sql_loss(benchmark::State& state) {
    Rng rng(3);
    Matrix pred(7, 96), target(7, 96);
    for (double& v : pred.data) v = rng.uniform(-2.0, 2.0);
    for (double& v : target.data) v = rng.uniform(-2.0, 2.0);
    const SqlHyperParams hp;
    for (auto _ : state) {
        benchmark::DoNotOptimize(sql_loss(pred, target, hp));
    }
}
BENCHMARK(BM_sql_loss);

void BM_forward(benchmark::State& state) {
    const auto hidden = static_cast<std::size_t>(state.range(0));
    const ModelConfig cfg = bench_model(7, hidden);
    const ModelParams params = ModelParams::random_init(cfg, 4);
    const SeriesMatrix window = random_series(7, 336, 5);
    for (auto _ : state) {
        benchmark::DoNotOptimize(forward(params, window));
    }
}
BENCHMARK(BM_forward)->Arg(32)->Arg(128);

void BM_forward_backward(benchmark::State& state) {
    const auto hidden = static_cast<std::size_t>(state.range(0));
    const ModelConfig cfg = bench_model(7, hidden);
    const ModelParams params = ModelParams::random_init(cfg, 4);
    const SeriesMatrix window = random_series(7, 336, 5);
    const SeriesMatrix target = random_series(7, 96, 6);
    const SqlHyperParams hp;
    for (auto _ : state) {
        const ForwardTrace trace = forward(params, window);
        const LossReport report = sql_loss(trace.prediction, target.values, hp);
        benchmark::DoNotOptimize(backward(trace, report.grad_wrt_prediction, params));
    }
}
BENCHMARK(BM_forward_backward)->Arg(32)->Arg(128);

void BM_adam_step(benchmark::State& state) {
    const std::size_t n = 100000;
    Rng rng(7);
    std::vector<double> params(n), grad(n);
    for (double& v : params) v = rng.uniform(-1.0, 1.0);
    for (double& v : grad) v = rng.uniform(-1.0, 1.0);
    AdamState adam;
    for (auto _ : state) {
        adam_step(params, grad, adam, 1e-4, 0.9, 0.999, 1e-8);
        benchmark::DoNotOptimize(params.data());
    }
    state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * n));
}
BENCHMARK(BM_adam_step);

void BM_generate_trig(benchmark::State& state) {
    const TrigSpec spec = TrigSpec::reference_preset(20000, 0.4, 0);
    for (auto _ : state) {
        benchmark::DoNotOptimize(generate_trig(spec));
    }
}
BENCHMARK(BM_generate_trig);

void BM_theorem1(benchmark::State& state) {
    for (auto _ : state) {
        benchmark::DoNotOptimize(verify_theorem1(100000, 1));
    }
    state.SetItemsProcessed(state.iterations() * 100000);
}
BENCHMARK(BM_theorem1);

}  // namespace

BENCHMARK_MAIN();
