#include <benchmark/benchmark.h>

#include "semcrc/anchor.hpp"
#include "semcrc/calibrate.hpp"
#include "semcrc/synth.hpp"

using namespace semcrc;

static SampleSet make_set(std::size_t n, std::uint64_t seed) {
    PhantomConfig cfg = default_phantom();
    cfg.seed = seed;
    return generate(cfg, n);
}

static void BM_Generate(benchmark::State& state) {
    PhantomConfig cfg = default_phantom();
    for (auto _ : state) {
        cfg.seed++;
        auto set = generate(cfg, static_cast<std::size_t>(state.range(0)));
        benchmark::DoNotOptimize(set);
    }
}
BENCHMARK(BM_Generate)->Arg(16)->Arg(64);

static void BM_CalibrateScalar(benchmark::State& state) {
    auto set = make_set(static_cast<std::size_t>(state.range(0)), 7);
    for (auto _ : state) {
        auto res = calibrate_scalar(set, 0.1);
        benchmark::DoNotOptimize(res);
    }
}
BENCHMARK(BM_CalibrateScalar)->Arg(32)->Arg(100);

static void BM_CalibrateSem(benchmark::State& state) {
    auto set = make_set(static_cast<std::size_t>(state.range(0)), 7);
    LambdaVector anchor = LambdaVector::zeros(set.k_classes);
    for (auto _ : state) {
        auto res = calibrate_semcrc(set, anchor, 0.1);
        benchmark::DoNotOptimize(res);
    }
}
BENCHMARK(BM_CalibrateSem)->Arg(32)->Arg(100);

static void BM_SolveAnchor(benchmark::State& state) {
    auto set = make_set(32, 11);
    auto part = PartitionSpec::semantic(set.k_classes);
    auto prob = subsample(set, part, static_cast<std::size_t>(state.range(0)), 2, 3, 0.1, 0.1);
    for (auto _ : state) {
        auto sol = solve_anchor(prob);
        benchmark::DoNotOptimize(sol);
    }
}
BENCHMARK(BM_SolveAnchor)->Arg(50)->Arg(3000);

BENCHMARK_MAIN();
