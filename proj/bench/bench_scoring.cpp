// Row-parallel scoring kernels against their serial references.

#include <benchmark/benchmark.h>

#include <map>

#include "lsood/bench.hpp"
#include "lsood/gaussian_ood.hpp"

namespace {

struct Fixture {
    lsood::GaussianOodModel model;
    lsood::FeatureSet test;
};

const Fixture& fixture(std::size_t rows) {
    static std::map<std::size_t, Fixture> cache;
    auto it = cache.find(rows);
    if (it != cache.end()) return it->second;
    lsood::Rng rng(7);
    const std::size_t p = 16, C = 8;
    lsood::FeatureSet train;
    train.class_count = C;
    train.features = lsood::Matrix(4000, p);
    for (std::size_t i = 0; i < 4000; ++i) {
        train.labels.push_back(static_cast<int>(i % C));
        for (double& v : train.features.row(i)) v = rng.normal() + static_cast<double>(i % C);
    }
    Fixture f;
    f.model = lsood::fit_gaussians(train);
    f.test.class_count = C;
    f.test.features = lsood::Matrix(rows, p);
    f.test.labels.assign(rows, lsood::kOodLabel);
    for (double& v : f.test.features.data()) v = 3.0 * rng.normal();
    return cache.emplace(rows, std::move(f)).first->second;
}

void BM_ScoreMdParallel(benchmark::State& state) {
    const auto& f = fixture(static_cast<std::size_t>(state.range(0)));
    for (auto _ : state) benchmark::DoNotOptimize(lsood::score_md(f.model, f.test));
    state.SetItemsProcessed(state.iterations() * state.range(0));
}

void BM_ScoreMdSerial(benchmark::State& state) {
    const auto& f = fixture(static_cast<std::size_t>(state.range(0)));
    for (auto _ : state) benchmark::DoNotOptimize(lsood::serial::score_md(f.model, f.test));
    state.SetItemsProcessed(state.iterations() * state.range(0));
}

void BM_ScoreRmdParallel(benchmark::State& state) {
    const auto& f = fixture(static_cast<std::size_t>(state.range(0)));
    for (auto _ : state) benchmark::DoNotOptimize(lsood::score_rmd(f.model, f.test));
    state.SetItemsProcessed(state.iterations() * state.range(0));
}

void BM_ScoreRmdSerial(benchmark::State& state) {
    const auto& f = fixture(static_cast<std::size_t>(state.range(0)));
    for (auto _ : state) benchmark::DoNotOptimize(lsood::serial::score_rmd(f.model, f.test));
    state.SetItemsProcessed(state.iterations() * state.range(0));
}

void BM_Generate(benchmark::State& state) {
    lsood::BenchConfig cfg;
    for (auto _ : state) benchmark::DoNotOptimize(lsood::generate(cfg));
}

}  // namespace

BENCHMARK(BM_ScoreMdParallel)->Arg(1000)->Arg(20000);
BENCHMARK(BM_ScoreMdSerial)->Arg(1000)->Arg(20000);
BENCHMARK(BM_ScoreRmdParallel)->Arg(1000)->Arg(20000);
BENCHMARK(BM_ScoreRmdSerial)->Arg(1000)->Arg(20000);
BENCHMARK(BM_Generate);

BENCHMARK_MAIN();
