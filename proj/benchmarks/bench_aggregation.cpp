#include <benchmark/benchmark.h>

#include "psc/aggregation.hpp"
#include "psc/noise.hpp"
#include "psc/pipeline.hpp"
#include "psc/ranker.hpp"
#include "psc/ranking.hpp"
#include "psc/rng.hpp"

namespace {

std::vector<psc::Ranking> consensus_samples(std::int32_t n, std::int32_t m, std::uint64_t seed) {
    psc::Rng rng(seed);
    const psc::Ranking truth = psc::Ranking::identity(n);
    const psc::NoiseModel noise = psc::NoiseModel::positional_window(1, std::max(2, n / 3));
    std::vector<psc::Ranking> samples;
    samples.reserve(static_cast<std::size_t>(m));
    for (std::int32_t i = 0; i < m; ++i) {
        samples.push_back(psc::sample_noisy_ranking(truth, noise, rng));
    }
    return samples;
}

void BM_kendall_distance(benchmark::State& state) {
    const auto n = static_cast<std::int32_t>(state.range(0));
    psc::Rng rng(1);
    const psc::Ranking a = psc::random_ranking(n, rng);
    const psc::Ranking b = psc::random_ranking(n, rng);
    for (auto _ : state) {
        benchmark::DoNotOptimize(psc::kendall_distance(a, b));
    }
}
BENCHMARK(BM_kendall_distance)->Arg(10)->Arg(20)->Arg(100);

void BM_build_preference_matrix(benchmark::State& state) {
    const auto samples = consensus_samples(static_cast<std::int32_t>(state.range(0)), 20, 2);
    for (auto _ : state) {
        benchmark::DoNotOptimize(psc::build_preference_matrix(samples));
    }
}
BENCHMARK(BM_build_preference_matrix)->Arg(10)->Arg(20)->Arg(100);

void BM_kemeny_exact(benchmark::State& state) {
    const auto samples = consensus_samples(static_cast<std::int32_t>(state.range(0)), 20, 3);
    for (auto _ : state) {
        benchmark::DoNotOptimize(psc::kemeny_exact(samples));
    }
}
BENCHMARK(BM_kemeny_exact)->DenseRange(6, 12, 2);

void BM_kemeny_solve_consensus(benchmark::State& state) {
    const auto samples = consensus_samples(static_cast<std::int32_t>(state.range(0)), 20, 4);
    const psc::PreferenceMatrix w = psc::build_preference_matrix(samples);
    for (auto _ : state) {
        benchmark::DoNotOptimize(psc::kemeny_solve(w));
    }
}
BENCHMARK(BM_kemeny_solve_consensus)->Arg(14)->Arg(17)->Arg(20);

void BM_borda(benchmark::State& state) {
    const auto samples = consensus_samples(static_cast<std::int32_t>(state.range(0)), 20, 5);
    for (auto _ : state) {
        benchmark::DoNotOptimize(psc::borda(samples));
    }
}
BENCHMARK(BM_borda)->Arg(20)->Arg(100);

void BM_rrf(benchmark::State& state) {
    const auto samples = consensus_samples(static_cast<std::int32_t>(state.range(0)), 20, 6);
    for (auto _ : state) {
        benchmark::DoNotOptimize(psc::rrf(samples));
    }
}
BENCHMARK(BM_rrf)->Arg(20)->Arg(100);

void BM_psc_rank_simulated(benchmark::State& state) {
    const auto n = static_cast<std::int32_t>(state.range(0));
    std::vector<psc::Item> items;
    for (std::int32_t i = 0; i < n; ++i) {
        items.push_back(psc::Item{"d" + std::to_string(100 + i), "payload"});
    }
    const psc::ItemList list{std::move(items)};
    psc::SimulatedRanker ranker = psc::SimulatedRanker::noisy(
        psc::TruthOracle::from_gold(list, psc::Ranking::identity(n)),
        psc::NoiseModel::positional_window(1, std::max(2, n / 3)));
    psc::PscConfig config;
    config.m = 20;
    config.seed = 7;
    for (auto _ : state) {
        benchmark::DoNotOptimize(psc::psc_rank(list, ranker, config));
    }
}
BENCHMARK(BM_psc_rank_simulated)->Arg(10)->Arg(12);

} // namespace

BENCHMARK_MAIN();
