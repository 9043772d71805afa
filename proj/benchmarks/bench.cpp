#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "suite/comparison.hpp"
#include "suite/fisher.hpp"
#include "suite/polling.hpp"
#include "suite/simulation.hpp"
#include "suite/stratified_audit.hpp"

using namespace suite;

namespace {

ContestSpec example_contest() {
    ContestSpec c;
    c.risk_limit = 0.1;
    c.winners = {"A"};
    c.losers = {"B"};
    c.strata.push_back({"cvr", StratumKind::cvr, 100'000, {{"A", 50'900}, {"B", 49'100}}});
    c.strata.push_back({"poll", StratumKind::no_cvr, 10'000, {{"A", 5'090}, {"B", 4'910}}});
    return c;
}

std::vector<polling::Interpretation> polled(Votes n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::vector<polling::Interpretation> out;
    for (Votes i = 0; i < n; ++i) {
        out.push_back(rng() % 100 < 51 ? polling::Interpretation::w : polling::Interpretation::l);
    }
    return out;
}

void BM_ProfileMax(benchmark::State& state) {
    const polling::PollingNull null{state.range(0), 0, 0, 0, 0};
    const auto draws = polled(state.range(0) / 20, 1);
    const auto t = polling::tally_of(draws);
    for (auto _ : state) benchmark::DoNotOptimize(polling::profile_max(t, null));
}
BENCHMARK(BM_ProfileMax)->Arg(10'000)->Arg(100'000)->Arg(1'000'000);

void BM_SprtSequential(benchmark::State& state) {
    const polling::PollingNull null{10'000, 0, 5'090, 4'910, 0};
    const auto draws = polled(state.range(0), 2);
    for (auto _ : state) benchmark::DoNotOptimize(polling::sprt_sequential_log_pvalue(draws, null));
    state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_SprtSequential)->Arg(500)->Arg(5'000);

void BM_KmSequential(benchmark::State& state) {
    const std::vector<int> d(static_cast<std::size_t>(state.range(0)), 0);
    for (auto _ : state) {
        benchmark::DoNotOptimize(comparison::km_sequential_log_pvalue(d, 100'000, 1'980, 0.9));
    }
}
BENCHMARK(BM_KmSequential)->Arg(700)->Arg(10'000);

void BM_MaximizeCombined(benchmark::State& state) {
    const auto contest = example_contest();
    std::vector<StratumSample> samples(2);
    samples[0].discrepancies.assign(700, 0);
    for (auto d : polled(500, 3)) samples[1].interpretations.push_back(d == polling::Interpretation::w ? "w" : "l");
    for (auto _ : state) benchmark::DoNotOptimize(audit_pvalue(contest, samples));
}
BENCHMARK(BM_MaximizeCombined);

void BM_SimulateOnce(benchmark::State& state) {
    sim::SimulationScenario sc;
    sc.contest = example_contest();
    sc.population = sim::build_population(sc.contest, {});
    sc.plan = {700, 500};
    sc.replicates = 1;
    std::int64_t i = 0;
    for (auto _ : state) benchmark::DoNotOptimize(sim::simulate_once(sc, i++));
}
BENCHMARK(BM_SimulateOnce);

}  // namespace

BENCHMARK_MAIN();
