#include <random>

#include <benchmark/benchmark.h>

#include "netchoice/ambassador.hpp"
#include "netchoice/choice.hpp"
#include "netchoice/families.hpp"
#include "netchoice/herding.hpp"

using namespace netchoice;

namespace {

NetworkModel sized_model(std::size_t agents, double density) {
    std::mt19937_64 rng(agents);
    families::RandomModelOptions opt;
    opt.agents = agents;
    opt.choices = 4;
    opt.density = density;
    return families::random_model(rng, opt);
}

void solve_with(benchmark::State& state, Solver solver) {
    const auto model = sized_model(static_cast<std::size_t>(state.range(0)), 8.0 / static_cast<double>(state.range(0)));
    for (auto _ : state) benchmark::DoNotOptimize(solve_choice_matrix(model, solver));
}

void BM_SolveDense(benchmark::State& state) { solve_with(state, Solver::dense); }
void BM_SolveIterative(benchmark::State& state) { solve_with(state, Solver::iterative); }
BENCHMARK(BM_SolveDense)->RangeMultiplier(4)->Range(16, 1024);
BENCHMARK(BM_SolveIterative)->RangeMultiplier(4)->Range(16, 1024);

void greedy(benchmark::State& state, bool lazy) {
    const auto model = sized_model(static_cast<std::size_t>(state.range(0)), 0.1);
    for (auto _ : state) benchmark::DoNotOptimize(greedy_select(model, 0, model.endowment(), 10, lazy));
}

void BM_GreedyPlain(benchmark::State& state) { greedy(state, false); }
void BM_GreedyLazy(benchmark::State& state) { greedy(state, true); }
BENCHMARK(BM_GreedyPlain)->Arg(50)->Arg(200);
BENCHMARK(BM_GreedyLazy)->Arg(50)->Arg(200);

void BM_Urn(benchmark::State& state) {
    for (auto _ : state)
        benchmark::DoNotOptimize(simulate_urn(static_cast<std::size_t>(state.range(0)), 1000, 1000, 7));
}
BENCHMARK(BM_Urn)->Arg(2)->Arg(8);

void BM_HerdMoments(benchmark::State& state) {
    for (auto _ : state) benchmark::DoNotOptimize(herd_moments(static_cast<std::size_t>(state.range(0)), 4));
}
BENCHMARK(BM_HerdMoments)->Arg(50)->Arg(200);

} // namespace

BENCHMARK_MAIN();
