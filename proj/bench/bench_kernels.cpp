// Serial reference against the OpenMP variants. Thread count follows
// OMP_NUM_THREADS.
#include <random>

#include <benchmark/benchmark.h>

#include "orbitgraph/kernels.hpp"
#include "orbitgraph/scenario.hpp"
#include "orbitgraph/training.hpp"

using namespace orbitgraph;

namespace {

Matrix random_square(std::size_t n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    Matrix m(n, n);
    for (double& v : m.values()) v = u(rng);
    return m;
}

void BM_MatmulSerial(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    const Matrix a = random_square(n, 1), b = random_square(n, 2);
    for (auto _ : state) benchmark::DoNotOptimize(kernels::matmul_serial(a, b));
    state.SetItemsProcessed(state.iterations() * static_cast<long>(n * n * n));
}

void BM_MatmulOmp(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    const Matrix a = random_square(n, 1), b = random_square(n, 2);
    for (auto _ : state) benchmark::DoNotOptimize(kernels::matmul_omp(a, b));
    state.SetItemsProcessed(state.iterations() * static_cast<long>(n * n * n));
}

ScenarioConfig bench_scenario(int trajectories) {
    ScenarioConfig cfg;
    cfg.trajectory_count = trajectories;
    return cfg;
}

void BM_GenerateSerial(benchmark::State& state) {
    const auto cfg = bench_scenario(static_cast<int>(state.range(0)));
    for (auto _ : state) benchmark::DoNotOptimize(generate_trajectories_serial(cfg));
}

void BM_GenerateOmp(benchmark::State& state) {
    const auto cfg = bench_scenario(static_cast<int>(state.range(0)));
    for (auto _ : state) benchmark::DoNotOptimize(generate_trajectories(cfg));
}

struct ValidationFixture {
    std::vector<ScenarioTrajectory> trajs;
    Model model;

    ValidationFixture() {
        ScenarioConfig cfg = bench_scenario(8);
        cfg.agents_min = cfg.agents_max = 3;
        cfg.step_count = 40;
        trajs = generate_trajectories(cfg);
        model.params = init_params(model.config, 2);
        model.standardizer = Standardizer::fit(trajs);
    }
};

const ValidationFixture& validation_fixture() {
    static const ValidationFixture f;
    return f;
}

void BM_ValidationSerial(benchmark::State& state) {
    const auto& f = validation_fixture();
    for (auto _ : state) benchmark::DoNotOptimize(validation_loss_serial(f.trajs, f.model, {}, 0.25));
}

void BM_ValidationOmp(benchmark::State& state) {
    const auto& f = validation_fixture();
    for (auto _ : state) benchmark::DoNotOptimize(validation_loss(f.trajs, f.model, {}, 0.25));
}

} // namespace

BENCHMARK(BM_MatmulSerial)->Arg(32)->Arg(128)->Arg(256);
BENCHMARK(BM_MatmulOmp)->Arg(32)->Arg(128)->Arg(256);
BENCHMARK(BM_GenerateSerial)->Arg(20)->Arg(100)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_GenerateOmp)->Arg(20)->Arg(100)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_ValidationSerial)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_ValidationOmp)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
