#include <benchmark/benchmark.h>

#include "mfdl/autodiff.hpp"
#include "mfdl/nn.hpp"
#include "mfdl/opt_stoch.hpp"
#include "mfdl/rl.hpp"
#include "mfdl/rng.hpp"

using namespace mfdl;

static void BM_ReverseGradWorkedExample(benchmark::State& state) {
    const auto g = autodiff::worked_example_graph();
    const Vec x{0.0, 1.0, 3.14159};
    for (auto _ : state) {
        auto r = autodiff::reverse_grad(g, x);
        benchmark::DoNotOptimize(r.grad.data());
    }
}
BENCHMARK(BM_ReverseGradWorkedExample);

static void BM_ReverseHvp(benchmark::State& state) {
    const auto g = autodiff::worked_example_graph();
    const Vec x{0.0, 1.0, 3.14159};
    const Vec v{1.0, -0.5, 0.25};
    for (auto _ : state) {
        auto r = autodiff::reverse_hvp(g, x, v);
        benchmark::DoNotOptimize(r.hvp.data());
    }
}
BENCHMARK(BM_ReverseHvp);

static void BM_MlpForward(benchmark::State& state) {
    nn::MlpSpec spec;
    spec.widths = {8, 32, 32, 4};
    const auto theta = nn::mlp_init(spec, 0);
    SplitRng rng(1);
    const Vec x = rng.gaussian_vector(8);
    for (auto _ : state) {
        auto y = nn::mlp_forward(spec, theta, x);
        benchmark::DoNotOptimize(y.data());
    }
}
BENCHMARK(BM_MlpForward);

static void BM_BellmanBackupOpt(benchmark::State& state) {
    SplitRng rng(7);
    const auto mdp = rl::random_mdp(static_cast<int>(state.range(0)), 4, rng);
    Vec v(mdp.n_states, 0.0);
    for (auto _ : state) {
        v = rl::bellman_backup_opt(mdp, v);
        benchmark::DoNotOptimize(v.data());
    }
}
BENCHMARK(BM_BellmanBackupOpt)->Arg(16)->Arg(128)->Arg(512);

static void BM_NewtonSchulz(benchmark::State& state) {
    SplitRng rng(3);
    Mat m(32, 16);
    for (auto& e : m.data) e = rng.next_gaussian();
    for (auto _ : state) {
        auto o = optstoch::newton_schulz(m, {}, 5, 1e-7);
        benchmark::DoNotOptimize(o.data.data());
    }
}
BENCHMARK(BM_NewtonSchulz);

BENCHMARK_MAIN();
