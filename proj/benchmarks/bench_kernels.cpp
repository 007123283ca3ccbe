#include <benchmark/benchmark.h>

#include <vector>

#include "endo/kernels.hpp"
#include "endo/rng.hpp"

namespace {

template <typename T>
std::vector<T> random_vec(endo::Rng& rng, std::size_t n) {
    std::vector<T> v(n);
    for (auto& x : v) x = T(rng.normal());
    return v;
}

template <typename T>
void BM_MatmulAcc(benchmark::State& state) {
    const auto n = std::size_t(state.range(0));
    endo::Rng rng(1);
    const auto a = random_vec<T>(rng, n * n);
    const auto b = random_vec<T>(rng, n * n);
    std::vector<T> c(n * n);
    for (auto _ : state) {
        endo::kernels::matmul_acc(a.data(), b.data(), c.data(), n, n, n);
        benchmark::DoNotOptimize(c.data());
        benchmark::ClobberMemory();
    }
    state.SetItemsProcessed(state.iterations() * std::int64_t(2 * n * n * n));
}
BENCHMARK(BM_MatmulAcc<float>)->Arg(64)->Arg(128)->Arg(256);
BENCHMARK(BM_MatmulAcc<double>)->Arg(64)->Arg(128)->Arg(256);

template <typename T>
void BM_Linear(benchmark::State& state) {
    // Desk shapes: 16 patches x 128 features into a 4x MLP.
    const std::size_t m = std::size_t(state.range(0)), k = 128, n = 512;
    endo::Rng rng(2);
    const auto x = random_vec<T>(rng, m * k);
    const auto w = random_vec<T>(rng, k * n);
    const auto b = random_vec<T>(rng, n);
    std::vector<T> y(m * n);
    for (auto _ : state) {
        endo::kernels::linear(x.data(), w.data(), b.data(), y.data(), m, k, n);
        benchmark::DoNotOptimize(y.data());
    }
    state.SetItemsProcessed(state.iterations() * std::int64_t(2 * m * k * n));
}
BENCHMARK(BM_Linear<float>)->Arg(1)->Arg(16)->Arg(192);

template <typename T>
void BM_LayerNormRow(benchmark::State& state) {
    const auto n = std::size_t(state.range(0));
    endo::Rng rng(3);
    const auto x = random_vec<T>(rng, n);
    const std::vector<T> g(n, T(1)), b(n, T(0));
    std::vector<T> y(n);
    for (auto _ : state) {
        benchmark::DoNotOptimize(endo::kernels::layer_norm_row(x.data(), g.data(), b.data(), T(1e-5), y.data(), n));
    }
}
BENCHMARK(BM_LayerNormRow<float>)->Arg(128)->Arg(512);

template <typename T>
void BM_AttendRow(benchmark::State& state) {
    // One decoder query against the full context of up to 12 images x 16 patches.
    const auto n_keys = std::size_t(state.range(0));
    const std::size_t d = 128, head_dim = 32;
    endo::Rng rng(4);
    const auto q = random_vec<T>(rng, head_dim);
    const auto k = random_vec<T>(rng, n_keys * d);
    const auto v = random_vec<T>(rng, n_keys * d);
    std::vector<T> probs(n_keys), out(head_dim);
    const T scale = T(1) / T(5.656854249492381);
    for (auto _ : state) {
        endo::kernels::attend_row(q.data(), k.data(), v.data(), d, head_dim, n_keys, scale,
                                  [](std::size_t) { return true; }, probs.data(), out.data());
        benchmark::DoNotOptimize(out.data());
    }
}
BENCHMARK(BM_AttendRow<float>)->Arg(16)->Arg(192);

}  // namespace

BENCHMARK_MAIN();
