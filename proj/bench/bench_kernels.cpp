#include <benchmark/benchmark.h>

#include <vector>

#include "autolap/kernels.hpp"
#include "autolap/rng.hpp"

// OpenMP kernels vs their serial references on training-sized problems.

using namespace autolap;

static std::vector<float> rand_vec(size_t n, uint64_t seed) {
    Rng rng(seed);
    std::vector<float> v(n);
    for (auto& x : v) x = rng.normal_f();
    return v;
}

static void BM_matmul_omp(benchmark::State& state) {
    const int m = (int)state.range(0), k = (int)state.range(1), n = (int)state.range(2);
    auto a = rand_vec((size_t)m * k, 1), b = rand_vec((size_t)k * n, 2);
    std::vector<float> c((size_t)m * n);
    for (auto _ : state) {
        kernels::matmul(a.data(), b.data(), c.data(), m, k, n);
        benchmark::DoNotOptimize(c.data());
    }
    state.SetItemsProcessed(state.iterations() * 2L * m * k * n);
}

static void BM_matmul_serial(benchmark::State& state) {
    const int m = (int)state.range(0), k = (int)state.range(1), n = (int)state.range(2);
    auto a = rand_vec((size_t)m * k, 1), b = rand_vec((size_t)k * n, 2);
    std::vector<float> c((size_t)m * n);
    for (auto _ : state) {
        kernels::matmul_serial(a.data(), b.data(), c.data(), m, k, n);
        benchmark::DoNotOptimize(c.data());
    }
    state.SetItemsProcessed(state.iterations() * 2L * m * k * n);
}

static void BM_conv2d_omp(benchmark::State& state) {
    const int batch = (int)state.range(0);
    kernels::ConvDims d{batch, 3, 64, 64, 32, 3, 3, 2, 1};
    auto x = rand_vec((size_t)d.n * d.cin * d.h * d.w, 1);
    auto w = rand_vec((size_t)d.cout * d.cin * d.kh * d.kw, 2);
    auto b = rand_vec(d.cout, 3);
    std::vector<float> y((size_t)d.n * d.cout * d.oh() * d.ow());
    for (auto _ : state) {
        kernels::conv2d_forward(x.data(), w.data(), b.data(), y.data(), d);
        benchmark::DoNotOptimize(y.data());
    }
}

static void BM_conv2d_serial(benchmark::State& state) {
    const int batch = (int)state.range(0);
    kernels::ConvDims d{batch, 3, 64, 64, 32, 3, 3, 2, 1};
    auto x = rand_vec((size_t)d.n * d.cin * d.h * d.w, 1);
    auto w = rand_vec((size_t)d.cout * d.cin * d.kh * d.kw, 2);
    auto b = rand_vec(d.cout, 3);
    std::vector<float> y((size_t)d.n * d.cout * d.oh() * d.ow());
    for (auto _ : state) {
        kernels::conv2d_forward_serial(x.data(), w.data(), b.data(), y.data(), d);
        benchmark::DoNotOptimize(y.data());
    }
}

BENCHMARK(BM_matmul_omp)->Args({256, 512, 256})->Args({64, 256, 256});
BENCHMARK(BM_matmul_serial)->Args({256, 512, 256})->Args({64, 256, 256});
BENCHMARK(BM_conv2d_omp)->Arg(16)->Arg(64);
BENCHMARK(BM_conv2d_serial)->Arg(16)->Arg(64);

BENCHMARK_MAIN();
