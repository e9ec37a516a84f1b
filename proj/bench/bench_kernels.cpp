// Serial reference vs OpenMP kernels. Thread count follows OMP_NUM_THREADS.

#include <benchmark/benchmark.h>

#include "harmonica/kernels.hpp"
#include "harmonica/nn/layers.hpp"
#include "harmonica/reference.hpp"
#include "harmonica/rng.hpp"
#include "harmonica/spectral.hpp"

using namespace harmonica;

namespace {

Tensor filled(Shape s, std::uint64_t seed) {
    Rng rng(seed);
    Tensor t(s);
    for (auto& v : t.vec()) v = rng.uniform(-1.0, 1.0);
    return t;
}

// (batch, channels in, channels out, size, kernel)
void conv_args(benchmark::internal::Benchmark* b) {
    b->Args({8, 16, 32, 32, 3})->Args({8, 32, 64, 16, 3})->Args({4, 2, 32, 96, 5})->Unit(benchmark::kMillisecond);
}

void BM_conv2d_ref(benchmark::State& state) {
    const auto [n, c, m, s, k] = std::tuple(state.range(0), state.range(1), state.range(2), state.range(3), state.range(4));
    const Tensor x = filled(Shape(n, c, s, s), 1);
    const Tensor w = filled(Shape(m, c, k, k), 2);
    const auto spec = ConvSpec::square(k, 1, k / 2);
    for (auto _ : state) benchmark::DoNotOptimize(ref::conv2d(x, w, spec));
}
BENCHMARK(BM_conv2d_ref)->Apply(conv_args);

void BM_conv2d_omp(benchmark::State& state) {
    const auto [n, c, m, s, k] = std::tuple(state.range(0), state.range(1), state.range(2), state.range(3), state.range(4));
    const Tensor x = filled(Shape(n, c, s, s), 1);
    const Tensor w = filled(Shape(m, c, k, k), 2);
    const auto spec = ConvSpec::square(k, 1, k / 2);
    for (auto _ : state) benchmark::DoNotOptimize(kernels::conv2d(x, w, spec));
}
BENCHMARK(BM_conv2d_omp)->Apply(conv_args);

void BM_conv2d_backward_ref(benchmark::State& state) {
    const Tensor x = filled(Shape(8, 16, 32, 32), 1);
    const Tensor w = filled(Shape(32, 16, 3, 3), 2);
    const auto spec = ConvSpec::square(3, 1, 1);
    const Tensor g = filled(Shape(8, 32, 32, 32), 3);
    for (auto _ : state) {
        benchmark::DoNotOptimize(ref::conv2d_backward_input(g, w, spec, x.shape()));
        benchmark::DoNotOptimize(ref::conv2d_backward_kernels(x, g, spec, w.shape()));
    }
}
BENCHMARK(BM_conv2d_backward_ref)->Unit(benchmark::kMillisecond);

void BM_conv2d_backward_omp(benchmark::State& state) {
    const Tensor x = filled(Shape(8, 16, 32, 32), 1);
    const Tensor w = filled(Shape(32, 16, 3, 3), 2);
    const auto spec = ConvSpec::square(3, 1, 1);
    const Tensor g = filled(Shape(8, 32, 32, 32), 3);
    for (auto _ : state) {
        benchmark::DoNotOptimize(kernels::conv2d_backward_input(g, w, spec, x.shape()));
        benchmark::DoNotOptimize(kernels::conv2d_backward_kernels(x, g, spec, w.shape()));
    }
}
BENCHMARK(BM_conv2d_backward_omp)->Unit(benchmark::kMillisecond);

void BM_pool2d_ref(benchmark::State& state) {
    const Tensor x = filled(Shape(8, 64, 32, 32), 1);
    const PoolSpec spec{PoolKind::max, 3, 2, 1};
    for (auto _ : state) benchmark::DoNotOptimize(ref::pool2d(x, spec));
}
BENCHMARK(BM_pool2d_ref)->Unit(benchmark::kMillisecond);

void BM_pool2d_omp(benchmark::State& state) {
    const Tensor x = filled(Shape(8, 64, 32, 32), 1);
    const PoolSpec spec{PoolKind::max, 3, 2, 1};
    for (auto _ : state) benchmark::DoNotOptimize(kernels::pool2d(x, spec));
}
BENCHMARK(BM_pool2d_omp)->Unit(benchmark::kMillisecond);

void BM_linear_ref(benchmark::State& state) {
    const Tensor x = filled(Shape(64, 1152, 1, 1), 1);
    const Tensor w = filled(Shape(1024, 1152, 1, 1), 2);
    const Tensor b = filled(Shape(1, 1024, 1, 1), 3);
    for (auto _ : state) benchmark::DoNotOptimize(ref::linear(x, w, b));
}
BENCHMARK(BM_linear_ref)->Unit(benchmark::kMillisecond);

void BM_linear_omp(benchmark::State& state) {
    const Tensor x = filled(Shape(64, 1152, 1, 1), 1);
    const Tensor w = filled(Shape(1024, 1152, 1, 1), 2);
    const Tensor b = filled(Shape(1, 1024, 1, 1), 3);
    for (auto _ : state) benchmark::DoNotOptimize(kernels::linear(x, w, b));
}
BENCHMARK(BM_linear_omp)->Unit(benchmark::kMillisecond);

// DCT stage of a harmonic block: dense depthwise conv vs rank-1 separable path
void BM_dct_dense(benchmark::State& state) {
    const std::size_t k = static_cast<std::size_t>(state.range(0));
    const Tensor x = filled(Shape(8, 16, 32, 32), 1);
    const auto basis = shared_dct_basis(k);
    const auto sel = select_frequencies(k, std::nullopt);
    for (auto _ : state) benchmark::DoNotOptimize(dct_transform_dense(x, *basis, sel, ConvSpec::square(k, 1, k / 2)));
}
BENCHMARK(BM_dct_dense)->Arg(3)->Arg(5)->Unit(benchmark::kMillisecond);

void BM_dct_separable(benchmark::State& state) {
    const std::size_t k = static_cast<std::size_t>(state.range(0));
    const Tensor x = filled(Shape(8, 16, 32, 32), 1);
    const auto basis = shared_dct_basis(k);
    const auto sel = select_frequencies(k, std::nullopt);
    for (auto _ : state) benchmark::DoNotOptimize(dct_transform(x, *basis, sel, ConvSpec::square(k, 1, k / 2)));
}
BENCHMARK(BM_dct_separable)->Arg(3)->Arg(5)->Unit(benchmark::kMillisecond);

void BM_harmonic_block_forward(benchmark::State& state) {
    Rng rng(1);
    const std::size_t k = 3;
    const auto lambda = state.range(0) == 0 ? std::nullopt : std::optional<std::size_t>(state.range(0));
    nn::HarmonicBlock h({16, 32, k, 1, 1, lambda, false, false}, rng);
    const Tensor x = filled(Shape(8, 16, 32, 32), 2);
    for (auto _ : state) benchmark::DoNotOptimize(h.forward(x, false));
}
BENCHMARK(BM_harmonic_block_forward)->Arg(0)->Arg(3)->Arg(2)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
