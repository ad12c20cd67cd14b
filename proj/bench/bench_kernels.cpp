// Serial reference kernels against the OpenMP kernels, plus one Cayley solve
// on the calibrated chain.

#include "phs/benchmarks.hpp"
#include "phs/kernels.hpp"
#include "phs/krylov.hpp"

#include <benchmark/benchmark.h>

#include <random>
#include <vector>

namespace {

std::vector<double> random_data(std::size_t n, unsigned seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> dist(-1.0, 1.0);
    std::vector<double> v(n);
    for (auto& x : v) x = dist(rng);
    return v;
}

template <bool Parallel>
void BM_dot(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    const auto x = random_data(n, 1), y = random_data(n, 2);
    for (auto _ : state) {
        double d = Parallel ? phs::kernels::parallel::dot(x, y) : phs::kernels::serial::dot(x, y);
        benchmark::DoNotOptimize(d);
    }
    state.SetBytesProcessed(static_cast<std::int64_t>(state.iterations() * n * 2 * sizeof(double)));
}

template <bool Parallel>
void BM_axpy(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    const auto x = random_data(n, 1);
    auto y = random_data(n, 2);
    for (auto _ : state) {
        if (Parallel) phs::kernels::parallel::axpy(1e-3, x, y);
        else phs::kernels::serial::axpy(1e-3, x, y);
        benchmark::ClobberMemory();
    }
}

template <bool Parallel>
void BM_skew_tridiag(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    const auto super = random_data(n - 1, 3), x = random_data(n, 4);
    std::vector<double> y(n);
    for (auto _ : state) {
        if (Parallel) phs::kernels::parallel::skew_tridiag_apply(super, x, y);
        else phs::kernels::serial::skew_tridiag_apply(super, x, y);
        benchmark::ClobberMemory();
    }
}

template <bool Parallel>
void BM_csr_matvec(benchmark::State& state) {
    const auto cells = static_cast<phs::Index>(state.range(0) / 2);
    phs::SparseMatrix J = phs::build_msd_chain({.n_cells = cells}).J();
    J.makeCompressed();
    static_assert(sizeof(phs::SparseMatrix::StorageIndex) == sizeof(int));
    const std::size_t n = static_cast<std::size_t>(J.rows());
    const phs::kernels::CsrView view{n, {J.outerIndexPtr(), n + 1},
                            {J.innerIndexPtr(), static_cast<std::size_t>(J.nonZeros())},
                            {J.valuePtr(), static_cast<std::size_t>(J.nonZeros())}};
    const auto x = random_data(n, 5);
    std::vector<double> y(n);
    for (auto _ : state) {
        if (Parallel) phs::kernels::parallel::csr_matvec(view, x, y);
        else phs::kernels::serial::csr_matvec(view, x, y);
        benchmark::ClobberMemory();
    }
}

void BM_cayley_arnoldi_chain(benchmark::State& state) {
    const auto params = phs::scale_to_spectral_radius(phs::MsdChainParams{.n_cells = state.range(0) / 2}, 10.0);
    const auto J = phs::msd_chain_transformed_operator(params);
    const phs::Vector x0 = phs::random_unit_vector(J.dim, 1);
    for (auto _ : state) {
        auto r = phs::cayley_arnoldi(J, x0, 0.005);
        benchmark::DoNotOptimize(r.x.data());
    }
}

void BM_gmres_chain(benchmark::State& state) {
    const auto params = phs::scale_to_spectral_radius(phs::MsdChainParams{.n_cells = state.range(0) / 2}, 10.0);
    const auto J = phs::msd_chain_transformed_operator(params);
    const phs::Vector x0 = phs::random_unit_vector(J.dim, 1);
    const phs::Vector b = x0 + 0.0025 * J(x0);
    const auto A = phs::LinearOperator::shifted(J, 1.0, -0.0025);
    for (auto _ : state) {
        auto r = phs::gmres(A, b);
        benchmark::DoNotOptimize(r.x.data());
    }
}

}  // namespace

BENCHMARK(BM_dot<false>)->Range(1 << 10, 1 << 20);
BENCHMARK(BM_dot<true>)->Range(1 << 10, 1 << 20);
BENCHMARK(BM_axpy<false>)->Range(1 << 10, 1 << 20);
BENCHMARK(BM_axpy<true>)->Range(1 << 10, 1 << 20);
BENCHMARK(BM_skew_tridiag<false>)->Range(1 << 10, 1 << 20);
BENCHMARK(BM_skew_tridiag<true>)->Range(1 << 10, 1 << 20);
BENCHMARK(BM_csr_matvec<false>)->Range(1 << 10, 1 << 18);
BENCHMARK(BM_csr_matvec<true>)->Range(1 << 10, 1 << 18);
BENCHMARK(BM_cayley_arnoldi_chain)->Arg(1000)->Arg(10000);
BENCHMARK(BM_gmres_chain)->Arg(1000)->Arg(10000);

BENCHMARK_MAIN();
